#pragma once

#include <cstdint>
#include <vector>

#include "zc/config.hpp"
#include "zc/simkernel.hpp"
#include "zc/trace.hpp"

namespace zc {

// Uploads every queried frame in temporal order; no camera work.
SimResult run_cloudonly(const SimConfig& config, const Trace& trace);

// One operator picked up front by estimated full-query delay, run to the end.
SimResult run_optop(const SimConfig& config, const Trace& trace);

// Orders or answers from a capture-time index built with detection errors.
SimResult run_preindexall(const SimConfig& config, const Trace& trace);

// Per-frame class counts over the query span as the index reports them.
// Seeded per frame, so the same frame always gets the same entry.
std::vector<int> build_index(const Trace& trace, const Span& span, int class_id, const IndexModel& index,
                             std::uint64_t seed);

}  // namespace zc
