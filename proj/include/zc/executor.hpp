#pragma once

#include <string>
#include <vector>

#include "zc/config.hpp"
#include "zc/simkernel.hpp"
#include "zc/trace.hpp"

namespace zc {

// Knobs that turn the full system into its single-operator variant.
struct RunnerOptions {
  std::string system = "zc2";
  bool use_knowledge = true;  // span priority and crop regions from landmarks
  bool upgrades = true;
  bool continuous_training = true;
  bool cost_model = false;  // pick one operator by estimated full-query delay
};

SimResult run_zc2(const SimConfig& config, const Trace& trace, const RunnerOptions& options = {});

// Dispatches on config.system. Throws InvariantViolation in verify mode when
// the result breaks an invariant.
SimResult run(const SimConfig& config, const Trace& trace);
SimResult run(const SimConfig& config);

bool replay_check(const SimConfig& config, const Trace& trace);
bool replay_check(const SimConfig& config);

// Post-hoc invariant audit of a finished run; empty when sound.
std::vector<std::string> verify_result(const SimConfig& config, const Trace& trace, const SimResult& result);

// Retrieval's first-pass order: spans by landmark density, then a strided
// sweep inside each span.
std::vector<std::int64_t> span_priority_order(const Trace& trace, const Span& span, const TemporalDensity& density,
                                              int stride);

}  // namespace zc
