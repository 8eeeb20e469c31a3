#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "zc/config.hpp"
#include "zc/simkernel.hpp"
#include "zc/trace.hpp"

namespace zc {

struct SummaryRow {
  std::string metric;
  std::string value;
  std::string unit;
};

// "# config_hash=<hex> seed=<n>"
std::string csv_header(const SimConfig& config);

// Query milestones in seconds, keyed t50/t90/t99/t100, level_<K>_s,
// t_true_max, converge_1pct_s. Missing milestones are absent.
std::map<std::string, double> milestones(const SimConfig& config, const Trace& trace, const SimResult& result);

std::vector<SummaryRow> summarize(const SimConfig& config, const Trace& trace, const SimResult& result);
void write_summary_csv(const SimConfig& config, const std::vector<SummaryRow>& rows, std::ostream& out);

// events.csv, progress.csv, decisions.csv, summary.csv under dir.
void write_run_outputs(const SimConfig& config, const Trace& trace, const SimResult& result,
                       const std::filesystem::path& dir);

struct Comparison {
  std::vector<SimResult> results;  // in the requested system order
  std::vector<std::map<std::string, double>> milestones;
};

Comparison compare(const SimConfig& config, const Trace& trace, const std::vector<std::string>& systems);
// Joined curves: system,time_s,metric,value
void write_compare_csv(const SimConfig& config, const Comparison& cmp, std::ostream& out);
// One row per milestone, one column per system; cells are t_system / t_zc2.
void write_speedup_csv(const SimConfig& config, const Comparison& cmp, std::ostream& out);

const std::vector<std::string>& sweep_axes();
// Returns a copy of config with the axis set to value. Throws ConfigError for
// an unknown axis.
SimConfig apply_axis(const SimConfig& config, const std::string& axis, double value);

struct SweepPoint {
  double value = 0.0;
  std::string variant;  // "adaptive" or "frozen"
  std::vector<SummaryRow> summary;
  std::map<std::string, double> milestones;
};

// Resource axes also get a frozen variant whose selection keeps reasoning
// about the unswept resources. Members run in parallel; the result is ordered
// by value, then variant.
std::vector<SweepPoint> sweep(const SimConfig& config, const std::string& axis, const std::vector<double>& values);
void write_sweep_csv(const SimConfig& config, const std::string& axis, const std::vector<SweepPoint>& points,
                     std::ostream& out);

}  // namespace zc
