#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zc/operators.hpp"
#include "zc/simkernel.hpp"
#include "zc/trace.hpp"

namespace zc {

class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PolicyConfig {
  double alpha = 0.5;          // lower bound on f relative to the current operator
  double k_decline = 5.0;      // positive-ratio drop that triggers an upgrade
  double beta = 2.0;           // tagging rate gain that justifies an upgrade
  int window_w = 50;           // uploads per monitoring window
  double coverage_p = 0.95;    // crop coverage for the deployed family
  double theta_rankdist = 0.5; // MaxCount rank-distance threshold, fraction of random

  void validate() const;
};

enum class QueryType { Retrieval, Tagging, MaxCount, AvgCount, MedianCount };

const char* query_name(QueryType type);
QueryType parse_query_type(const std::string& name);

struct QuerySpec {
  QueryType type = QueryType::Retrieval;
  int class_id = 0;
  Span span;
  ErrorTolerance tolerance;
  std::vector<int> levels{30, 10, 5, 1};

  void validate(const Trace& trace) const;
};

// The cloud's authoritative detector on a full-resolution frame.
const std::vector<Detection>& oracle_validate(const Trace& trace, std::int64_t frame_index);

struct Selection {
  std::optional<int> op_id;
  double f_value = 0.0;
  bool fallback = false;
  std::string reason;
};

// f = FPS_op / FPS_net; an operator helps retrieval only if f * R_pos > 1.
Selection retrieval_select_initial(std::span<const OperatorState> states, double r_pos, double fps_net);
Selection retrieval_select_next(std::span<const OperatorState> states, double f_current, double fps_net, double alpha);

bool quality_declined(double initial_ratio, double recent_ratio, double k_decline);

// Tracks the positive ratio of uploads since the current operator arrived.
class RetrievalMonitor {
 public:
  explicit RetrievalMonitor(int window_w = 50, double k_decline = 5.0) : w_(window_w), k_(k_decline) {}

  void reset();
  // Returns true the first time the recent window falls k-fold below the
  // first full window.
  bool observe(bool positive);
  std::optional<double> initial_ratio() const { return initial_; }
  double recent_ratio() const;

 private:
  int w_;
  double k_;
  std::deque<bool> recent_;
  int recent_pos_ = 0;
  std::optional<double> initial_;
  bool fired_ = false;
};

double tagging_rate(const OperatorState& state, double fps_net);
Selection tagging_select(std::span<const OperatorState> states, double fps_net, std::span<const int> exclude = {});
bool tagging_should_upgrade(double candidate_rate, double current_rate, double beta);

// Sum over items of |position in a - position in b|. Both rankings must hold
// the same items.
std::int64_t manhattan_distance(std::span<const std::int64_t> ranking_a, std::span<const std::int64_t> ranking_b);

// Expected distance between a fixed ranking of w items and a uniformly random
// one. Enumerated exactly for small w.
double expected_random_manhattan(int w);

struct RankSample {
  std::int64_t frame = 0;
  double camera_score = 0.0;
  int oracle_count = 0;
};

struct RankCheck {
  std::int64_t distance = 0;
  double threshold = 0.0;
  bool upgrade = false;
};

// Camera rank vs oracle rank over a window; ties in the oracle ranking keep
// the camera's order.
RankCheck rank_distance_check(std::span<const RankSample> window, double theta);

// Running mean and median of integer counts.
class CountingEstimator {
 public:
  void add(int count);
  std::int64_t size() const { return n_; }
  double mean() const;
  double median() const;
  int max() const { return max_; }

 private:
  std::map<int, std::int64_t> hist_;
  std::int64_t n_ = 0;
  double sum_ = 0.0;
  int max_ = 0;
};

// Query-shaped view of a finished run.
struct QueryProgress {
  std::vector<std::pair<double, double>> recall;          // Retrieval
  std::map<int, double> level_done_s;                     // Tagging, by group size
  std::vector<std::pair<double, double>> running_max;     // MaxCount
  std::vector<std::pair<double, double>> estimate;        // Avg/Median
  std::int64_t total_positives = 0;
  double truth = 0.0;
};

QueryProgress materialize(const QuerySpec& query, const SimResult& result, const Trace& trace);

// Time the recall curve first reaches the fraction; nullopt if never.
std::optional<double> time_to_recall(const QueryProgress& progress, double fraction);
// First time after which the estimate stays within rel_tol of the truth.
std::optional<double> convergence_time(const QueryProgress& progress, double rel_tol);

}  // namespace zc
