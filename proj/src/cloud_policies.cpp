#include "zc/cloud_policies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace zc {

void PolicyConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PolicyError("policy.alpha: must lie in (0, 1)");
  if (!(k_decline > 1.0)) throw PolicyError("policy.k_decline: must exceed 1");
  if (!(beta > 1.0)) throw PolicyError("policy.beta: must exceed 1");
  if (window_w < 10) throw PolicyError("policy.window_w: must be at least 10");
  if (!(coverage_p > 0.0 && coverage_p <= 1.0)) throw PolicyError("policy.coverage_p: must lie in (0, 1]");
  if (!(theta_rankdist > 0.0)) throw PolicyError("policy.theta_rankdist: must be positive");
}

const char* query_name(QueryType type) {
  switch (type) {
    case QueryType::Retrieval: return "retrieval";
    case QueryType::Tagging: return "tagging";
    case QueryType::MaxCount: return "max_count";
    case QueryType::AvgCount: return "avg_count";
    case QueryType::MedianCount: return "median_count";
  }
  return "?";
}

QueryType parse_query_type(const std::string& name) {
  for (auto t : {QueryType::Retrieval, QueryType::Tagging, QueryType::MaxCount, QueryType::AvgCount,
                 QueryType::MedianCount})
    if (name == query_name(t)) return t;
  throw PolicyError("unknown query type '" + name + "'");
}

void QuerySpec::validate(const Trace& trace) const {
  if (!trace.has_class(class_id)) throw PolicyError("query.class: class " + std::to_string(class_id) + " not in trace");
  if (!(span.end_s > span.start_s)) throw PolicyError("query.span: end must follow start");
  if (span.start_s < 0.0 || span.end_s > trace.duration_s + 1e-9)
    throw PolicyError("query.span: outside the trace's time range");
  if (trace.frames_in(span).size() <= 0) throw PolicyError("query.span: holds no frames");
  if (!(tolerance.fp > 0.0 && tolerance.fp < 0.5) || !(tolerance.fn > 0.0 && tolerance.fn < 0.5))
    throw PolicyError("query.tolerance: rates must lie in (0, 0.5)");
  if (type == QueryType::Tagging) {
    if (levels.empty()) throw PolicyError("query.levels: must not be empty");
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i] < 1) throw PolicyError("query.levels: group sizes must be positive");
      if (i && levels[i] >= levels[i - 1]) throw PolicyError("query.levels: must be strictly decreasing");
    }
  }
}

const std::vector<Detection>& oracle_validate(const Trace& trace, std::int64_t frame_index) {
  return trace.frame(frame_index).detections;
}

namespace {

// Higher AUC wins, then higher fps, then lower id.
bool better_ranker(const OperatorState& a, const OperatorState& b) {
  if (a.measured_auc != b.measured_auc) return a.measured_auc > b.measured_auc;
  if (a.fps_cam != b.fps_cam) return a.fps_cam > b.fps_cam;
  return a.spec.id < b.spec.id;
}

}  // namespace

Selection retrieval_select_initial(std::span<const OperatorState> states, double r_pos, double fps_net) {
  if (states.empty()) throw PolicyError("no operators to select from");
  const OperatorState* best = nullptr;
  for (const auto& s : states) {
    const double f = s.fps_cam / fps_net;
    if (!(f * r_pos > 1.0) || s.fps_cam < fps_net) continue;
    if (!best || better_ranker(s, *best)) best = &s;
  }
  Selection sel;
  if (best) {
    sel.op_id = best->spec.id;
    sel.f_value = best->fps_cam / fps_net;
    sel.reason = "initial";
    return sel;
  }
  // Nothing clears f * R_pos > 1; run the fastest so ranking at least keeps up.
  const auto* fastest = &states[0];
  for (const auto& s : states)
    if (s.fps_cam > fastest->fps_cam || (s.fps_cam == fastest->fps_cam && s.spec.id < fastest->spec.id))
      fastest = &s;
  sel.op_id = fastest->spec.id;
  sel.f_value = fastest->fps_cam / fps_net;
  sel.fallback = true;
  sel.reason = "initial_fallback";
  return sel;
}

Selection retrieval_select_next(std::span<const OperatorState> states, double f_current, double fps_net,
                                double alpha) {
  const OperatorState* best = nullptr;
  for (const auto& s : states) {
    const double f = s.fps_cam / fps_net;
    if (!(f > alpha * f_current && f < f_current) || s.fps_cam < fps_net) continue;
    if (!best || better_ranker(s, *best)) best = &s;
  }
  Selection sel;
  if (!best) {
    sel.reason = "stall";
    return sel;
  }
  sel.op_id = best->spec.id;
  sel.f_value = best->fps_cam / fps_net;
  sel.reason = "upgrade";
  return sel;
}

bool quality_declined(double initial_ratio, double recent_ratio, double k_decline) {
  return recent_ratio < initial_ratio / k_decline;
}

void RetrievalMonitor::reset() {
  recent_.clear();
  recent_pos_ = 0;
  initial_.reset();
  fired_ = false;
}

double RetrievalMonitor::recent_ratio() const {
  return recent_.empty() ? 0.0 : static_cast<double>(recent_pos_) / static_cast<double>(recent_.size());
}

bool RetrievalMonitor::observe(bool positive) {
  recent_.push_back(positive);
  recent_pos_ += positive;
  if (static_cast<int>(recent_.size()) > w_) {
    recent_pos_ -= recent_.front();
    recent_.pop_front();
  }
  if (static_cast<int>(recent_.size()) < w_) return false;
  if (!initial_) {
    initial_ = recent_ratio();
    return false;
  }
  if (fired_ || !quality_declined(*initial_, recent_ratio(), k_)) return false;
  fired_ = true;
  return true;
}

double tagging_rate(const OperatorState& state, double fps_net) {
  return state.fps_cam * state.measured_gamma + fps_net;
}

Selection tagging_select(std::span<const OperatorState> states, double fps_net, std::span<const int> exclude) {
  const OperatorState* best = nullptr;
  double best_rate = 0.0;
  for (const auto& s : states) {
    if (!s.thresholds || std::find(exclude.begin(), exclude.end(), s.spec.id) != exclude.end()) continue;
    const double r = tagging_rate(s, fps_net);
    if (!best || r > best_rate || (r == best_rate && s.measured_gamma > best->measured_gamma)) {
      best = &s;
      best_rate = r;
    }
  }
  Selection sel;
  if (!best) {
    sel.reason = "no_candidate";
    return sel;
  }
  sel.op_id = best->spec.id;
  sel.f_value = best_rate;
  sel.reason = "max_rate";
  return sel;
}

bool tagging_should_upgrade(double candidate_rate, double current_rate, double beta) {
  return candidate_rate >= beta * current_rate;
}

std::int64_t manhattan_distance(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  if (a.size() != b.size()) throw PolicyError("rankings differ in length");
  std::unordered_map<std::int64_t, std::int64_t> pos;
  for (std::size_t i = 0; i < b.size(); ++i) pos[b[i]] = static_cast<std::int64_t>(i);
  if (pos.size() != b.size()) throw PolicyError("ranking holds duplicates");
  std::int64_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto it = pos.find(a[i]);
    if (it == pos.end()) throw PolicyError("rankings hold different items");
    d += std::llabs(static_cast<std::int64_t>(i) - it->second);
  }
  return d;
}

double expected_random_manhattan(int w) {
  if (w <= 1) return 0.0;
  if (w > 8) return (static_cast<double>(w) * w - 1.0) / 3.0;
  std::vector<int> p(static_cast<std::size_t>(w));
  std::iota(p.begin(), p.end(), 0);
  std::int64_t total = 0, perms = 0;
  do {
    for (int i = 0; i < w; ++i) total += std::abs(i - p[static_cast<std::size_t>(i)]);
    ++perms;
  } while (std::next_permutation(p.begin(), p.end()));
  return static_cast<double>(total) / static_cast<double>(perms);
}

RankCheck rank_distance_check(std::span<const RankSample> window, double theta) {
  std::vector<RankSample> cam(window.begin(), window.end());
  std::stable_sort(cam.begin(), cam.end(), [](const RankSample& a, const RankSample& b) {
    if (a.camera_score != b.camera_score) return a.camera_score > b.camera_score;
    return a.frame < b.frame;
  });
  std::vector<RankSample> oracle = cam;
  std::stable_sort(oracle.begin(), oracle.end(),
                   [](const RankSample& a, const RankSample& b) { return a.oracle_count > b.oracle_count; });
  std::vector<std::int64_t> ra, rb;
  for (const auto& s : cam) ra.push_back(s.frame);
  for (const auto& s : oracle) rb.push_back(s.frame);
  RankCheck out;
  out.distance = manhattan_distance(ra, rb);
  out.threshold = theta * expected_random_manhattan(static_cast<int>(window.size()));
  out.upgrade = static_cast<double>(out.distance) > out.threshold;
  return out;
}

void CountingEstimator::add(int count) {
  ++hist_[count];
  ++n_;
  sum_ += count;
  max_ = n_ == 1 ? count : std::max(max_, count);
}

double CountingEstimator::mean() const { return n_ ? sum_ / static_cast<double>(n_) : 0.0; }

double CountingEstimator::median() const {
  if (!n_) return 0.0;
  // 0-based ranks of the middle element(s).
  const std::int64_t lo_rank = (n_ - 1) / 2, hi_rank = n_ / 2;
  std::int64_t seen = 0;
  std::optional<int> lo;
  for (const auto& [value, c] : hist_) {
    if (!lo && seen + c > lo_rank) lo = value;
    if (seen + c > hi_rank) return (*lo + value) / 2.0;
    seen += c;
  }
  return 0.0;
}

QueryProgress materialize(const QuerySpec& query, const SimResult& result, const Trace& trace) {
  QueryProgress p;
  const auto gt = ground_truth_stats(trace, query.class_id, query.span);
  for (int c : gt.per_frame_counts) p.total_positives += c > 0;

  switch (query.type) {
    case QueryType::Retrieval: {
      p.truth = static_cast<double>(p.total_positives);
      std::int64_t found = 0;
      for (const auto& e : result.events)
        if (e.kind == EventKind::ResultEmitted && e.frame >= 0)
          p.recall.emplace_back(e.time_s, p.total_positives ? static_cast<double>(++found) / p.total_positives : 1.0);
      break;
    }
    case QueryType::Tagging:
      for (const auto& e : result.events)
        if (e.kind == EventKind::PassCompleted) p.level_done_s.emplace(static_cast<int>(e.value), e.time_s);
      break;
    case QueryType::MaxCount: {
      p.truth = gt.max_count;
      double best = -1.0;
      for (const auto& e : result.events)
        if (e.kind == EventKind::ResultEmitted && e.value > best) {
          best = e.value;
          p.running_max.emplace_back(e.time_s, best);
        }
      break;
    }
    case QueryType::AvgCount:
    case QueryType::MedianCount:
      p.truth = query.type == QueryType::AvgCount ? gt.avg_count : gt.median_count;
      for (const auto& e : result.events)
        if (e.kind == EventKind::ResultEmitted) p.estimate.emplace_back(e.time_s, e.value);
      break;
  }
  return p;
}

std::optional<double> time_to_recall(const QueryProgress& progress, double fraction) {
  if (progress.total_positives == 0) return 0.0;
  for (const auto& [t, r] : progress.recall)
    if (r >= fraction - 1e-12) return t;
  return std::nullopt;
}

std::optional<double> convergence_time(const QueryProgress& progress, double rel_tol) {
  if (progress.estimate.empty()) return std::nullopt;
  const double tol = rel_tol * std::max(std::abs(progress.truth), 1e-12);
  auto within = [&](double v) { return std::abs(v - progress.truth) <= tol; };
  if (!within(progress.estimate.back().second)) return std::nullopt;
  std::size_t i = progress.estimate.size();
  while (i > 0 && within(progress.estimate[i - 1].second)) --i;
  return progress.estimate[i].first;
}

}  // namespace zc
