#include "zc/baselines.hpp"

#include <algorithm>
#include <deque>
#include <memory>
#include <numeric>

#include "zc/cloud_policies.hpp"
#include "zc/executor.hpp"
#include "zc/rng.hpp"

namespace zc {

std::vector<int> build_index(const Trace& trace, const Span& span, int class_id, const IndexModel& index,
                             std::uint64_t seed) {
  const FrameRange r = trace.frames_in(span);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(r.size()));
  for (std::int64_t f = r.first; f < r.last; ++f) {
    SplitMix64 rng(hash_keys(seed, 0x696478ULL, index.seed, static_cast<std::uint64_t>(f)));
    int n = 0;
    for (const auto& d : trace.frame(f).detections)
      if (d.class_id == class_id && !rng.bernoulli(index.drop_probability)) ++n;
    n += static_cast<int>(rng.poisson(index.spurious_rate));
    out.push_back(n);
  }
  return out;
}

namespace {

int oracle_count(const Trace& trace, std::int64_t f, int cls) {
  int n = 0;
  for (const auto& d : oracle_validate(trace, f)) n += d.class_id == cls;
  return n;
}

// Serial uploader shared by the camera-less baselines. Frames go out in a
// fixed order; tag messages and frames share the one uplink.
class StaticRun {
 public:
  StaticRun(const SimConfig& cfg, const Trace& trace, std::string system)
      : cfg_(cfg), trace_(trace), span_(trace.frames_in(cfg.query.span)), cls_(cfg.query.class_id) {
    res_.system = std::move(system);
    res_.span_first = span_.first;
    for (std::int64_t f = span_.first; f < span_.last; ++f) total_positives_ += trace.frame(f).contains(cls_);
    if (cfg.query.type == QueryType::Tagging) {
      tags_.assign(static_cast<std::size_t>(span_.size()), Tag::Untagged);
      level_groups_left_.assign(cfg.query.levels.size(), 0);
      group_hit_.resize(cfg.query.levels.size());
      for (std::size_t i = 0; i < cfg.query.levels.size(); ++i) {
        const std::int64_t k = cfg.query.levels[i];
        const std::int64_t groups = (span_.size() + k - 1) / k;
        level_groups_left_[i] = groups;
        group_hit_[i].assign(static_cast<std::size_t>(groups), false);
      }
    }
    up_ = std::make_unique<Channel>(
        engine_, cfg.network.uplink_bytes_per_s,
        [this]() -> std::optional<Transfer> {
          if (queue_.empty()) return std::nullopt;
          Transfer t = queue_.front();
          queue_.pop_front();
          return t;
        },
        [this](const Transfer& t) { on_done(t); });
  }

  std::deque<Transfer>& queue() { return queue_; }
  std::vector<int> index;  // PreIndexAll only

  SimResult execute() {
    engine_.at(0.0, 0, -1, [this] {
      if (cfg_.query.type == QueryType::Retrieval && cfg_.stop_at_full_recall && total_positives_ == 0) {
        engine_.stop();
        return;
      }
      up_->kick();
    });
    engine_.run(cfg_.abort_time_s);
    res_.end_time_s = engine_.now();
    res_.bytes_uplink = up_->bytes_sent();
    res_.answer.max_count = running_max_;
    res_.answer.avg_count = estimator_.mean();
    res_.answer.median_count = estimator_.median();
    if (!tags_.empty()) {
      res_.answer.tags = tags_;
      res_.answer.tag_from_camera.assign(tags_.size(), false);
    }
    finalize_log(res_.events);
    return std::move(res_);
  }

 private:
  void log(EventKind kind, std::int64_t frame, double value) {
    res_.events.push_back(Event{engine_.now(), kind, frame, -1, value});
  }

  void on_done(const Transfer& t) {
    if (t.kind == Transfer::Kind::Tag) {
      res_.traffic.tag_bytes += t.bytes;
      res_.traffic.tags += 1;
      log(EventKind::TagUploadDone, t.frame, 0.0);
      if (cfg_.query.type == QueryType::Tagging) {
        const Tag tag = index.at(static_cast<std::size_t>(t.frame - span_.first)) > 0 ? Tag::Positive : Tag::Negative;
        resolve(t.frame, tag);
      } else {
        // One message carrying the index's aggregate.
        for (int c : index) estimator_.add(c);
        const double v = cfg_.query.type == QueryType::AvgCount ? estimator_.mean() : estimator_.median();
        log(EventKind::ResultEmitted, -1, v);
        res_.progress.push_back({engine_.now(), cfg_.query.type == QueryType::AvgCount ? "avg" : "median", v});
      }
      return;
    }
    res_.traffic.frame_bytes += t.bytes;
    res_.traffic.frames += 1;
    log(EventKind::FrameUploadDone, t.frame, 0.0);
    const int truth = oracle_count(trace_, t.frame, cls_);
    switch (cfg_.query.type) {
      case QueryType::Retrieval:
        if (truth > 0) {
          res_.answer.positives.push_back(t.frame);
          const auto n = static_cast<double>(res_.answer.positives.size());
          log(EventKind::ResultEmitted, t.frame, n);
          res_.progress.push_back({engine_.now(), "recall", n / static_cast<double>(total_positives_)});
          if (cfg_.stop_at_full_recall && static_cast<std::int64_t>(res_.answer.positives.size()) == total_positives_)
            engine_.stop();
        }
        break;
      case QueryType::MaxCount:
        if (truth > running_max_ || res_.traffic.frames == 1) {
          running_max_ = std::max(running_max_, truth);
          res_.progress.push_back({engine_.now(), "max", static_cast<double>(running_max_)});
        }
        log(EventKind::ResultEmitted, t.frame, truth);
        break;
      case QueryType::AvgCount:
      case QueryType::MedianCount: {
        estimator_.add(truth);
        const double v = cfg_.query.type == QueryType::AvgCount ? estimator_.mean() : estimator_.median();
        log(EventKind::ResultEmitted, t.frame, v);
        res_.progress.push_back({engine_.now(), cfg_.query.type == QueryType::AvgCount ? "avg" : "median", v});
        break;
      }
      case QueryType::Tagging:
        resolve(t.frame, truth > 0 ? Tag::Positive : Tag::Negative);
        break;
    }
  }

  // Tags a frame and closes every level whose groups are now all covered.
  void resolve(std::int64_t f, Tag tag) {
    tags_[static_cast<std::size_t>(f - span_.first)] = tag;
    log(EventKind::ResultEmitted, f, tag == Tag::Positive ? 1.0 : 0.0);
    for (std::size_t i = 0; i < level_groups_left_.size(); ++i) {
      const auto g = static_cast<std::size_t>((f - span_.first) / cfg_.query.levels[i]);
      if (group_hit_[i][g]) continue;
      group_hit_[i][g] = true;
      if (--level_groups_left_[i] == 0) {
        log(EventKind::PassCompleted, -1, cfg_.query.levels[i]);
        res_.progress.push_back({engine_.now(), "level_done", static_cast<double>(cfg_.query.levels[i])});
      }
    }
  }

  const SimConfig& cfg_;
  const Trace& trace_;
  FrameRange span_;
  int cls_;
  Engine engine_;
  SimResult res_;
  std::unique_ptr<Channel> up_;
  std::deque<Transfer> queue_;
  std::int64_t total_positives_ = 0;
  int running_max_ = 0;
  CountingEstimator estimator_;
  std::vector<Tag> tags_;
  std::vector<std::int64_t> level_groups_left_;
  std::vector<std::vector<bool>> group_hit_;
};

Transfer frame_transfer(const Trace& trace, std::int64_t f) {
  Transfer t;
  t.kind = Transfer::Kind::Frame;
  t.frame = f;
  t.bytes = trace.frame(f).full_bytes;
  return t;
}

}  // namespace

SimResult run_cloudonly(const SimConfig& config, const Trace& trace) {
  config.query.validate(trace);
  StaticRun r(config, trace, "cloudonly");
  const FrameRange span = trace.frames_in(config.query.span);
  for (std::int64_t f = span.first; f < span.last; ++f) r.queue().push_back(frame_transfer(trace, f));
  return r.execute();
}

SimResult run_optop(const SimConfig& config, const Trace& trace) {
  RunnerOptions opt;
  opt.system = "optop";
  opt.use_knowledge = false;
  opt.upgrades = false;
  opt.continuous_training = false;
  opt.cost_model = true;
  return run_zc2(config, trace, opt);
}

SimResult run_preindexall(const SimConfig& config, const Trace& trace) {
  config.query.validate(trace);
  StaticRun r(config, trace, "preindexall");
  const FrameRange span = trace.frames_in(config.query.span);
  r.index = build_index(trace, config.query.span, config.query.class_id, config.index, config.seed);
  const auto& idx = r.index;
  std::vector<std::int64_t> order(static_cast<std::size_t>(span.size()));
  std::iota(order.begin(), order.end(), span.first);
  auto at = [&](std::int64_t f) { return idx[static_cast<std::size_t>(f - span.first)]; };

  switch (config.query.type) {
    case QueryType::Retrieval:
      std::stable_partition(order.begin(), order.end(), [&](std::int64_t f) { return at(f) > 0; });
      for (auto f : order) r.queue().push_back(frame_transfer(trace, f));
      break;
    case QueryType::MaxCount:
      std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) { return at(a) > at(b); });
      for (auto f : order) r.queue().push_back(frame_transfer(trace, f));
      break;
    case QueryType::Tagging:
      for (auto f : order) {
        Transfer t;
        t.kind = Transfer::Kind::Tag;
        t.frame = f;
        t.bytes = config.calibration.tag_message_bytes;
        r.queue().push_back(t);
      }
      break;
    case QueryType::AvgCount:
    case QueryType::MedianCount: {
      Transfer t;
      t.kind = Transfer::Kind::Tag;
      t.bytes = config.calibration.tag_message_bytes;
      r.queue().push_back(t);
      break;
    }
  }
  return r.execute();
}

}  // namespace zc
