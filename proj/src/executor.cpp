#include "zc/executor.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <numeric>
#include <set>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "zc/baselines.hpp"
#include "zc/camera_runtime.hpp"
#include "zc/cloud_policies.hpp"
#include "zc/knowledge.hpp"
#include "zc/operators.hpp"

namespace zc {

std::vector<std::int64_t> span_priority_order(const Trace& trace, const Span& span, const TemporalDensity& density,
                                              int stride) {
  const std::size_t nbins = density.bins.size();
  std::vector<std::size_t> bins(nbins);
  std::iota(bins.begin(), bins.end(), 0);
  auto dens = [&](std::size_t b) {
    return density.landmarks[b] ? static_cast<double>(density.bins[b]) / static_cast<double>(density.landmarks[b])
                                : 0.0;
  };
  std::stable_sort(bins.begin(), bins.end(), [&](std::size_t a, std::size_t b) { return dens(a) > dens(b); });

  std::vector<std::int64_t> out;
  for (std::size_t b : bins) {
    const double t0 = span.start_s + static_cast<double>(b) * density.bin_s;
    const double t1 = b + 1 == nbins ? span.end_s : std::min(span.end_s, t0 + density.bin_s);
    const FrameRange r = trace.frames_in({t0, t1});
    for (std::int64_t off = 0; off < stride; ++off)
      for (std::int64_t f = r.first + off; f < r.last; f += stride) out.push_back(f);
  }
  return out;
}

namespace {

constexpr std::uint64_t kNoiseSalt = 0x6e6f697365ULL;
constexpr std::uint64_t kTagSalt = 0x746167ULL;
constexpr std::uint64_t kOrderSalt = 0x6d6178ULL;
constexpr std::uint64_t kStreamSalt = 0x617667ULL;
constexpr std::uint64_t kLandmarkSalt = 0x4c4d4bULL;

// Count threshold for the "high count" class of MaxCount rankers: the 0.9
// quantile of landmark counts, at least 1.
int high_count_threshold(std::span<const Landmark> lms, int cls) {
  std::vector<int> counts;
  for (const auto& lm : lms) counts.push_back(lm.count(cls));
  if (counts.empty()) return 1;
  std::sort(counts.begin(), counts.end());
  const auto i = static_cast<std::size_t>(std::floor(0.9 * static_cast<double>(counts.size() - 1)));
  return std::max(1, counts[i]);
}

class Zc2Run {
 public:
  Zc2Run(const SimConfig& cfg, const Trace& trace, const RunnerOptions& opt)
      : cfg_(cfg),
        trace_(trace),
        opt_(opt),
        span_(trace.frames_in(cfg.query.span)),
        cls_(cfg.query.class_id),
        type_(cfg.query.type),
        model_(cfg.grid, cfg.calibration, trace.resolution),
        noise_seed_(hash_keys(cfg.seed, kNoiseSalt)),
        rqueue_(UploadQueue::Mode::Priority),
        monitor_(cfg.policy.window_w, cfg.policy.k_decline),
        runtime_(span_, hash_keys(cfg.seed, kTagSalt)) {
    res_.system = opt.system;
    res_.span_first = span_.first;
    full_bytes_ = trace.frames.empty() ? 60000 : trace.frames.front().full_bytes;
    thumb_bytes_ = trace.frames.empty() ? 6000 : trace.frames.front().thumb_bytes;
    fps_net_plan_ = cfg.planning_uplink_bytes_per_s.value_or(cfg.network.uplink_bytes_per_s) /
                    static_cast<double>(full_bytes_);

    up_ = std::make_unique<Channel>(
        engine_, cfg.network.uplink_bytes_per_s, [this] { return pull_uplink(); },
        [this](const Transfer& t) { on_uplink_done(t); });
    down_ = std::make_unique<Channel>(
        engine_, cfg.network.downlink_bytes_per_s,
        [this]() -> std::optional<Transfer> {
          if (ship_queue_.empty()) return std::nullopt;
          Transfer t = ship_queue_.front();
          ship_queue_.pop_front();
          return t;
        },
        [this](const Transfer& t) { on_model_arrived(t); });
    cam_ = std::make_unique<Processor>(
        engine_, [this] { return pull_camera(); }, [this](const ComputeJob& j) { on_scored(j); });
  }

  SimResult execute() {
    setup();
    engine_.at(0.0, 0, -1, [this] { start(); });
    engine_.run(cfg_.abort_time_s);
    return finish();
  }

 private:
  // --- setup ------------------------------------------------------------------

  void setup() {
    auto lms = sample_landmarks(trace_, cfg_.query.span, cfg_.camera.landmark_interval_frames);
    truth_landmarks_ = lms.size();
    if (cfg_.corruption.active()) {
      LandmarkCorruption c = cfg_.corruption;
      c.seed = hash_keys(cfg_.seed, kLandmarkSalt, cfg_.corruption.seed);
      const ClassParams* cp = nullptr;
      for (const auto& k : cfg_.trace.synth.classes)
        if (k.class_id == cls_) cp = &k;
      lms = corrupt_landmarks(lms, c, trace_, cp ? cp->object_w : 64, cp ? cp->object_h : 48);
    }
    KnowledgeOptions ko = cfg_.knowledge;
    if (std::find(ko.coverage_levels.begin(), ko.coverage_levels.end(), cfg_.policy.coverage_p) ==
        ko.coverage_levels.end())
      ko.coverage_levels.push_back(cfg_.policy.coverage_p);
    knowledge_ = build_knowledge(std::move(lms), cls_, trace_, cfg_.query.span, ko);
    res_.n_landmarks = static_cast<std::int64_t>(knowledge_.landmarks.size());

    for (const auto& lm : knowledge_.landmarks) {
      landmark_frames_.insert(lm.frame_index);
      max_landmark_count_ = std::max(max_landmark_count_, lm.count(cls_));
    }
    count_threshold_ = high_count_threshold(knowledge_.landmarks, cls_);

    // Short spans may hold fewer landmarks than a normal bootstrap needs; the
    // first round then trains on all of them.
    bootstrap_ = std::min<std::size_t>(static_cast<std::size_t>(cfg_.calibration.bootstrap_min),
                                       std::max<std::size_t>(1, knowledge_.landmarks.size()));
    if (bootstrap_ < static_cast<std::size_t>(cfg_.calibration.bootstrap_min)) {
      OperatorCalibration cal = cfg_.calibration;
      cal.bootstrap_min = static_cast<int>(bootstrap_);
      model_ = FamilyModel(cfg_.grid, cal, trace_.resolution);
    }

    if (type_ == QueryType::Retrieval || type_ == QueryType::MaxCount || type_ == QueryType::Tagging) build_family();

    for (std::int64_t f = span_.first; f < span_.last; ++f) total_positives_ += trace_.frame(f).contains(cls_);

    if (type_ == QueryType::Retrieval || type_ == QueryType::MaxCount) {
      std::vector<std::int64_t> order;
      if (type_ == QueryType::MaxCount && opt_.use_knowledge) {
        order = random_sample_stream(span_, hash_keys(cfg_.seed, kOrderSalt));
      } else if (opt_.use_knowledge) {
        order = span_priority_order(trace_, cfg_.query.span, knowledge_.density, cfg_.first_pass_stride);
      } else {
        for (std::int64_t f = span_.first; f < span_.last; ++f) order.push_back(f);
      }
      first_pass_ = order;
      for (std::size_t i = 0; i < order.size(); ++i)
        rqueue_.push(order[i], 0.5, false, static_cast<std::int64_t>(i));
    }
    if (type_ == QueryType::AvgCount || type_ == QueryType::MedianCount)
      stream_ = random_sample_stream(span_, hash_keys(cfg_.seed, kStreamSalt), landmark_frames_);
  }

  void build_family() {
    const Signal signal = type_ == QueryType::MaxCount ? Signal::Count : Signal::Presence;
    CameraModel plan = cfg_.camera;
    plan.compute_rate = cfg_.planning_compute_rate.value_or(cfg_.camera.compute_rate);
    const Rect full{0, 0, trace_.resolution.width, trace_.resolution.height};

    if (!cfg_.operators.empty()) {
      for (std::size_t i = 0; i < cfg_.operators.size(); ++i) {
        const auto& e = cfg_.operators[i];
        OperatorSpec s;
        s.id = static_cast<int>(i);
        s.region = e.region.value_or(full);
        s.flops = cfg_.camera.compute_rate / e.fps;
        s.capacity = s.flops;
        s.model_bytes = e.model_bytes;
        OperatorState st;
        st.spec = s;
        st.signal = signal;
        st.sigma = e.sigma;
        st.fixed_sigma = true;
        st.fps_cam = operator_fps(s, plan);
        states_.push_back(st);
      }
    } else {
      std::vector<CropRegion> regions;
      if (opt_.use_knowledge)
        for (const auto& [p, r] : knowledge_.crop_regions)
          if (!(r == full)) regions.push_back({p, r});
      // Uncropped operators stay available for objects the landmarks missed.
      regions.push_back({1.0, full});
      for (const auto& spec : enumerate_family(model_, regions, cfg_.family_limit))
        states_.push_back(initial_state(spec, model_, plan, signal));
    }
    for (auto& st : states_) st.count_scale = std::max(1, max_landmark_count_);
  }

  double actual_duration(const OperatorState& st) const { return st.spec.flops / cfg_.camera.compute_rate; }

  double train_latency() const {
    if (cfg_.training.latency_s) return *cfg_.training.latency_s;
    if (!cfg_.operators.empty()) return cfg_.calibration.train_latency_min_s;
    double l = 0.0;
    for (const auto& st : states_) l = std::max(l, model_.train_latency_s(st.spec));
    return l;
  }

  // --- event helpers ------------------------------------------------------------

  void log(EventKind kind, std::int64_t frame = -1, int op = -1, double value = 0.0) {
    res_.events.push_back(Event{engine_.now(), kind, frame, op, value});
  }
  void progress(const std::string& metric, double value) {
    res_.progress.push_back(ProgressPoint{engine_.now(), metric, value});
  }
  void decide(const std::string& what, int op, double f, const std::string& reason) {
    res_.decisions.push_back(PolicyDecision{engine_.now(), what, op, f, reason});
  }

  void start() {
    if (type_ == QueryType::Retrieval && cfg_.stop_at_full_recall && total_positives_ == 0) {
      engine_.stop();
      return;
    }
    if (!knowledge_.landmarks.empty()) {
      Transfer t;
      t.kind = Transfer::Kind::Landmarks;
      t.count = static_cast<std::int64_t>(knowledge_.landmarks.size());
      t.bytes = t.count * thumb_bytes_;
      control_.push_back(t);
    }
    up_->kick();
  }

  // --- uplink -----------------------------------------------------------------

  std::optional<Transfer> pull_uplink() {
    if (!control_.empty()) {
      Transfer t = control_.front();
      control_.pop_front();
      return t;
    }
    Transfer t;
    t.kind = Transfer::Kind::Frame;
    t.bytes = full_bytes_;
    switch (type_) {
      case QueryType::Retrieval:
      case QueryType::MaxCount: {
        auto e = rqueue_.pop_front();
        if (!e) return std::nullopt;
        t.frame = e->frame;
        upload_score_[e->frame] = e->score;
        return t;
      }
      case QueryType::Tagging: {
        auto f = runtime_.pop_upload();
        if (!f) return std::nullopt;
        t.frame = *f;
        return t;
      }
      case QueryType::AvgCount:
      case QueryType::MedianCount:
        if (stream_pos_ >= stream_.size()) return std::nullopt;
        t.frame = stream_[stream_pos_++];
        return t;
    }
    return std::nullopt;
  }

  void on_uplink_done(const Transfer& t) {
    switch (t.kind) {
      case Transfer::Kind::Landmarks:
        res_.traffic.landmark_bytes += t.bytes;
        res_.traffic.landmarks += t.count;
        log(EventKind::LandmarksUploaded, -1, -1, static_cast<double>(t.count));
        on_landmarks_arrived();
        break;
      case Transfer::Kind::Tag:
        res_.traffic.tag_bytes += t.bytes;
        res_.traffic.tags += 1;
        log(EventKind::TagUploadDone, t.frame);
        --tags_pending_;
        check_pass_complete();
        break;
      case Transfer::Kind::Frame:
        res_.traffic.frame_bytes += t.bytes;
        res_.traffic.frames += 1;
        log(EventKind::FrameUploadDone, t.frame);
        on_frame_arrived(t.frame);
        break;
      case Transfer::Kind::Model:
        break;
    }
  }

  void on_landmarks_arrived() {
    for (const auto& lm : knowledge_.landmarks) pool_.push_back({lm.frame_index, lm.count(cls_)});
    if (type_ == QueryType::AvgCount || type_ == QueryType::MedianCount) {
      for (const auto& lm : knowledge_.landmarks) estimator_.add(lm.count(cls_));
      emit_estimate(-1);
      return;
    }
    maybe_train();
  }

  void emit_estimate(std::int64_t frame) {
    const double v = type_ == QueryType::AvgCount ? estimator_.mean() : estimator_.median();
    log(EventKind::ResultEmitted, frame, -1, v);
    progress(type_ == QueryType::AvgCount ? "avg" : "median", v);
  }

  void on_frame_arrived(std::int64_t f) {
    int truth = 0;
    for (const auto& d : oracle_validate(trace_, f)) truth += d.class_id == cls_;
    switch (type_) {
      case QueryType::Retrieval: {
        pool_.push_back({f, truth});
        uploads_.push_back({f, truth});
        if (truth > 0) {
          res_.answer.positives.push_back(f);
          const auto n = static_cast<double>(res_.answer.positives.size());
          log(EventKind::ResultEmitted, f, -1, n);
          progress("recall", total_positives_ ? n / static_cast<double>(total_positives_) : 1.0);
        }
        if (current_ && opt_.upgrades && monitor_.observe(truth > 0)) request_upgrade("quality_decline");
        if (cfg_.stop_at_full_recall && static_cast<std::int64_t>(res_.answer.positives.size()) == total_positives_) {
          engine_.stop();
          return;
        }
        maybe_train();
        break;
      }
      case QueryType::MaxCount: {
        pool_.push_back({f, truth});
        uploads_.push_back({f, truth});
        if (truth > running_max_ || res_.traffic.frames == 1) {
          running_max_ = std::max(running_max_, truth);
          progress("max", running_max_);
        }
        log(EventKind::ResultEmitted, f, -1, truth);
        if (current_ && opt_.upgrades) {
          auto it = ranked_by_.find(f);
          if (it != ranked_by_.end() && it->second == current_->spec.id) {
            rank_window_.push_back({f, upload_score_[f], truth});
            if (static_cast<int>(rank_window_.size()) > cfg_.policy.window_w) rank_window_.pop_front();
            if (!rank_fired_ && static_cast<int>(rank_window_.size()) == cfg_.policy.window_w) {
              std::vector<RankSample> w(rank_window_.begin(), rank_window_.end());
              const auto check = rank_distance_check(w, cfg_.policy.theta_rankdist);
              if (check.upgrade) {
                rank_fired_ = true;
                request_upgrade("rank_distance");
              }
            }
          }
        }
        maybe_train();
        break;
      }
      case QueryType::Tagging: {
        const Tag tag = truth > 0 ? Tag::Positive : Tag::Negative;
        runtime_.on_cloud_tag(f, tag);
        pool_.push_back({f, truth});
        uploads_.push_back({f, truth});
        log(EventKind::ResultEmitted, f, -1, tag == Tag::Positive ? 1.0 : 0.0);
        maybe_train();
        check_pass_complete();
        cam_->kick();
        break;
      }
      case QueryType::AvgCount:
      case QueryType::MedianCount:
        estimator_.add(truth);
        emit_estimate(f);
        break;
    }
  }

  // --- training ---------------------------------------------------------------

  void maybe_train() {
    if (trainer_busy_ || states_.empty()) return;
    if (pool_.size() < bootstrap_) return;
    if (rounds_ > 0) {
      if (!opt_.continuous_training) return;
      if (pool_.size() - pool_at_last_round_ < static_cast<std::size_t>(cfg_.training.retrain_every)) return;
    }
    // Every training sample counts toward n_train. Validation uses landmark
    // frames only: uploaded frames were picked by the deployed operator's own
    // scores and would flatter or punish it.
    std::vector<LabeledSample> set;
    std::size_t val = 0;
    for (auto it = pool_.rbegin(); it != pool_.rend(); ++it) {
      if (is_validation_frame(it->frame_index)) {
        if (val >= cfg_.training.max_validation || !landmark_frames_.count(it->frame_index)) continue;
        ++val;
      }
      set.push_back(*it);
    }
    if (set.size() < bootstrap_) return;
    std::reverse(set.begin(), set.end());
    std::vector<LabeledSample> gamma;
    if (uploads_.size() >= cfg_.training.gamma_window)
      gamma.assign(uploads_.end() - static_cast<std::ptrdiff_t>(cfg_.training.gamma_window), uploads_.end());

    trainer_busy_ = true;
    pool_at_last_round_ = pool_.size();
    engine_.at(engine_.now() + train_latency(), 1, -1,
               [this, set = std::move(set), gamma = std::move(gamma)] { on_trained(set, gamma); });
  }

  void on_trained(const std::vector<LabeledSample>& set, const std::vector<LabeledSample>& gamma) {
    TrainOptions to;
    to.class_id = cls_;
    to.noise_seed = noise_seed_;
    if (type_ == QueryType::Tagging) to.tolerance = cfg_.query.tolerance;
    to.gamma_set = gamma;
    to.count_label_threshold = count_threshold_;
    if (!states_.empty()) to.effective_samples = effective_training_samples(set, trace_, cls_, states_.front().signal);
    for (auto& st : states_) st = train(st, set, trace_, model_, to);
    ++rounds_;
    trainer_busy_ = false;
    log(EventKind::OperatorTrained, -1, -1, static_cast<double>(set.size()));
    last_train_set_ = set;
    after_training();
    maybe_train();
  }

  // --- selection and shipping ---------------------------------------------------

  const OperatorState& state(int id) const { return states_.at(static_cast<std::size_t>(id)); }

  double fps_net_now() const { return up_->bandwidth() / static_cast<double>(full_bytes_); }

  void after_training() {
    if (type_ == QueryType::Tagging) {
      if (!deployed_any_ && !shipping_) {
        Selection sel = opt_.cost_model ? cost_model_select() : tagging_select(states_, fps_net_plan_);
        if (sel.op_id) {
          decide("select", *sel.op_id, sel.f_value, sel.reason);
          ship(*sel.op_id);
        }
        return;
      }
      if (!opt_.upgrades || shipping_ || !current_) return;
      const OperatorState& cur = state(current_->spec.id);
      const std::vector<int> exclude{cur.spec.id};
      Selection best = tagging_select(states_, fps_net_plan_, exclude);
      if (best.op_id && tagging_should_upgrade(best.f_value, tagging_rate(cur, fps_net_plan_), cfg_.policy.beta)) {
        log(EventKind::UpgradeTriggered, -1, *best.op_id, best.f_value);
        decide("upgrade", *best.op_id, best.f_value, "rate_gain");
        ship(*best.op_id);
      }
      return;
    }
    if (type_ == QueryType::Retrieval || type_ == QueryType::MaxCount) {
      if (deployed_any_ || shipping_) return;
      const double r_pos = type_ == QueryType::MaxCount ? high_count_ratio() : knowledge_.r_pos;
      Selection sel = opt_.cost_model ? cost_model_select() : retrieval_select_initial(states_, r_pos, fps_net_plan_);
      decide("select", *sel.op_id, sel.f_value, sel.reason);
      ship(*sel.op_id);
    }
  }

  double high_count_ratio() const {
    if (knowledge_.landmarks.empty()) return 0.0;
    std::int64_t n = 0;
    for (const auto& lm : knowledge_.landmarks) n += lm.count(cls_) >= count_threshold_;
    return static_cast<double>(n) / static_cast<double>(knowledge_.landmarks.size());
  }

  // Single-operator choice by estimated full-query delay.
  Selection cost_model_select() const {
    const double n = static_cast<double>(span_.size());
    const double fps_net = fps_net_plan_;
    std::vector<const LabeledSample*> val;
    for (const auto& s : last_train_set_)
      if (is_validation_frame(s.frame_index)) val.push_back(&s);

    Selection sel;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& st : states_) {
      double delay = 0.0;
      if (type_ == QueryType::Tagging) {
        delay = std::max(n / st.fps_cam, (1.0 - st.measured_gamma) * n / fps_net);
      } else {
        std::vector<std::pair<double, int>> scored;
        int npos = 0;
        for (const auto* s : val) {
          SplitMix64 rng(noise_stream(noise_seed_, st.spec.id, s->frame_index));
          const double sc = score_frame(st, trace_.frame(s->frame_index), cls_, trace_.hardness(s->frame_index), rng);
          const int lab = type_ == QueryType::MaxCount ? s->label_count >= count_threshold_ : s->label_count > 0;
          scored.emplace_back(sc, lab);
          npos += lab;
        }
        std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        double frac = 1.0;
        if (npos > 0 && !scored.empty()) {
          const int need = static_cast<int>(std::ceil(0.99 * npos - 1e-9));
          int got = 0;
          for (std::size_t i = 0; i < scored.size(); ++i) {
            got += scored[i].second;
            if (got >= need) {
              frac = static_cast<double>(i + 1) / static_cast<double>(scored.size());
              break;
            }
          }
        }
        delay = std::max(n / st.fps_cam, frac * n / fps_net);
      }
      if (delay < best) {
        best = delay;
        sel.op_id = st.spec.id;
        sel.f_value = delay;
      }
    }
    sel.reason = "cost_model";
    return sel;
  }

  void request_upgrade(const std::string& reason) {
    if (!opt_.upgrades || shipping_ || stalled_ || !current_) return;
    const double fps_net = cfg_.planning_uplink_bytes_per_s ? fps_net_plan_ : fps_net_now();
    const OperatorState& cur = state(current_->spec.id);
    const double f_cur = cur.fps_cam / fps_net;
    Selection sel = retrieval_select_next(states_, f_cur, fps_net, cfg_.policy.alpha);
    if (!sel.op_id) {
      stalled_ = true;
      decide("stall", current_->spec.id, f_cur, reason);
      return;
    }
    log(EventKind::UpgradeTriggered, -1, *sel.op_id, sel.f_value);
    decide("upgrade", *sel.op_id, sel.f_value, reason);
    ship(*sel.op_id);
  }

  void ship(int id) {
    shipping_ = true;
    deployed_any_ = true;
    shipped_.push_back(state(id));
    Transfer t;
    t.kind = Transfer::Kind::Model;
    t.op = id;
    t.bytes = state(id).spec.model_bytes;
    t.count = static_cast<std::int64_t>(shipped_.size() - 1);
    ship_queue_.push_back(t);
    down_->kick();
  }

  void on_model_arrived(const Transfer& t) {
    res_.traffic.model_bytes += t.bytes;
    res_.traffic.models += 1;
    log(EventKind::OperatorShipped, -1, t.op, static_cast<double>(t.bytes));
    pending_ = shipped_.at(static_cast<std::size_t>(t.count));
    shipping_ = false;
    cam_->kick();
  }

  // --- camera -----------------------------------------------------------------

  void switch_operator() {
    current_ = *pending_;
    pending_.reset();
    res_.operator_switches.push_back(current_->spec.id);
    stalled_ = false;
    if (type_ == QueryType::Tagging) {
      tried_.insert(current_->spec.id);
      if (levels_done_) return;
      if (!tagging_started_) {
        tagging_started_ = true;
        runtime_.start_pass(cfg_.query.levels.at(level_idx_));
      } else {
        runtime_.clear_undecidable();
        runtime_.start_pass(cfg_.query.levels.at(level_idx_));
      }
      up_->kick();
      return;
    }
    ++passes_;
    pass_order_ = passes_ == 1 ? first_pass_ : rqueue_.order();
    pass_pos_ = 0;
    pass_end_logged_ = false;
    monitor_.reset();
    rank_window_.clear();
    rank_fired_ = false;
  }

  std::optional<ComputeJob> pull_camera() {
    if (pending_) switch_operator();
    if (!current_) return std::nullopt;
    std::optional<std::int64_t> next;
    if (type_ == QueryType::Tagging) {
      if (levels_done_) return std::nullopt;
      next = runtime_.next_frame();
      if (!next) {
        check_pass_complete();
        return std::nullopt;
      }
    } else if (type_ == QueryType::Retrieval || type_ == QueryType::MaxCount) {
      while (pass_pos_ < pass_order_.size()) {
        const std::int64_t f = pass_order_[pass_pos_++];
        if (!rqueue_.sent(f)) {
          next = f;
          break;
        }
      }
      if (!next) {
        if (!pass_end_logged_) {
          pass_end_logged_ = true;
          log(EventKind::PassCompleted, -1, current_->spec.id, passes_);
          request_upgrade("pass_exhausted");
        }
        return std::nullopt;
      }
    } else {
      return std::nullopt;
    }
    return ComputeJob{*next, current_->spec.id, actual_duration(*current_)};
  }

  void on_scored(const ComputeJob& job) {
    SplitMix64 rng(noise_stream(noise_seed_, job.op, job.frame));
    const double s = score_frame(*current_, trace_.frame(job.frame), cls_, trace_.hardness(job.frame), rng);
    ++res_.frames_scored;
    log(EventKind::FrameScored, job.frame, job.op, s);

    if (type_ == QueryType::Tagging) {
      const Tag tag = classify(s, *current_->thresholds);
      auto steal = runtime_.on_camera_tag(job.frame, tag);
      if (tag == Tag::Positive || tag == Tag::Negative) {
        Transfer t;
        t.kind = Transfer::Kind::Tag;
        t.frame = job.frame;
        t.bytes = cfg_.calibration.tag_message_bytes;
        control_.push_back(t);
        ++tags_pending_;
      }
      if (steal) log(EventKind::UploadStolen, steal->cancelled, job.op, static_cast<double>(steal->resolved_by));
      up_->kick();
      check_pass_complete();
      return;
    }
    if (auto e = rqueue_.find(job.frame)) {
      rqueue_.push(job.frame, s, true, e->order);
      ranked_by_[job.frame] = job.op;
    }
    up_->kick();
  }

  // --- tagging levels -------------------------------------------------------------

  void check_pass_complete() {
    // A level counts as done once the cloud holds every tag of it.
    if (!tagging_started_ || levels_done_ || cam_->busy() || pending_ || tags_pending_ > 0) return;
    if (!runtime_.pass_complete()) return;
    const int k = cfg_.query.levels.at(level_idx_);
    if (cfg_.verify) assert_coverage(k);
    log(EventKind::PassCompleted, -1, current_ ? current_->spec.id : -1, k);
    progress("level_done", k);
    ++level_idx_;
    if (level_idx_ >= cfg_.query.levels.size()) {
      levels_done_ = true;
      return;
    }
    runtime_.start_pass(cfg_.query.levels[level_idx_]);
    // The deployed filter has attempted every frame it can; try another one.
    if (opt_.upgrades && runtime_.untagged_count() == 0 && runtime_.tags().count(Tag::Undecidable) > 0 && !shipping_) {
      std::vector<int> exclude(tried_.begin(), tried_.end());
      Selection sel = tagging_select(states_, fps_net_plan_, exclude);
      if (sel.op_id) {
        log(EventKind::UpgradeTriggered, -1, *sel.op_id, sel.f_value);
        decide("upgrade", *sel.op_id, sel.f_value, "frames_exhausted");
        ship(*sel.op_id);
      }
    }
    cam_->kick();
  }

  void assert_coverage(int k) const {
    const auto& tags = runtime_.tags();
    for (std::int64_t g0 = span_.first; g0 < span_.last; g0 += k) {
      bool ok = false;
      for (std::int64_t f = g0; f < std::min(span_.last, g0 + k) && !ok; ++f) {
        const Tag t = tags.get(f);
        ok = t == Tag::Positive || t == Tag::Negative;
      }
      if (!ok) throw InvariantViolation("group at frame " + std::to_string(g0) + " uncovered after level " + std::to_string(k));
    }
  }

  // --- wrap-up --------------------------------------------------------------------

  SimResult finish() {
    res_.end_time_s = engine_.now();
    res_.bytes_uplink = up_->bytes_sent();
    res_.bytes_downlink = down_->bytes_sent();
    if (type_ == QueryType::Tagging) {
      res_.answer.tags = runtime_.tags().tags();
      for (auto s : runtime_.tags().sources()) res_.answer.tag_from_camera.push_back(s == TagState::Source::Camera);
    }
    res_.answer.max_count = running_max_;
    res_.answer.avg_count = estimator_.mean();
    res_.answer.median_count = estimator_.median();
    finalize_log(res_.events);
    return std::move(res_);
  }

  const SimConfig& cfg_;
  const Trace& trace_;
  RunnerOptions opt_;
  FrameRange span_;
  int cls_;
  QueryType type_;
  FamilyModel model_;
  std::uint64_t noise_seed_;

  Engine engine_;
  SimResult res_;
  std::unique_ptr<Channel> up_, down_;
  std::unique_ptr<Processor> cam_;
  std::deque<Transfer> control_;
  std::deque<Transfer> ship_queue_;
  std::int64_t full_bytes_ = 60000;
  std::int64_t thumb_bytes_ = 6000;
  double fps_net_plan_ = 1.0;

  KnowledgeSummary knowledge_;
  std::size_t truth_landmarks_ = 0;
  std::unordered_set<std::int64_t> landmark_frames_;
  int max_landmark_count_ = 0;
  int count_threshold_ = 1;
  std::int64_t total_positives_ = 0;

  std::vector<OperatorState> states_;
  std::vector<LabeledSample> pool_;
  std::vector<LabeledSample> uploads_;
  std::vector<LabeledSample> last_train_set_;
  std::size_t bootstrap_ = 1;
  bool trainer_busy_ = false;
  int rounds_ = 0;
  std::size_t pool_at_last_round_ = 0;

  std::vector<OperatorState> shipped_;
  std::optional<OperatorState> pending_;
  std::optional<OperatorState> current_;
  bool shipping_ = false;
  bool deployed_any_ = false;
  bool stalled_ = false;

  // ranking
  std::vector<std::int64_t> first_pass_;
  std::vector<std::int64_t> pass_order_;
  std::size_t pass_pos_ = 0;
  int passes_ = 0;
  bool pass_end_logged_ = false;
  UploadQueue rqueue_;
  RetrievalMonitor monitor_;
  std::unordered_map<std::int64_t, int> ranked_by_;
  std::unordered_map<std::int64_t, double> upload_score_;
  std::deque<RankSample> rank_window_;
  bool rank_fired_ = false;
  int running_max_ = 0;

  // tagging
  TaggingRuntime runtime_;
  bool tagging_started_ = false;
  std::int64_t tags_pending_ = 0;
  bool levels_done_ = false;
  std::size_t level_idx_ = 0;
  std::set<int> tried_;

  // counting
  std::vector<std::int64_t> stream_;
  std::size_t stream_pos_ = 0;
  CountingEstimator estimator_;
};

}  // namespace

SimResult run_zc2(const SimConfig& config, const Trace& trace, const RunnerOptions& options) {
  config.query.validate(trace);
  Zc2Run r(config, trace, options);
  return r.execute();
}

SimResult run(const SimConfig& config, const Trace& trace) {
  validate(config);
  SimResult r;
  if (config.system == "zc2")
    r = run_zc2(config, trace);
  else if (config.system == "cloudonly")
    r = run_cloudonly(config, trace);
  else if (config.system == "optop")
    r = run_optop(config, trace);
  else if (config.system == "preindexall")
    r = run_preindexall(config, trace);
  else
    throw ConfigError("system: unknown system '" + config.system + "'");
  if (config.verify) {
    const auto problems = verify_result(config, trace, r);
    if (!problems.empty()) {
      std::string msg = "invariant violations:";
      for (const auto& p : problems) msg += "\n  " + p;
      throw InvariantViolation(msg);
    }
  }
  return r;
}

SimResult run(const SimConfig& config) {
  validate(config);
  const Trace trace = materialize_trace(config);
  return run(config, trace);
}

bool replay_check(const SimConfig& config, const Trace& trace) {
  const SimResult a = run(config, trace);
  const SimResult b = run(config, trace);
  return a.events == b.events;
}

bool replay_check(const SimConfig& config) {
  const Trace trace = materialize_trace(config);
  return replay_check(config, trace);
}

std::vector<std::string> verify_result(const SimConfig& config, const Trace& trace, const SimResult& r) {
  auto out = check_kernel_invariants(r);
  const int cls = config.query.class_id;
  for (std::int64_t f : r.answer.positives)
    if (!trace.frame(f).contains(cls)) out.push_back("returned frame " + std::to_string(f) + " is not positive");

  // Steals must follow a same-group camera resolution.
  std::unordered_map<std::int64_t, double> scored_at;
  for (const auto& e : r.events) {
    if (e.kind == EventKind::FrameScored) scored_at.emplace(e.frame, e.time_s);
    if (e.kind == EventKind::UploadStolen) {
      const auto by = static_cast<std::int64_t>(e.value);
      auto it = scored_at.find(by);
      if (it == scored_at.end() || it->second > e.time_s)
        out.push_back("steal of frame " + std::to_string(e.frame) + " has no prior resolution");
      else if (!r.answer.tags.empty()) {
        const Tag t = r.answer.tags.at(static_cast<std::size_t>(by - r.span_first));
        if (t != Tag::Positive && t != Tag::Negative)
          out.push_back("steal of frame " + std::to_string(e.frame) + " justified by an unresolved frame");
      }
    }
  }
  return out;
}

}  // namespace zc
