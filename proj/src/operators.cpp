#include "zc/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace zc {

CameraModel camera_preset(const std::string& name) {
  CameraModel cam;
  cam.preset = name;
  if (name == "rpi3") {
    cam.compute_rate = 1.0e11;
    cam.detector_fps = 0.1;
  } else if (name == "odroid") {
    cam.compute_rate = 2.0e11;
    cam.detector_fps = 0.25;
  } else if (name == "jetson") {
    cam.compute_rate = 8.0e11;
    cam.detector_fps = 2.0;
  } else {
    throw OperatorError("unknown camera preset '" + name + "'");
  }
  return cam;
}

FamilyModel::FamilyModel(ArchGrid grid, OperatorCalibration calibration, Resolution resolution)
    : grid_(std::move(grid)), cal_(calibration), res_(resolution) {
  if (grid_.conv_layers.empty() || grid_.kernel.empty() || grid_.dense.empty() || grid_.input_px.empty())
    throw OperatorError("architecture grid must be nonempty");
  auto lo = [](const std::vector<int>& v) { return *std::min_element(v.begin(), v.end()); };
  auto hi = [](const std::vector<int>& v) { return *std::max_element(v.begin(), v.end()); };
  flops_lo_ = flops(lo(grid_.conv_layers), lo(grid_.kernel), lo(grid_.dense), lo(grid_.input_px));
  flops_hi_ = flops(hi(grid_.conv_layers), hi(grid_.kernel), hi(grid_.dense), hi(grid_.input_px));
  if (!(flops_hi_ > flops_lo_)) flops_hi_ = flops_lo_ * 2.0;
}

double FamilyModel::flops(int conv_layers, int kernel, int dense, int input_px) const {
  const double k = kernel, in = input_px;
  return cal_.flops_conv_coeff * conv_layers * k * k * in * in + cal_.flops_dense_coeff * dense * k;
}

double FamilyModel::cost_level(double f) const {
  return std::clamp(std::log(f / flops_lo_) / std::log(flops_hi_ / flops_lo_), 0.0, 1.0);
}

OperatorSpec FamilyModel::make_spec(int id, int conv_layers, int kernel, int dense, int input_px, const Rect& region,
                                    double coverage) const {
  OperatorSpec s;
  s.id = id;
  s.conv_layers = conv_layers;
  s.kernel = kernel;
  s.dense = dense;
  s.input_px = input_px;
  s.region = region;
  s.coverage = coverage;
  s.flops = flops(conv_layers, kernel, dense, input_px);
  const double frame_area = static_cast<double>(res_.width) * res_.height;
  const double gain = std::clamp(frame_area / static_cast<double>(std::max<std::int64_t>(1, region.area())), 1.0,
                                 cal_.density_gain_cap);
  s.capacity = s.flops * gain;
  const double u = cost_level(s.flops);
  s.model_bytes = static_cast<std::int64_t>(
      std::llround(cal_.model_bytes_min * std::pow(cal_.model_bytes_max / cal_.model_bytes_min, u)));
  return s;
}

double FamilyModel::sigma_min(const OperatorSpec& spec) const {
  const double top = flops_hi_ * cal_.density_gain_cap;
  const double u = std::clamp(std::log(spec.capacity / flops_lo_) / std::log(top / flops_lo_), 0.0, 1.0);
  return cal_.sigma_min_worst - (cal_.sigma_min_worst - cal_.sigma_min_best) * u;
}

double FamilyModel::tau(const OperatorSpec& spec) const {
  return cal_.tau_min * std::pow(cal_.tau_max / cal_.tau_min, cost_level(spec.flops));
}

double FamilyModel::sigma_at(const OperatorSpec& spec, double n_train) const {
  const double floor = sigma_min(spec);
  const double start = std::max(cal_.sigma0, floor);
  return floor + (start - floor) * std::exp(-std::max(0.0, n_train) / tau(spec));
}

double FamilyModel::train_latency_s(const OperatorSpec& spec) const {
  return cal_.train_latency_min_s + (cal_.train_latency_max_s - cal_.train_latency_min_s) * cost_level(spec.flops);
}

std::vector<OperatorSpec> enumerate_family(const FamilyModel& model, std::span<const CropRegion> regions,
                                           std::size_t limit) {
  const auto& g = model.grid();
  const Resolution& res = model.resolution();
  std::vector<CropRegion> use(regions.begin(), regions.end());
  if (use.empty()) use.push_back(CropRegion{1.0, Rect{0, 0, res.width, res.height}});

  std::vector<OperatorSpec> all;
  for (int conv : g.conv_layers)
    for (int k : g.kernel)
      for (int d : g.dense)
        for (int in : g.input_px)
          for (const auto& r : use) all.push_back(model.make_spec(0, conv, k, d, in, r.rect, r.coverage));
  std::stable_sort(all.begin(), all.end(), [](const OperatorSpec& a, const OperatorSpec& b) {
    return std::tie(a.flops, a.capacity) < std::tie(b.flops, b.capacity);
  });
  if (limit == 0) return {};
  if (all.size() <= limit) {
    for (std::size_t i = 0; i < all.size(); ++i) all[i].id = static_cast<int>(i);
    return all;
  }

  // Split the cost-sorted candidates into (up to) ten strata of equal rank
  // width and pick evenly inside each one.
  const std::size_t strata = std::min<std::size_t>(10, limit);
  std::vector<OperatorSpec> out;
  for (std::size_t s = 0; s < strata; ++s) {
    const std::size_t begin = s * all.size() / strata;
    const std::size_t end = (s + 1) * all.size() / strata;
    const std::size_t picks = limit / strata + (s < limit % strata ? 1 : 0);
    for (std::size_t j = 0; j < picks; ++j) out.push_back(all[begin + j * (end - begin) / picks]);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
  return out;
}

double operator_fps(const OperatorSpec& spec, const CameraModel& camera) {
  if (camera.compute_rate <= 0.0) throw OperatorError("compute_rate must be positive");
  return camera.compute_rate / spec.flops;
}

const char* tag_name(Tag t) {
  switch (t) {
    case Tag::Untagged: return "untagged";
    case Tag::Positive: return "P";
    case Tag::Negative: return "N";
    case Tag::Undecidable: return "U";
  }
  return "?";
}

Tag classify(double score, const Thresholds& th) {
  if (score < th.low) return Tag::Negative;
  if (score > th.high) return Tag::Positive;
  return Tag::Undecidable;
}

OperatorState initial_state(const OperatorSpec& spec, const FamilyModel& model, const CameraModel& camera,
                            Signal signal) {
  OperatorState st;
  st.spec = spec;
  st.signal = signal;
  st.sigma = model.sigma_at(spec, 0.0);
  st.fps_cam = operator_fps(spec, camera);
  return st;
}

namespace {

bool overlaps(const Rect& a, const Rect& b) {
  return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

}  // namespace

double visible_signal(const OperatorState& state, const FrameRecord& frame, int class_id) {
  int visible = 0;
  for (const auto& d : frame.detections)
    if (d.class_id == class_id && overlaps(state.spec.region, d.bbox)) ++visible;
  if (state.signal == Signal::Presence) return visible > 0 ? 1.0 : 0.0;
  return std::min(1.0, visible / std::max(1.0, state.count_scale));
}

double score_frame(const OperatorState& state, const FrameRecord& frame, int class_id, double hardness,
                   SplitMix64& rng) {
  if (!state.trained) throw OperatorError("operator " + std::to_string(state.spec.id) + " is untrained");
  const double noise = state.sigma > 0.0 ? rng.normal() * state.sigma : 0.0;
  return std::clamp(visible_signal(state, frame, class_id) + hardness * noise, 0.0, 1.0);
}

std::uint64_t noise_stream(std::uint64_t seed, int operator_id, std::int64_t frame_index) {
  return hash_keys(seed, 0x4e4f495345ULL, operator_id, frame_index);
}

bool is_validation_frame(std::int64_t frame_index) {
  return mix64(static_cast<std::uint64_t>(frame_index) ^ 0x76616c6964ULL) % 10 >= 7;
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) {
        rank_sum += avg_rank;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return 0.5;
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

Thresholds calibrate_thresholds(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                const ErrorTolerance& tolerance) {
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? pos : neg).push_back(scores[i]);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end(), std::greater<>());

  Thresholds th;
  // Negative iff score < low: at most floor(fn * |pos|) positives may fall below.
  if (pos.empty()) {
    th.low = -1.0;
  } else {
    const auto allowed = static_cast<std::size_t>(std::floor(tolerance.fn * static_cast<double>(pos.size()) + 1e-9));
    th.low = allowed < pos.size() ? pos[allowed] : 2.0;
  }
  // Positive iff score > high.
  if (neg.empty()) {
    th.high = 2.0;
  } else {
    const auto allowed = static_cast<std::size_t>(std::floor(tolerance.fp * static_cast<double>(neg.size()) + 1e-9));
    th.high = allowed < neg.size() ? neg[allowed] : -1.0;
  }
  if (th.low > th.high) {
    const double mid = (th.low + th.high) / 2.0;
    th.low = th.high = mid;
  }
  return th;
}

namespace {

bool label_positive(const OperatorState& state, int label_count, int count_threshold) {
  return state.signal == Signal::Presence ? label_count > 0 : label_count >= count_threshold;
}

}  // namespace

double effective_training_samples(std::span<const LabeledSample> samples, const Trace& trace, int class_id,
                                  Signal signal) {
  double effective = 0.0;
  for (const auto& s : samples) {
    if (is_validation_frame(s.frame_index)) continue;
    const int truth = trace.frame(s.frame_index).count(class_id);
    const bool agrees = signal == Signal::Presence ? (truth > 0) == (s.label_count > 0) : truth == s.label_count;
    effective += agrees ? 1.0 : -1.0;
  }
  return effective;
}

OperatorState train(const OperatorState& state, std::span<const LabeledSample> samples, const Trace& trace,
                    const FamilyModel& model, const TrainOptions& options) {
  const auto& cal = model.calibration();
  if (samples.size() < static_cast<std::size_t>(cal.bootstrap_min))
    throw OperatorError("need at least " + std::to_string(cal.bootstrap_min) + " labeled samples, got " +
                        std::to_string(samples.size()));

  OperatorState out = state;
  std::vector<const LabeledSample*> val;
  for (const auto& s : samples)
    if (is_validation_frame(s.frame_index)) val.push_back(&s);
  const double effective = options.effective_samples
                               ? *options.effective_samples
                               : effective_training_samples(samples, trace, options.class_id, state.signal);
  out.n_train = std::max(state.n_train, std::max(0.0, effective));
  if (!out.fixed_sigma) out.sigma = model.sigma_at(out.spec, out.n_train);
  out.trained = true;

  auto score_of = [&](std::int64_t idx) {
    SplitMix64 rng(noise_stream(options.noise_seed, out.spec.id, idx));
    return score_frame(out, trace.frame(idx), options.class_id, trace.hardness(idx), rng);
  };

  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  scores.reserve(val.size());
  for (const auto* s : val) {
    scores.push_back(score_of(s->frame_index));
    labels.push_back(label_positive(out, s->label_count, options.count_label_threshold));
  }
  out.measured_auc = roc_auc(scores, labels);
  if (options.tolerance) out.thresholds = calibrate_thresholds(scores, labels, *options.tolerance);

  if (out.thresholds) {
    std::size_t resolved = 0, total = 0;
    if (!options.gamma_set.empty()) {
      for (const auto& s : options.gamma_set) {
        if (!is_validation_frame(s.frame_index)) continue;
        ++total;
        resolved += classify(score_of(s.frame_index), *out.thresholds) != Tag::Undecidable;
      }
    }
    if (total == 0) {
      for (double sc : scores) resolved += classify(sc, *out.thresholds) != Tag::Undecidable;
      total = scores.size();
    }
    out.measured_gamma = total ? static_cast<double>(resolved) / static_cast<double>(total) : 0.0;
  }
  return out;
}

std::vector<OperatorState> pareto_frontier(std::span<const OperatorState> states) {
  std::vector<OperatorState> out;
  for (const auto& a : states) {
    bool dominated = false;
    for (const auto& b : states) {
      if (&a == &b) continue;
      if (b.fps_cam >= a.fps_cam && b.measured_auc >= a.measured_auc &&
          (b.fps_cam > a.fps_cam || b.measured_auc > a.measured_auc)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) out.push_back(a);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const OperatorState& a, const OperatorState& b) { return a.fps_cam > b.fps_cam; });
  return out;
}

void write_family_csv(std::span<const OperatorState> states, std::ostream& out) {
  out << "id,conv,kernel,dense,input,region,flops,model_bytes,fps_cam,auc,gamma\n";
  for (const auto& s : states) {
    const auto& p = s.spec;
    out << p.id << ',' << p.conv_layers << ',' << p.kernel << ',' << p.dense << ',' << p.input_px << ',' << p.region.x
        << ':' << p.region.y << ':' << p.region.w << ':' << p.region.h << ',' << p.flops << ',' << p.model_bytes << ','
        << s.fps_cam << ',' << s.measured_auc << ',' << s.measured_gamma << '\n';
  }
}

}  // namespace zc
