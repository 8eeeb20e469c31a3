#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "zc/config.hpp"
#include "zc/knowledge.hpp"
#include "zc/operators.hpp"

using namespace zc;

namespace {

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Half the frames hold one object inside the top-left quarter.
Trace half_positive(int n, double hard_fraction, std::uint64_t seed = 5) {
  Trace t;
  t.fps = 1.0;
  t.duration_s = n;
  t.classes = {0};
  t.difficulty = {hard_fraction, 4.0, seed};
  for (int i = 0; i < n; ++i) {
    FrameRecord fr{i, static_cast<double>(i), {}, 60000, 6000};
    if (mix64(static_cast<std::uint64_t>(i) * 31 + seed) % 2) fr.detections.push_back({0, Rect{100, 100, 40, 40}});
    t.frames.push_back(fr);
  }
  return t;
}

std::vector<LabeledSample> labels_for(const Trace& t, std::int64_t first, std::int64_t last) {
  std::vector<LabeledSample> out;
  for (auto i = first; i < last; ++i) out.push_back({i, t.frame(i).count(0)});
  return out;
}

OperatorState noisy_state(double sigma, Rect region = Rect{0, 0, 1280, 720}) {
  OperatorState st;
  st.spec.id = 3;
  st.spec.region = region;
  st.spec.flops = 1e6;
  st.sigma = sigma;
  st.fixed_sigma = true;
  st.trained = true;
  return st;
}

FamilyModel default_model() {
  const auto c = default_config();
  return FamilyModel(c.grid, c.calibration, c.trace.resolution);
}

}  // namespace

TEST_CASE("flops strictly increase in every knob") {
  auto m = default_model();
  const auto& g = m.grid();
  for (int conv : g.conv_layers)
    for (int k : g.kernel)
      for (int d : g.dense)
        for (int in : g.input_px) {
          const double f = m.flops(conv, k, d, in);
          CHECK(m.flops(conv + 1, k, d, in) > f);
          CHECK(m.flops(conv, k * 2, d, in) > f);
          CHECK(m.flops(conv, k, d * 2, in) > f);
          CHECK(m.flops(conv, k, d, in * 2) > f);
        }
}

TEST_CASE("family enumeration: 432 candidates down to 40, deterministic") {
  auto m = default_model();
  std::vector<CropRegion> regions;
  for (int i = 0; i < 4; ++i) regions.push_back({0.75 + 0.05 * i, Rect{0, 0, 320 * (i + 1), 720}});
  auto a = enumerate_family(m, regions, 40);
  auto b = enumerate_family(m, regions, 40);
  REQUIRE(a.size() == 40);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == static_cast<int>(i));
    CHECK(a[i].flops == b[i].flops);
    CHECK(a[i].region == b[i].region);
    CHECK(a[i].model_bytes >= static_cast<std::int64_t>(0.2 * 1048576) - 1);
    CHECK(a[i].model_bytes <= static_cast<std::int64_t>(15.0 * 1048576) + 1);
  }
  auto one = enumerate_family(m, regions, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].flops == doctest::Approx(m.flops_min()));
  CHECK(enumerate_family(m, regions, 1000).size() == 432);
}

TEST_CASE("operator fps is compute over flops") {
  OperatorSpec s;
  s.flops = 1e6;
  CameraModel cam;
  cam.compute_rate = 1e9;
  CHECK(operator_fps(s, cam) == doctest::Approx(1000.0));
  cam.compute_rate = 2e9;
  CHECK(operator_fps(s, cam) == doctest::Approx(2000.0));
  cam.compute_rate = 0.0;
  CHECK_THROWS_AS(operator_fps(s, cam), OperatorError);
}

TEST_CASE("default preset spans at least 27 to 1000 fps") {
  auto m = default_model();
  const auto cam = camera_preset("rpi3");
  OperatorSpec cheap, dear;
  cheap.flops = m.flops_min();
  dear.flops = m.flops_max();
  CHECK(operator_fps(dear, cam) <= 27.0);
  CHECK(operator_fps(cheap, cam) >= 1000.0);
  CHECK_THROWS_AS(camera_preset("toaster"), OperatorError);
}

TEST_CASE("learning curve identity and monotonicity") {
  auto m = default_model();
  auto fam = enumerate_family(m, {}, 40);
  for (const auto& spec : fam) {
    const double lo = m.sigma_min(spec);
    const double s0 = m.sigma_at(spec, 0.0);
    const double s_tau = m.sigma_at(spec, m.tau(spec));
    CHECK(s0 - s_tau == doctest::Approx((s0 - lo) * (1.0 - std::exp(-1.0))));
    double prev = s0;
    for (double n = 50; n < 5000; n += 50) {
      const double s = m.sigma_at(spec, n);
      CHECK(s <= prev);
      prev = s;
    }
    CHECK(lo >= 0.05 - 1e-12);
    CHECK(lo <= 0.35 + 1e-12);
    CHECK(m.tau(spec) >= 100.0 - 1e-9);
    CHECK(m.tau(spec) <= 2000.0 + 1e-9);
    CHECK(m.train_latency_s(spec) >= 5.0);
    CHECK(m.train_latency_s(spec) <= 45.0);
  }
  // More capacity lowers the floor and slows learning.
  CHECK(m.sigma_min(fam.back()) < m.sigma_min(fam.front()));
  CHECK(m.tau(fam.back()) > m.tau(fam.front()));
}

TEST_CASE("noiseless scoring and crop blindness") {
  auto t = half_positive(200, 1.0);
  auto st = noisy_state(0.0, Rect{0, 0, 640, 360});
  auto blind = noisy_state(0.0, Rect{640, 360, 640, 360});
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  for (std::int64_t i = 0; i < t.frame_count(); ++i) {
    SplitMix64 rng(i);
    const double s = score_frame(st, t.frame(i), 0, 1.0, rng);
    CHECK(s == (t.frame(i).contains(0) ? 1.0 : 0.0));
    CHECK(score_frame(blind, t.frame(i), 0, 1.0, rng) == 0.0);
    scores.push_back(s);
    labels.push_back(t.frame(i).contains(0));
  }
  CHECK(roc_auc(scores, labels) == 1.0);
  auto th = calibrate_thresholds(scores, labels, {0.01, 0.01});
  for (std::size_t i = 0; i < scores.size(); ++i)
    CHECK(classify(scores[i], th) == (labels[i] ? Tag::Positive : Tag::Negative));
  OperatorState untrained;
  SplitMix64 rng(1);
  CHECK_THROWS_AS(score_frame(untrained, t.frame(0), 0, 1.0, rng), OperatorError);
}

TEST_CASE("visibility: boxes overlapping the region count, wholly outside ones do not") {
  FrameRecord fr;
  fr.detections = {{0, Rect{90, 90, 20, 20}}, {0, Rect{500, 500, 10, 10}}};
  auto st = noisy_state(0.0, Rect{0, 0, 100, 100});
  CHECK(visible_signal(st, fr, 0) == 1.0);
  st.signal = Signal::Count;
  st.count_scale = 4.0;
  CHECK(visible_signal(st, fr, 0) == 0.25);
  st.spec.region = Rect{0, 0, 1280, 720};
  CHECK(visible_signal(st, fr, 0) == 0.5);
  st.spec.region = Rect{200, 200, 100, 100};
  CHECK(visible_signal(st, fr, 0) == 0.0);
}

TEST_CASE("AUC at sigma 0.2 matches the Gaussian closed form") {
  const auto st = noisy_state(0.2);
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  FrameRecord pos, neg;
  pos.detections = {{0, Rect{10, 10, 10, 10}}};
  for (int i = 0; i < 1000; ++i) {
    SplitMix64 rng(noise_stream(9, 3, i));
    const bool p = i % 2 == 0;
    scores.push_back(score_frame(st, p ? pos : neg, 0, 1.0, rng));
    labels.push_back(p);
  }
  CHECK(std::abs(roc_auc(scores, labels) - phi(1.0 / (0.2 * std::sqrt(2.0)))) <= 0.02);

  // A noisier operator lands near its own closed form too.
  auto wide = noisy_state(0.6);
  scores.clear();
  for (int i = 0; i < 1000; ++i) {
    SplitMix64 rng(noise_stream(9, 4, i));
    // Unclamped comparison: the clamp is monotone and leaves ranks alone.
    scores.push_back((labels[i] ? 1.0 : 0.0) + 0.6 * rng.normal());
  }
  CHECK(std::abs(roc_auc(scores, labels) - phi(1.0 / (0.6 * std::sqrt(2.0)))) <= 0.02);
  (void)wide;
}

TEST_CASE("roc_auc handles ties and degenerate labels") {
  std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  std::vector<std::uint8_t> l{0, 0, 1, 1};
  CHECK(roc_auc(s, l) == doctest::Approx(0.75));
  std::vector<double> tie{0.5, 0.5};
  std::vector<std::uint8_t> tl{0, 1};
  CHECK(roc_auc(tie, tl) == 0.5);
  std::vector<std::uint8_t> allpos{1, 1};
  CHECK(roc_auc(tie, allpos) == 0.5);
}

TEST_CASE("threshold calibration is sound on a fresh test set") {
  const auto st = noisy_state(0.3);
  FrameRecord pos, neg;
  pos.detections = {{0, Rect{10, 10, 10, 10}}};
  auto draw = [&](int salt, int n, std::vector<double>& s, std::vector<std::uint8_t>& l) {
    for (int i = 0; i < n; ++i) {
      SplitMix64 rng(noise_stream(salt, 3, i));
      const bool p = mix64(static_cast<std::uint64_t>(i) + 77 * salt) % 2;
      s.push_back(score_frame(st, p ? pos : neg, 0, 1.0, rng));
      l.push_back(p);
    }
  };
  std::vector<double> vs, ts;
  std::vector<std::uint8_t> vl, tl;
  draw(1, 2000, vs, vl);
  draw(2, 4000, ts, tl);
  const ErrorTolerance tol{0.01, 0.01};
  const auto th = calibrate_thresholds(vs, vl, tol);
  CHECK(th.low <= th.high);

  // Widest: on the calibration set the rates sit at the tolerance.
  auto rates = [&](const std::vector<double>& s, const std::vector<std::uint8_t>& l) {
    double fp = 0, fn = 0, np = 0, nn = 0, resolved = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const Tag t = classify(s[i], th);
      resolved += t != Tag::Undecidable;
      if (l[i]) {
        ++np;
        fn += t == Tag::Negative;
      } else {
        ++nn;
        fp += t == Tag::Positive;
      }
    }
    return std::tuple{fp / nn, fn / np, resolved / s.size(), nn, np};
  };
  auto [vfp, vfn, vgamma, vnn, vnp] = rates(vs, vl);
  CHECK(vfp <= 0.01);
  CHECK(vfn <= 0.01);
  auto [fp, fn, gamma, nn, np] = rates(ts, tl);
  CHECK(fp <= 0.01 + 3 * std::sqrt(0.01 * 0.99 / nn));
  CHECK(fn <= 0.01 + 3 * std::sqrt(0.01 * 0.99 / np));
  CHECK(gamma > 0.3);
  CHECK(gamma < 1.0);
}

TEST_CASE("train: gamma is the validation fraction outside the thresholds") {
  auto t = half_positive(3000, 1.0);
  auto m = default_model();
  auto spec = m.make_spec(0, 3, 16, 32, 50, Rect{0, 0, 1280, 720}, 1.0);
  auto st = initial_state(spec, m, camera_preset("rpi3"));
  st.sigma = 0.3;
  st.fixed_sigma = true;
  auto samples = labels_for(t, 0, 3000);
  TrainOptions opt;
  opt.noise_seed = 4;
  opt.tolerance = ErrorTolerance{0.01, 0.01};
  auto out = train(st, samples, t, m, opt);
  REQUIRE(out.thresholds);
  CHECK(out.sigma == 0.3);
  std::size_t val = 0, resolved = 0;
  for (const auto& s : samples) {
    if (!is_validation_frame(s.frame_index)) continue;
    ++val;
    SplitMix64 rng(noise_stream(4, spec.id, s.frame_index));
    resolved += classify(score_frame(out, t.frame(s.frame_index), 0, 1.0, rng), *out.thresholds) != Tag::Undecidable;
  }
  CHECK(val == doctest::Approx(900).epsilon(0.1));
  CHECK(out.measured_gamma == doctest::Approx(static_cast<double>(resolved) / val));

  // Noiseless: thresholds may meet and everything resolves.
  st.sigma = 0.0;
  auto exact = train(st, samples, t, m, opt);
  CHECK(exact.measured_gamma == 1.0);
  CHECK(exact.measured_auc == 1.0);
}

TEST_CASE("train rejects too few samples and grows n_train") {
  auto t = half_positive(1000, 0.3);
  auto m = default_model();
  auto spec = m.make_spec(0, 2, 8, 16, 25, Rect{0, 0, 1280, 720}, 1.0);
  auto st = initial_state(spec, m, camera_preset("rpi3"));
  TrainOptions opt;
  CHECK_THROWS_AS(train(st, labels_for(t, 0, 150), t, m, opt), OperatorError);
  auto a = train(st, labels_for(t, 0, 400), t, m, opt);
  auto b = train(a, labels_for(t, 0, 1000), t, m, opt);
  CHECK(a.n_train > 0);
  CHECK(b.n_train > a.n_train);
  CHECK(b.sigma < a.sigma);
  CHECK(a.sigma < st.sigma);
  // Wrong labels count against the sample budget.
  auto bad = labels_for(t, 0, 400);
  for (auto& s : bad) s.label_count = s.label_count ? 0 : 1;
  CHECK(effective_training_samples(bad, t, 0, Signal::Presence) < 0);
  CHECK(train(st, bad, t, m, opt).n_train == 0.0);
}

TEST_CASE("AUC on a fixed validation set does not fall as training grows") {
  auto t = half_positive(6000, 0.5);
  auto m = default_model();
  auto spec = m.make_spec(0, 4, 16, 32, 50, Rect{0, 0, 1280, 720}, 1.0);
  auto st = initial_state(spec, m, camera_preset("rpi3"));
  // Validation frames are the same; only training frames are added.
  double prev = 0.0;
  for (int n : {300, 800, 1600, 3200, 6000}) {
    auto samples = labels_for(t, 0, 6000);
    std::vector<LabeledSample> use;
    int train_seen = 0;
    for (const auto& s : samples) {
      if (is_validation_frame(s.frame_index)) {
        use.push_back(s);
      } else if (train_seen < n * 7 / 10) {
        use.push_back(s);
        ++train_seen;
      }
    }
    TrainOptions opt;
    opt.noise_seed = 11;
    auto out = train(st, use, t, m, opt);
    CHECK(out.measured_auc >= prev - 0.02);
    prev = out.measured_auc;
  }
}

TEST_CASE("pareto frontier examples") {
  auto mk = [](double fps, double auc) {
    OperatorState s;
    s.fps_cam = fps;
    s.measured_auc = auc;
    return s;
  };
  std::vector<OperatorState> three{mk(100, .8), mk(50, .9), mk(60, .85)};
  auto f = pareto_frontier(three);
  REQUIRE(f.size() == 3);
  CHECK(f[0].fps_cam == 100);
  CHECK(f[1].fps_cam == 60);
  CHECK(f[2].fps_cam == 50);
  three.push_back(mk(40, .85));
  CHECK(pareto_frontier(three).size() == 3);
}

TEST_CASE("crop benefit: cropped operator beats the full frame at equal pixel density") {
  // Hotspot covers 1/4 of the frame.
  SynthParams p;
  ClassParams c;
  c.occurrence_rate = 0.3;
  c.hotspots = {Hotspot{Rect{0, 0, 640, 360}, 1.0, 0.0, {}}};
  p.classes = {c};
  p.seed = 13;
  p.difficulty = {0.3, 4.0, 1};
  Resolution res;
  auto t = generate_trace(p, 1.0, 4 * 3600.0, res);
  auto lms = sample_landmarks(t, t.full_span(), 30);
  auto ks = build_knowledge(lms, 0, t, t.full_span());
  const Rect crop = ks.crop_regions.at(0.95);
  REQUIRE(crop.area() * 4 <= res.width * res.height);

  auto m = default_model();
  const auto cam = camera_preset("rpi3");
  std::vector<LabeledSample> samples;
  for (const auto& lm : lms) samples.push_back({lm.frame_index, lm.count(0)});
  for (int conv : {2, 3, 4}) {
    // One id for both so they draw the same noise samples.
    auto cropped = initial_state(m.make_spec(0, conv, 16, 32, 50, crop, 0.95), m, cam);
    // Same arch, same flops, whole frame: fewer pixels per object.
    auto same = initial_state(m.make_spec(0, conv, 16, 32, 50, Rect{0, 0, 1280, 720}, 1.0), m, cam);
    // Whole frame at the cropped pixel density needs a larger input.
    auto dense = initial_state(m.make_spec(0, conv, 16, 32, 100, Rect{0, 0, 1280, 720}, 1.0), m, cam);
    CHECK(cropped.fps_cam == doctest::Approx(same.fps_cam));
    CHECK(cropped.fps_cam > dense.fps_cam);
    TrainOptions opt;
    opt.noise_seed = 21;
    auto a = train(cropped, samples, t, m, opt);
    auto b = train(same, samples, t, m, opt);
    CHECK(a.sigma < b.sigma);
    CHECK(a.measured_auc > b.measured_auc);
  }
}

TEST_CASE("default family frontier holds 5 to 15 operators") {
  auto cfg = default_config();
  cfg.trace.duration_s = 12 * 3600.0;
  cfg.query.span = {0.0, cfg.trace.duration_s};
  auto t = materialize_trace(cfg);
  auto lms = sample_landmarks(t, t.full_span(), 30);
  auto ks = build_knowledge(lms, 0, t, t.full_span());
  std::vector<CropRegion> regions;
  for (const auto& [cov, r] : ks.crop_regions)
    if (!(r == Rect{0, 0, 1280, 720})) regions.push_back({cov, r});
  regions.push_back({1.0, Rect{0, 0, 1280, 720}});
  auto m = FamilyModel(cfg.grid, cfg.calibration, cfg.trace.resolution);
  auto specs = enumerate_family(m, regions, 40);
  REQUIRE(specs.size() == 40);
  std::vector<LabeledSample> samples;
  for (const auto& lm : lms) samples.push_back({lm.frame_index, lm.count(0)});
  std::vector<OperatorState> states;
  TrainOptions opt;
  opt.noise_seed = 1;
  for (const auto& s : specs) states.push_back(train(initial_state(s, m, cfg.camera), samples, t, m, opt));
  auto front = pareto_frontier(states);
  CHECK(front.size() >= 5);
  CHECK(front.size() <= 15);
  for (std::size_t i = 1; i < front.size(); ++i) CHECK(front[i - 1].fps_cam >= front[i].fps_cam);

  std::ostringstream csv;
  write_family_csv(states, csv);
  const std::string text = csv.str();
  CHECK(text.rfind("id,conv,kernel,dense,input,region,flops,model_bytes,fps_cam,auc,gamma\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 41);
}

TEST_CASE("validation split is about 30% and stable") {
  int val = 0;
  for (int i = 0; i < 100000; ++i) val += is_validation_frame(i);
  CHECK(val == doctest::Approx(30000).epsilon(0.02));
  CHECK(is_validation_frame(12345) == is_validation_frame(12345));
  CHECK(noise_stream(1, 2, 3) != noise_stream(1, 2, 4));
  CHECK(noise_stream(1, 2, 3) != noise_stream(1, 3, 3));
}
