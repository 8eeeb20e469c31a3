#include "zc/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "zc/text.hpp"

namespace zc {

using nlohmann::json;

const std::vector<std::string>& known_systems() {
  static const std::vector<std::string> names{"zc2", "cloudonly", "optop", "preindexall"};
  return names;
}

SimConfig default_config() {
  SimConfig c;
  c.trace.synth.id = "default";
  c.trace.synth.seed = 7;
  c.trace.synth.difficulty = {0.3, 4.0, 0};

  // Hourly day/night shape, cycled over the two days.
  std::vector<double> day(24);
  for (int h = 0; h < 24; ++h) day[h] = (h >= 7 && h < 20) ? 1.6 : 0.25;

  ClassParams car;
  car.class_id = 0;
  car.occurrence_rate = 0.2;
  car.temporal_profile = day;
  // A road band of 19% of the frame, plus a parking corner that fills up in
  // the evening.
  std::vector<double> evening(24, 0.5);
  for (int h = 17; h < 23; ++h) evening[h] = 3.0;
  car.hotspots = {Hotspot{Rect{0, 330, 1280, 137}, 0.85, 6.0, {}},
                  Hotspot{Rect{960, 520, 256, 160}, 0.15, 6.0, evening}};
  car.count = {CountDistribution::Kind::Geometric, 1.5};

  ClassParams person;
  person.class_id = 1;
  person.occurrence_rate = 0.08;
  person.temporal_profile = day;
  person.hotspots = {Hotspot{Rect{0, 500, 1280, 200}, 1.0, 10.0, {}}};
  person.count = {CountDistribution::Kind::Geometric, 1.3};
  person.object_w = 24;
  person.object_h = 60;

  c.trace.synth.classes = {car, person};
  c.query.type = QueryType::Retrieval;
  c.query.class_id = 0;
  c.query.span = {0.0, c.trace.duration_s};
  return c;
}

// --- reading --------------------------------------------------------------------

namespace {

class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    read(j_.at(key), field(key), out);
  }

  Obj sub(const char* key) {
    seen_.insert(key);
    return Obj(j_.at(key), field(key));
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown field");
  }

  static void read(const json& v, const std::string& path, double& out) {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    out = v.get<double>();
  }
  static void read(const json& v, const std::string& path, int& out) {
    if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
    out = v.get<int>();
  }
  static void read(const json& v, const std::string& path, std::int64_t& out) {
    if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
    out = v.get<std::int64_t>();
  }
  static void read(const json& v, const std::string& path, std::uint64_t& out) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ConfigError(path + ": expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const json& v, const std::string& path, bool& out) {
    if (!v.is_boolean()) throw ConfigError(path + ": expected true or false");
    out = v.get<bool>();
  }
  static void read(const json& v, const std::string& path, std::string& out) {
    if (!v.is_string()) throw ConfigError(path + ": expected a string");
    out = v.get<std::string>();
  }
  template <typename T>
  static void read(const json& v, const std::string& path, std::optional<T>& out) {
    if (v.is_null()) {
      out.reset();
      return;
    }
    T t{};
    read(v, path, t);
    out = t;
  }
  template <typename T>
  static void read(const json& v, const std::string& path, std::vector<T>& out) {
    if (!v.is_array()) throw ConfigError(path + ": expected an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      T t{};
      read(v[i], path + "[" + std::to_string(i) + "]", t);
      out.push_back(t);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Rect read_rect(Obj o) {
  Rect r;
  o.get("x", r.x);
  o.get("y", r.y);
  o.get("w", r.w);
  o.get("h", r.h);
  o.finish();
  return r;
}

ClassParams read_class(Obj o) {
  ClassParams c;
  o.get("id", c.class_id);
  o.get("occurrence_rate", c.occurrence_rate);
  o.get("temporal_profile", c.temporal_profile);
  o.get("temporal_bin_s", c.temporal_bin_s);
  o.get("object_w", c.object_w);
  o.get("object_h", c.object_h);
  if (o.has("count")) {
    Obj cnt = o.sub("count");
    std::string kind = "geometric";
    cnt.get("kind", kind);
    if (kind == "geometric")
      c.count.kind = CountDistribution::Kind::Geometric;
    else if (kind == "poisson")
      c.count.kind = CountDistribution::Kind::Poisson;
    else
      throw ConfigError(cnt.field("kind") + ": expected geometric or poisson");
    cnt.get("mean", c.count.mean);
    cnt.finish();
  }
  if (o.has("hotspots")) {
    const json& hs = o.raw("hotspots");
    const std::string path = o.field("hotspots");
    if (!hs.is_array()) throw ConfigError(path + ": expected an array");
    for (std::size_t i = 0; i < hs.size(); ++i) {
      Obj h(hs[i], path + "[" + std::to_string(i) + "]");
      Hotspot spot;
      int x = 0, y = 0, w = 1, hh = 1;
      h.get("x", x);
      h.get("y", y);
      h.get("w", w);
      h.get("h", hh);
      spot.area = Rect{x, y, w, hh};
      h.get("weight", spot.weight);
      h.get("jitter_px", spot.jitter_px);
      h.get("time_profile", spot.time_profile);
      h.finish();
      c.hotspots.push_back(spot);
    }
  }
  o.finish();
  return c;
}

void read_trace(Obj o, SimConfig& c) {
  auto& t = c.trace;
  o.get("path", t.path);
  o.get("id", t.synth.id);
  o.get("seed", t.synth.seed);
  o.get("fps", t.fps);
  o.get("duration_s", t.duration_s);
  o.get("width", t.resolution.width);
  o.get("height", t.resolution.height);
  o.get("full_bytes", t.synth.full_bytes);
  o.get("thumb_bytes", t.synth.thumb_bytes);
  if (o.has("difficulty")) {
    Obj d = o.sub("difficulty");
    d.get("hard_fraction", t.synth.difficulty.hard_fraction);
    d.get("hard_multiplier", t.synth.difficulty.hard_multiplier);
    d.get("seed", t.synth.difficulty.seed);
    d.finish();
  }
  if (o.has("classes")) {
    const json& cs = o.raw("classes");
    const std::string path = o.field("classes");
    if (!cs.is_array()) throw ConfigError(path + ": expected an array");
    t.synth.classes.clear();
    for (std::size_t i = 0; i < cs.size(); ++i)
      t.synth.classes.push_back(read_class(Obj(cs[i], path + "[" + std::to_string(i) + "]")));
  }
  o.finish();
}

void read_operators(Obj o, SimConfig& c) {
  o.get("limit", c.family_limit);
  if (o.has("grid")) {
    Obj g = o.sub("grid");
    g.get("conv_layers", c.grid.conv_layers);
    g.get("kernel", c.grid.kernel);
    g.get("dense", c.grid.dense);
    g.get("input_px", c.grid.input_px);
    g.finish();
  }
  if (o.has("calibration")) {
    Obj k = o.sub("calibration");
    auto& cal = c.calibration;
    k.get("flops_conv_coeff", cal.flops_conv_coeff);
    k.get("flops_dense_coeff", cal.flops_dense_coeff);
    k.get("sigma0", cal.sigma0);
    k.get("sigma_min_best", cal.sigma_min_best);
    k.get("sigma_min_worst", cal.sigma_min_worst);
    k.get("tau_min", cal.tau_min);
    k.get("tau_max", cal.tau_max);
    k.get("density_gain_cap", cal.density_gain_cap);
    k.get("model_bytes_min", cal.model_bytes_min);
    k.get("model_bytes_max", cal.model_bytes_max);
    k.get("train_latency_min_s", cal.train_latency_min_s);
    k.get("train_latency_max_s", cal.train_latency_max_s);
    k.get("bootstrap_min", cal.bootstrap_min);
    k.get("tag_message_bytes", cal.tag_message_bytes);
    k.finish();
  }
  if (o.has("explicit")) {
    const json& ops = o.raw("explicit");
    const std::string path = o.field("explicit");
    if (!ops.is_array()) throw ConfigError(path + ": expected an array");
    c.operators.clear();
    for (std::size_t i = 0; i < ops.size(); ++i) {
      Obj e(ops[i], path + "[" + std::to_string(i) + "]");
      ExplicitOperator op;
      e.get("fps", op.fps);
      e.get("sigma", op.sigma);
      e.get("model_bytes", op.model_bytes);
      if (e.has("region")) op.region = read_rect(e.sub("region"));
      e.finish();
      c.operators.push_back(op);
    }
  }
  o.finish();
}

void read_query(Obj o, SimConfig& c) {
  auto& q = c.query;
  if (o.has("type")) {
    std::string type;
    o.get("type", type);
    try {
      q.type = parse_query_type(type);
    } catch (const PolicyError&) {
      throw ConfigError(o.field("type") + ": unknown query type '" + type + "'");
    }
  }
  o.get("class", q.class_id);
  if (o.has("span")) {
    std::vector<double> span;
    o.get("span", span);
    if (span.size() != 2) throw ConfigError(o.field("span") + ": expected [start_s, end_s]");
    q.span = {span[0], span[1]};
  }
  if (o.has("tolerance")) {
    Obj t = o.sub("tolerance");
    t.get("fp", q.tolerance.fp);
    t.get("fn", q.tolerance.fn);
    t.finish();
  }
  o.get("levels", q.levels);
  o.finish();
}

}  // namespace

SimConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("parse error: ") + e.what());
  }
  SimConfig c = default_config();
  Obj o(root, "");
  o.get("seed", c.seed);
  o.get("system", c.system);
  bool span_given = false;
  if (o.has("trace")) read_trace(o.sub("trace"), c);
  if (o.has("camera")) {
    Obj cam = o.sub("camera");
    if (cam.has("preset")) {
      std::string preset;
      cam.get("preset", preset);
      try {
        const int interval = c.camera.landmark_interval_frames;
        c.camera = camera_preset(preset);
        c.camera.landmark_interval_frames = interval;
      } catch (const OperatorError&) {
        throw ConfigError(cam.field("preset") + ": unknown camera preset '" + preset + "'");
      }
    }
    cam.get("compute_rate", c.camera.compute_rate);
    cam.get("detector_fps", c.camera.detector_fps);
    cam.get("landmark_interval_frames", c.camera.landmark_interval_frames);
    cam.finish();
  }
  if (o.has("network")) {
    Obj n = o.sub("network");
    n.get("uplink_bytes_per_s", c.network.uplink_bytes_per_s);
    n.get("downlink_bytes_per_s", c.network.downlink_bytes_per_s);
    n.finish();
  }
  if (o.has("landmarks")) {
    Obj l = o.sub("landmarks");
    l.get("interval_frames", c.camera.landmark_interval_frames);
    l.get("drop_probability", c.corruption.drop_probability);
    l.get("spurious_rate", c.corruption.spurious_rate);
    l.get("grid_w", c.knowledge.grid_w);
    l.get("grid_h", c.knowledge.grid_h);
    l.get("bin_s", c.knowledge.bin_s);
    l.get("coverage_levels", c.knowledge.coverage_levels);
    l.get("exact_point_limit", c.knowledge.exact_point_limit);
    l.finish();
  }
  if (o.has("operators")) read_operators(o.sub("operators"), c);
  if (o.has("policy")) {
    Obj p = o.sub("policy");
    p.get("alpha", c.policy.alpha);
    p.get("k_decline", c.policy.k_decline);
    p.get("beta", c.policy.beta);
    p.get("window_w", c.policy.window_w);
    p.get("coverage_p", c.policy.coverage_p);
    p.get("theta_rankdist", c.policy.theta_rankdist);
    p.finish();
  }
  if (o.has("query")) {
    span_given = root.at("query").contains("span");
    read_query(o.sub("query"), c);
  }
  if (!span_given) c.query.span = {0.0, c.trace.duration_s};
  if (o.has("training")) {
    Obj t = o.sub("training");
    t.get("retrain_every", c.training.retrain_every);
    t.get("max_validation", c.training.max_validation);
    t.get("gamma_window", c.training.gamma_window);
    t.get("latency_s", c.training.latency_s);
    t.finish();
  }
  if (o.has("index")) {
    Obj i = o.sub("index");
    i.get("drop_probability", c.index.drop_probability);
    i.get("spurious_rate", c.index.spurious_rate);
    i.get("seed", c.index.seed);
    i.finish();
  }
  if (o.has("run")) {
    Obj r = o.sub("run");
    r.get("abort_time_s", c.abort_time_s);
    r.get("stop_at_full_recall", c.stop_at_full_recall);
    r.get("verify", c.verify);
    r.get("first_pass_stride", c.first_pass_stride);
    r.get("planning_uplink_bytes_per_s", c.planning_uplink_bytes_per_s);
    r.get("planning_compute_rate", c.planning_compute_rate);
    r.finish();
  }
  o.finish();
  return c;
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// --- writing --------------------------------------------------------------------

namespace {

json rect_json(const Rect& r) { return {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}; }

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

std::string dump_config(const SimConfig& c) {
  json classes = json::array();
  for (const auto& k : c.trace.synth.classes) {
    json hs = json::array();
    for (const auto& h : k.hotspots)
      hs.push_back({{"x", h.area.x}, {"y", h.area.y}, {"w", h.area.w}, {"h", h.area.h}, {"weight", h.weight},
                    {"jitter_px", h.jitter_px}, {"time_profile", h.time_profile}});
    classes.push_back({{"id", k.class_id},
                       {"occurrence_rate", k.occurrence_rate},
                       {"temporal_profile", k.temporal_profile},
                       {"temporal_bin_s", k.temporal_bin_s},
                       {"object_w", k.object_w},
                       {"object_h", k.object_h},
                       {"count",
                        {{"kind", k.count.kind == CountDistribution::Kind::Geometric ? "geometric" : "poisson"},
                         {"mean", k.count.mean}}},
                       {"hotspots", hs}});
  }
  json ops = json::array();
  for (const auto& op : c.operators) {
    json e = {{"fps", op.fps}, {"sigma", op.sigma}, {"model_bytes", op.model_bytes}};
    if (op.region) e["region"] = rect_json(*op.region);
    ops.push_back(e);
  }
  const auto& cal = c.calibration;
  json root = {
      {"seed", c.seed},
      {"system", c.system},
      {"trace",
       {{"path", c.trace.path},
        {"id", c.trace.synth.id},
        {"seed", c.trace.synth.seed},
        {"fps", c.trace.fps},
        {"duration_s", c.trace.duration_s},
        {"width", c.trace.resolution.width},
        {"height", c.trace.resolution.height},
        {"full_bytes", c.trace.synth.full_bytes},
        {"thumb_bytes", c.trace.synth.thumb_bytes},
        {"difficulty",
         {{"hard_fraction", c.trace.synth.difficulty.hard_fraction},
          {"hard_multiplier", c.trace.synth.difficulty.hard_multiplier},
          {"seed", c.trace.synth.difficulty.seed}}},
        {"classes", classes}}},
      {"camera",
       {{"preset", c.camera.preset},
        {"compute_rate", c.camera.compute_rate},
        {"detector_fps", c.camera.detector_fps}}},
      {"network",
       {{"uplink_bytes_per_s", c.network.uplink_bytes_per_s},
        {"downlink_bytes_per_s", c.network.downlink_bytes_per_s}}},
      {"landmarks",
       {{"interval_frames", c.camera.landmark_interval_frames},
        {"drop_probability", c.corruption.drop_probability},
        {"spurious_rate", c.corruption.spurious_rate},
        {"grid_w", c.knowledge.grid_w},
        {"grid_h", c.knowledge.grid_h},
        {"bin_s", c.knowledge.bin_s},
        {"coverage_levels", c.knowledge.coverage_levels},
        {"exact_point_limit", c.knowledge.exact_point_limit}}},
      {"operators",
       {{"limit", c.family_limit},
        {"grid",
         {{"conv_layers", c.grid.conv_layers},
          {"kernel", c.grid.kernel},
          {"dense", c.grid.dense},
          {"input_px", c.grid.input_px}}},
        {"calibration",
         {{"flops_conv_coeff", cal.flops_conv_coeff},
          {"flops_dense_coeff", cal.flops_dense_coeff},
          {"sigma0", cal.sigma0},
          {"sigma_min_best", cal.sigma_min_best},
          {"sigma_min_worst", cal.sigma_min_worst},
          {"tau_min", cal.tau_min},
          {"tau_max", cal.tau_max},
          {"density_gain_cap", cal.density_gain_cap},
          {"model_bytes_min", cal.model_bytes_min},
          {"model_bytes_max", cal.model_bytes_max},
          {"train_latency_min_s", cal.train_latency_min_s},
          {"train_latency_max_s", cal.train_latency_max_s},
          {"bootstrap_min", cal.bootstrap_min},
          {"tag_message_bytes", cal.tag_message_bytes}}},
        {"explicit", ops}}},
      {"policy",
       {{"alpha", c.policy.alpha},
        {"k_decline", c.policy.k_decline},
        {"beta", c.policy.beta},
        {"window_w", c.policy.window_w},
        {"coverage_p", c.policy.coverage_p},
        {"theta_rankdist", c.policy.theta_rankdist}}},
      {"query",
       {{"type", query_name(c.query.type)},
        {"class", c.query.class_id},
        {"span", {c.query.span.start_s, c.query.span.end_s}},
        {"tolerance", {{"fp", c.query.tolerance.fp}, {"fn", c.query.tolerance.fn}}},
        {"levels", c.query.levels}}},
      {"training",
       {{"retrain_every", c.training.retrain_every},
        {"max_validation", c.training.max_validation},
        {"gamma_window", c.training.gamma_window},
        {"latency_s", opt_json(c.training.latency_s)}}},
      {"index",
       {{"drop_probability", c.index.drop_probability},
        {"spurious_rate", c.index.spurious_rate},
        {"seed", c.index.seed}}},
      {"run",
       {{"abort_time_s", opt_json(c.abort_time_s)},
        {"stop_at_full_recall", c.stop_at_full_recall},
        {"verify", c.verify},
        {"first_pass_stride", c.first_pass_stride},
        {"planning_uplink_bytes_per_s", opt_json(c.planning_uplink_bytes_per_s)},
        {"planning_compute_rate", opt_json(c.planning_compute_rate)}}},
  };
  return root.dump(2);
}

std::uint64_t config_hash(const SimConfig& config) {
  SimConfig c = config;
  c.verify = false;  // checking does not change what is simulated
  return fnv1a64(dump_config(c));
}

// --- validation -----------------------------------------------------------------

void validate(const SimConfig& c) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  const auto& t = c.trace;
  require(t.fps > 0.0, "trace.fps: must be positive");
  require(t.duration_s > 0.0, "trace.duration_s: must be positive");
  require(t.resolution.width > 0 && t.resolution.height > 0, "trace.width/height: must be positive");
  require(t.synth.full_bytes > 0, "trace.full_bytes: must be positive");
  require(t.synth.thumb_bytes > 0 && t.synth.thumb_bytes <= t.synth.full_bytes,
          "trace.thumb_bytes: must be positive and at most full_bytes");
  if (t.path.empty()) {
    try {
      validate(t.synth, t.resolution);
    } catch (const TraceError& e) {
      throw ConfigError(std::string("trace.classes: ") + e.what());
    }
  }
  require(std::find(known_systems().begin(), known_systems().end(), c.system) != known_systems().end(),
          "system: unknown system '" + c.system + "'");
  require(c.camera.compute_rate > 0.0, "camera.compute_rate: must be positive");
  require(c.camera.landmark_interval_frames >= 1, "landmarks.interval_frames: must be at least 1");
  require(c.network.uplink_bytes_per_s > 0.0, "network.uplink_bytes_per_s: must be positive");
  require(c.network.downlink_bytes_per_s > 0.0, "network.downlink_bytes_per_s: must be positive");
  require(c.corruption.drop_probability >= 0.0 && c.corruption.drop_probability <= 1.0,
          "landmarks.drop_probability: must lie in [0, 1]");
  require(c.corruption.spurious_rate >= 0.0, "landmarks.spurious_rate: must be non-negative");
  require(c.knowledge.grid_w >= 1 && c.knowledge.grid_h >= 1, "landmarks.grid_w/grid_h: must be at least 1");
  require(c.knowledge.bin_s > 0.0, "landmarks.bin_s: must be positive");
  for (double p : c.knowledge.coverage_levels)
    require(p > 0.0 && p <= 1.0, "landmarks.coverage_levels: values must lie in (0, 1]");
  require(c.family_limit >= 1, "operators.limit: must be at least 1");
  require(!c.grid.conv_layers.empty() && !c.grid.kernel.empty() && !c.grid.dense.empty() && !c.grid.input_px.empty(),
          "operators.grid: every knob needs at least one value");
  for (std::size_t i = 0; i < c.operators.size(); ++i) {
    const auto& op = c.operators[i];
    const std::string p = "operators.explicit[" + std::to_string(i) + "]";
    require(op.fps > 0.0, p + ".fps: must be positive");
    require(op.sigma >= 0.0, p + ".sigma: must be non-negative");
    require(op.model_bytes > 0, p + ".model_bytes: must be positive");
    if (op.region) require(op.region->inside(t.resolution), p + ".region: must lie inside the frame");
  }
  const auto& cal = c.calibration;
  require(cal.bootstrap_min >= 1, "operators.calibration.bootstrap_min: must be at least 1");
  require(cal.sigma_min_best > 0.0 && cal.sigma_min_best <= cal.sigma_min_worst && cal.sigma_min_worst <= cal.sigma0,
          "operators.calibration: need 0 < sigma_min_best <= sigma_min_worst <= sigma0");
  require(cal.tau_min > 0.0 && cal.tau_min <= cal.tau_max, "operators.calibration: need 0 < tau_min <= tau_max");
  try {
    c.policy.validate();
  } catch (const PolicyError& e) {
    throw ConfigError(e.what());
  }
  const auto& q = c.query;
  require(q.span.start_s >= 0.0 && q.span.end_s > q.span.start_s && q.span.end_s <= t.duration_s + 1e-9,
          "query.span: must satisfy 0 <= start < end <= trace.duration_s");
  require(q.tolerance.fp > 0.0 && q.tolerance.fp < 0.5 && q.tolerance.fn > 0.0 && q.tolerance.fn < 0.5,
          "query.tolerance: rates must lie in (0, 0.5)");
  if (q.type == QueryType::Tagging) {
    require(!q.levels.empty(), "query.levels: must not be empty");
    for (std::size_t i = 0; i < q.levels.size(); ++i) {
      require(q.levels[i] >= 1, "query.levels: group sizes must be positive");
      require(i == 0 || q.levels[i] < q.levels[i - 1], "query.levels: must be strictly decreasing");
    }
  }
  if (t.path.empty()) {
    bool found = false;
    for (const auto& k : t.synth.classes) found |= k.class_id == q.class_id;
    require(found, "query.class: class " + std::to_string(q.class_id) + " is not generated by trace.classes");
  }
  require(c.training.retrain_every >= 1, "training.retrain_every: must be at least 1");
  require(c.training.max_validation >= 1, "training.max_validation: must be at least 1");
  if (c.training.latency_s) require(*c.training.latency_s >= 0.0, "training.latency_s: must be non-negative");
  require(c.index.drop_probability >= 0.0 && c.index.drop_probability <= 1.0,
          "index.drop_probability: must lie in [0, 1]");
  require(c.index.spurious_rate >= 0.0, "index.spurious_rate: must be non-negative");
  if (c.abort_time_s) require(*c.abort_time_s > 0.0, "run.abort_time_s: must be positive");
  require(c.first_pass_stride >= 1, "run.first_pass_stride: must be at least 1");
  if (c.planning_uplink_bytes_per_s)
    require(*c.planning_uplink_bytes_per_s > 0.0, "run.planning_uplink_bytes_per_s: must be positive");
  if (c.planning_compute_rate) require(*c.planning_compute_rate > 0.0, "run.planning_compute_rate: must be positive");
}

Trace materialize_trace(const SimConfig& c) {
  if (!c.trace.path.empty()) return load_trace(std::filesystem::path(c.trace.path));
  return generate_trace(c.trace.synth, c.trace.fps, c.trace.duration_s, c.trace.resolution);
}

}  // namespace zc
