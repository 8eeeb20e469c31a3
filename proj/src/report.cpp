#include "zc/report.hpp"

#include <algorithm>
#include <fstream>
#include <future>

#include "zc/cloud_policies.hpp"
#include "zc/executor.hpp"
#include "zc/text.hpp"

namespace zc {

std::string csv_header(const SimConfig& config) {
  return "# config_hash=" + hex64(config_hash(config)) + " seed=" + std::to_string(config.seed) + "\n";
}

std::map<std::string, double> milestones(const SimConfig& config, const Trace& trace, const SimResult& result) {
  std::map<std::string, double> m;
  const QueryProgress p = materialize(config.query, result, trace);
  switch (config.query.type) {
    case QueryType::Retrieval:
      for (auto [name, frac] : {std::pair{"t50", 0.5}, {"t90", 0.9}, {"t99", 0.99}, {"t100", 1.0}})
        if (auto t = time_to_recall(p, frac)) m[name] = *t;
      break;
    case QueryType::Tagging:
      for (const auto& [k, t] : p.level_done_s) m["level_" + std::to_string(k) + "_s"] = t;
      break;
    case QueryType::MaxCount:
      for (const auto& [t, v] : p.running_max)
        if (v >= p.truth) {
          m["t_true_max"] = t;
          break;
        }
      break;
    case QueryType::AvgCount:
    case QueryType::MedianCount:
      if (auto t = convergence_time(p, 0.01)) m["converge_1pct_s"] = *t;
      break;
  }
  return m;
}

namespace {

SummaryRow row(std::string metric, double v, std::string unit) {
  return {std::move(metric), format_double(v), std::move(unit)};
}

}  // namespace

std::vector<SummaryRow> summarize(const SimConfig& config, const Trace& trace, const SimResult& r) {
  std::vector<SummaryRow> rows;
  rows.push_back({"system", r.system, ""});
  rows.push_back({"query", query_name(config.query.type), ""});
  const FrameRange span = trace.frames_in(config.query.span);
  rows.push_back(row("span_frames", static_cast<double>(span.size()), "frames"));
  for (const auto& [k, v] : milestones(config, trace, r)) rows.push_back(row(k, v, "s"));

  const QueryProgress p = materialize(config.query, r, trace);
  switch (config.query.type) {
    case QueryType::Retrieval:
      rows.push_back(row("positives_total", static_cast<double>(p.total_positives), "frames"));
      rows.push_back(row("positives_found", static_cast<double>(r.answer.positives.size()), "frames"));
      break;
    case QueryType::Tagging: {
      std::int64_t cam = 0, cam_fp = 0, cam_fn = 0, cam_neg = 0, cam_pos = 0;
      for (std::size_t i = 0; i < r.answer.tags.size(); ++i) {
        if (!r.answer.tag_from_camera[i]) continue;
        ++cam;
        const bool truth = trace.frame(span.first + static_cast<std::int64_t>(i)).contains(config.query.class_id);
        const Tag t = r.answer.tags[i];
        (truth ? cam_pos : cam_neg) += 1;
        if (t == Tag::Positive && !truth) ++cam_fp;
        if (t == Tag::Negative && truth) ++cam_fn;
      }
      rows.push_back(row("camera_tagged", static_cast<double>(cam), "frames"));
      rows.push_back(row("camera_fp_rate", cam_neg ? static_cast<double>(cam_fp) / cam_neg : 0.0, "ratio"));
      rows.push_back(row("camera_fn_rate", cam_pos ? static_cast<double>(cam_fn) / cam_pos : 0.0, "ratio"));
      break;
    }
    case QueryType::MaxCount:
      rows.push_back(row("true_max", p.truth, "objects"));
      rows.push_back(row("final_max", r.answer.max_count, "objects"));
      break;
    case QueryType::AvgCount:
    case QueryType::MedianCount:
      rows.push_back(row("truth", p.truth, "objects"));
      rows.push_back(row("final_estimate", p.estimate.empty() ? 0.0 : p.estimate.back().second, "objects"));
      break;
  }

  rows.push_back(row("end_time_s", r.end_time_s, "s"));
  rows.push_back(row("bytes_uplink", static_cast<double>(r.bytes_uplink), "bytes"));
  rows.push_back(row("bytes_downlink", static_cast<double>(r.bytes_downlink), "bytes"));
  rows.push_back(row("landmark_bytes", static_cast<double>(r.traffic.landmark_bytes), "bytes"));
  rows.push_back(row("frame_bytes", static_cast<double>(r.traffic.frame_bytes), "bytes"));
  rows.push_back(row("tag_bytes", static_cast<double>(r.traffic.tag_bytes), "bytes"));
  rows.push_back(row("frames_uploaded", static_cast<double>(r.traffic.frames), "frames"));
  rows.push_back(row("frames_scored", static_cast<double>(r.frames_scored), "frames"));

  // All-streaming would have shipped every frame of the trace at full size.
  double streaming = 0.0;
  for (const auto& f : trace.frames) streaming += static_cast<double>(f.full_bytes);
  rows.push_back(row("streaming_bytes", streaming, "bytes"));
  rows.push_back(row("traffic_savings", r.bytes_uplink ? streaming / static_cast<double>(r.bytes_uplink) : 0.0, "x"));

  std::string sw;
  for (std::size_t i = 0; i < r.operator_switches.size(); ++i)
    sw += (i ? ";" : "") + std::to_string(r.operator_switches[i]);
  rows.push_back({"operator_switches", sw, "ids"});
  return rows;
}

void write_summary_csv(const SimConfig& config, const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << csv_header(config) << "metric,value,unit\n";
  for (const auto& r : rows) out << r.metric << ',' << r.value << ',' << r.unit << '\n';
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

}  // namespace

void write_run_outputs(const SimConfig& config, const Trace& trace, const SimResult& result,
                       const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string h = csv_header(config);
  {
    auto f = open_out(dir / "events.csv");
    f << h;
    write_events_csv(result.events, f);
  }
  {
    auto f = open_out(dir / "progress.csv");
    f << h;
    write_progress_csv(result.progress, f);
  }
  {
    auto f = open_out(dir / "decisions.csv");
    f << h;
    write_decisions_csv(result.decisions, f);
  }
  auto f = open_out(dir / "summary.csv");
  write_summary_csv(config, summarize(config, trace, result), f);
}

Comparison compare(const SimConfig& config, const Trace& trace, const std::vector<std::string>& systems) {
  Comparison c;
  for (const auto& s : systems) {
    SimConfig sc = config;
    sc.system = s;
    c.results.push_back(run(sc, trace));
    c.milestones.push_back(milestones(sc, trace, c.results.back()));
  }
  return c;
}

void write_compare_csv(const SimConfig& config, const Comparison& cmp, std::ostream& out) {
  out << csv_header(config) << "system,time_s,metric,value\n";
  for (const auto& r : cmp.results)
    for (const auto& p : r.progress)
      out << r.system << ',' << format_double(p.time_s) << ',' << p.metric << ',' << format_double(p.value) << '\n';
}

void write_speedup_csv(const SimConfig& config, const Comparison& cmp, std::ostream& out) {
  out << csv_header(config) << "milestone";
  for (const auto& r : cmp.results) out << ',' << r.system;
  out << '\n';
  if (cmp.results.empty()) return;
  std::size_t ref = 0;
  for (std::size_t i = 0; i < cmp.results.size(); ++i)
    if (cmp.results[i].system == "zc2") ref = i;
  std::vector<std::string> names;
  for (const auto& m : cmp.milestones)
    for (const auto& [k, v] : m)
      if (std::find(names.begin(), names.end(), k) == names.end()) names.push_back(k);
  std::sort(names.begin(), names.end());
  for (const auto& name : names) {
    out << name;
    const auto base = cmp.milestones[ref].find(name);
    for (const auto& m : cmp.milestones) {
      out << ',';
      auto it = m.find(name);
      if (it == m.end() || base == cmp.milestones[ref].end() || base->second <= 0.0) continue;
      out << format_double(it->second / base->second);
    }
    out << '\n';
  }
}

const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes{"uplink_bandwidth",    "camera_compute", "landmark_interval",
                                             "landmark_corruption", "alpha",          "beta"};
  return axes;
}

SimConfig apply_axis(const SimConfig& config, const std::string& axis, double value) {
  SimConfig c = config;
  if (axis == "uplink_bandwidth")
    c.network.uplink_bytes_per_s = value;
  else if (axis == "camera_compute")
    c.camera.compute_rate = value;
  else if (axis == "landmark_interval")
    c.camera.landmark_interval_frames = static_cast<int>(value);
  else if (axis == "landmark_corruption") {
    c.corruption.drop_probability = value;
    c.corruption.spurious_rate = 0.1 * value;
  } else if (axis == "alpha")
    c.policy.alpha = value;
  else if (axis == "beta")
    c.policy.beta = value;
  else
    throw ConfigError("axis: unknown sweep axis '" + axis + "'");
  return c;
}

std::vector<SweepPoint> sweep(const SimConfig& config, const std::string& axis, const std::vector<double>& values) {
  const bool resource = axis == "uplink_bandwidth" || axis == "camera_compute";
  struct Member {
    double value;
    std::string variant;
    SimConfig cfg;
  };
  std::vector<Member> members;
  for (double v : values) {
    SimConfig c = apply_axis(config, axis, v);
    validate(c);
    members.push_back({v, "adaptive", c});
    if (resource) {
      SimConfig frozen = c;
      frozen.planning_uplink_bytes_per_s = config.network.uplink_bytes_per_s;
      frozen.planning_compute_rate = config.camera.compute_rate;
      members.push_back({v, "frozen", frozen});
    }
  }
  const Trace trace = materialize_trace(config);
  std::vector<std::future<SweepPoint>> jobs;
  for (const auto& m : members)
    jobs.push_back(std::async(std::launch::async, [&trace, &m] {
      const SimResult r = run(m.cfg, trace);
      return SweepPoint{m.value, m.variant, summarize(m.cfg, trace, r), milestones(m.cfg, trace, r)};
    }));
  std::vector<SweepPoint> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

void write_sweep_csv(const SimConfig& config, const std::string& axis, const std::vector<SweepPoint>& points,
                     std::ostream& out) {
  out << csv_header(config) << "axis,axis_value,variant,metric,value,unit\n";
  for (const auto& p : points)
    for (const auto& r : p.summary)
      out << axis << ',' << format_double(p.value) << ',' << p.variant << ',' << r.metric << ',' << r.value << ','
          << r.unit << '\n';
}

}  // namespace zc
