#include "zc/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "zc/rng.hpp"
#include "zc/text.hpp"

namespace zc {

int FrameRecord::count(int class_id) const {
  return static_cast<int>(std::count_if(detections.begin(), detections.end(),
                                        [class_id](const Detection& d) { return d.class_id == class_id; }));
}

double DifficultyProfile::hardness(std::int64_t index) const {
  if (hard_fraction <= 0.0) return 1.0 / hard_multiplier;
  SplitMix64 rng(hash_keys(seed, 0x4841524455ULL, index));
  return rng.uniform() < hard_fraction ? 1.0 : 1.0 / hard_multiplier;
}

std::int64_t dense_frame_count(double fps, double duration_s) {
  return static_cast<std::int64_t>(std::ceil(fps * duration_s - 1e-9));
}

FrameRange Trace::frames_in(const Span& span) const {
  const auto n = frame_count();
  auto to_frame = [&](double t) {
    auto f = static_cast<std::int64_t>(std::ceil(t * fps - 1e-9));
    return std::clamp<std::int64_t>(f, 0, n);
  };
  FrameRange r{to_frame(span.start_s), to_frame(span.end_s)};
  if (r.last < r.first) r.last = r.first;
  return r;
}

bool Trace::has_class(int class_id) const {
  return std::find(classes.begin(), classes.end(), class_id) != classes.end();
}

// --- generation ---------------------------------------------------------------

namespace {

std::vector<double> normalized_profile(const std::vector<double>& profile) {
  if (profile.empty()) return {1.0};
  const double mean = std::accumulate(profile.begin(), profile.end(), 0.0) / static_cast<double>(profile.size());
  std::vector<double> out(profile.size(), 1.0);
  if (mean <= 0.0) return out;
  for (std::size_t i = 0; i < profile.size(); ++i) out[i] = profile[i] / mean;
  return out;
}

std::size_t bin_of(double t, double bin_s, std::size_t bins) {
  if (bins <= 1 || bin_s <= 0.0) return 0;
  return static_cast<std::size_t>(std::floor(t / bin_s)) % bins;
}

int instances(const CountDistribution& dist, SplitMix64& rng) {
  const double extra = std::max(0.0, dist.mean - 1.0);
  if (extra <= 0.0) return 1;
  switch (dist.kind) {
    case CountDistribution::Kind::Geometric:
      return 1 + static_cast<int>(rng.geometric(1.0 / (1.0 + extra)));
    case CountDistribution::Kind::Poisson:
      return 1 + static_cast<int>(rng.poisson(extra));
  }
  return 1;
}

Detection place(const ClassParams& cls, const Hotspot& hs, const Resolution& res, SplitMix64& rng) {
  double cx = hs.area.x + static_cast<double>(rng.below(static_cast<std::uint64_t>(hs.area.w)));
  double cy = hs.area.y + static_cast<double>(rng.below(static_cast<std::uint64_t>(hs.area.h)));
  if (hs.jitter_px > 0.0) {
    cx += std::round(rng.normal() * hs.jitter_px);
    cy += std::round(rng.normal() * hs.jitter_px);
  }
  const int px = static_cast<int>(std::clamp(cx, 0.0, res.width - 1.0));
  const int py = static_cast<int>(std::clamp(cy, 0.0, res.height - 1.0));
  // Shrink the box symmetrically at frame borders so its center stays at the
  // sampled pixel.
  const int hw = std::min({cls.object_w / 2, px, res.width - 1 - px});
  const int hh = std::min({cls.object_h / 2, py, res.height - 1 - py});
  return Detection{cls.class_id, Rect{px - hw, py - hh, 2 * hw + 1, 2 * hh + 1}};
}

}  // namespace

void validate(const SynthParams& params, const Resolution& resolution) {
  if (resolution.width <= 0 || resolution.height <= 0) throw TraceError("resolution must be positive");
  if (params.full_bytes <= 0 || params.thumb_bytes <= 0 || params.thumb_bytes > params.full_bytes)
    throw TraceError("frame sizes must satisfy 0 < thumb_bytes <= full_bytes");
  if (params.difficulty.hard_fraction < 0.0 || params.difficulty.hard_fraction > 1.0)
    throw TraceError("hard_fraction must lie in [0,1]");
  if (params.difficulty.hard_multiplier < 1.0) throw TraceError("hard_multiplier must be >= 1");
  for (const auto& cls : params.classes) {
    const std::string who = "class " + std::to_string(cls.class_id) + ": ";
    if (cls.occurrence_rate < 0.0 || cls.occurrence_rate > 1.0)
      throw TraceError(who + "occurrence rate must lie in [0,1]");
    if (cls.occurrence_rate > 0.0 && cls.hotspots.empty()) throw TraceError(who + "needs at least one hotspot");
    double total = 0.0;
    for (const auto& hs : cls.hotspots) {
      if (!hs.area.inside(resolution)) throw TraceError(who + "hotspot outside frame");
      if (hs.weight < 0.0 || hs.jitter_px < 0.0) throw TraceError(who + "negative hotspot weight or jitter");
      total += hs.weight;
    }
    if (!cls.hotspots.empty() && std::abs(total - 1.0) > 1e-6) throw TraceError(who + "hotspot weights must sum to 1");
    if (cls.count.mean < 1.0) throw TraceError(who + "count mean must be >= 1");
    for (double m : cls.temporal_profile)
      if (m < 0.0) throw TraceError(who + "negative temporal multiplier");
    if (cls.object_w < 1 || cls.object_h < 1) throw TraceError(who + "object size must be positive");
  }
}

Trace generate_trace(const SynthParams& params, double fps, double duration_s, const Resolution& resolution) {
  if (fps <= 0.0 || duration_s <= 0.0) throw TraceError("fps and duration must be positive");
  validate(params, resolution);

  Trace trace;
  trace.id = params.id;
  trace.fps = fps;
  trace.duration_s = duration_s;
  trace.resolution = resolution;
  trace.difficulty = params.difficulty;
  for (const auto& cls : params.classes) trace.classes.push_back(cls.class_id);
  std::sort(trace.classes.begin(), trace.classes.end());
  trace.classes.erase(std::unique(trace.classes.begin(), trace.classes.end()), trace.classes.end());

  std::vector<std::vector<double>> rate_profiles;
  for (const auto& cls : params.classes) rate_profiles.push_back(normalized_profile(cls.temporal_profile));

  const std::int64_t n = dense_frame_count(fps, duration_s);
  trace.frames.resize(static_cast<std::size_t>(n));
  std::vector<double> weights;
  for (std::int64_t i = 0; i < n; ++i) {
    auto& fr = trace.frames[static_cast<std::size_t>(i)];
    fr.index = i;
    fr.timestamp_s = static_cast<double>(i) / fps;
    fr.full_bytes = params.full_bytes;
    fr.thumb_bytes = params.thumb_bytes;
    for (std::size_t c = 0; c < params.classes.size(); ++c) {
      const auto& cls = params.classes[c];
      if (cls.occurrence_rate <= 0.0) continue;
      SplitMix64 rng(hash_keys(params.seed, i, cls.class_id));
      const auto& prof = rate_profiles[c];
      const std::size_t bin = bin_of(fr.timestamp_s, cls.temporal_bin_s, prof.size());
      const double p = std::min(1.0, cls.occurrence_rate * prof[bin]);
      if (!rng.bernoulli(p)) continue;

      weights.clear();
      double total = 0.0;
      for (const auto& hs : cls.hotspots) {
        double w = hs.weight;
        if (!hs.time_profile.empty())
          w *= hs.time_profile[bin_of(fr.timestamp_s, cls.temporal_bin_s, hs.time_profile.size())];
        weights.push_back(w);
        total += w;
      }
      const int k = instances(cls.count, rng);
      for (int j = 0; j < k; ++j) {
        std::size_t pick = 0;
        if (total > 0.0) {
          double u = rng.uniform() * total;
          while (pick + 1 < weights.size() && u >= weights[pick]) u -= weights[pick++];
        }
        fr.detections.push_back(place(cls, cls.hotspots[pick], resolution, rng));
      }
    }
  }
  return trace;
}

// --- file format --------------------------------------------------------------

void save_trace(const Trace& trace, std::ostream& out) {
  const std::int64_t full = trace.frames.empty() ? 60000 : trace.frames.front().full_bytes;
  const std::int64_t thumb = trace.frames.empty() ? 6000 : trace.frames.front().thumb_bytes;
  out << "#trace id=" << trace.id << " fps=" << format_double(trace.fps) << " dur=" << format_double(trace.duration_s)
      << " w=" << trace.resolution.width << " h=" << trace.resolution.height << " full=" << full << " thumb=" << thumb
      << " classes=";
  for (std::size_t i = 0; i < trace.classes.size(); ++i) out << (i ? ";" : "") << trace.classes[i];
  out << " hard=" << format_double(trace.difficulty.hard_fraction)
      << " hmul=" << format_double(trace.difficulty.hard_multiplier) << " dseed=" << trace.difficulty.seed << '\n';
  for (const auto& fr : trace.frames)
    for (const auto& d : fr.detections)
      out << fr.index << ',' << d.class_id << ',' << d.bbox.x << ',' << d.bbox.y << ',' << d.bbox.w << ','
          << d.bbox.h << '\n';
}

void save_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError("cannot write " + path.string());
  save_trace(trace, out);
  if (!out) throw TraceError("write failed: " + path.string());
}

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw TraceError("line " + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_number(std::string_view s, std::size_t line, const char* field) {
  T v{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) parse_fail(line, std::string("bad ") + field + " '" + std::string(s) + "'");
  return v;
}

}  // namespace

Trace load_trace(std::istream& in) {
  std::string text;
  std::size_t line_no = 0;
  if (!std::getline(in, text)) throw TraceError("empty trace file");
  ++line_no;
  if (text.rfind("#trace", 0) != 0) parse_fail(line_no, "missing '#trace' header");

  std::map<std::string, std::string, std::less<>> kv;
  for (const auto& tok : split(std::string_view(text).substr(6), ' ')) {
    if (tok.empty()) continue;
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) parse_fail(line_no, "header token without '=': " + std::string(tok));
    kv[std::string(tok.substr(0, eq))] = std::string(tok.substr(eq + 1));
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) parse_fail(1, std::string("header missing ") + key);
    return it->second;
  };

  Trace trace;
  trace.id = need("id");
  trace.fps = parse_number<double>(need("fps"), 1, "fps");
  trace.duration_s = parse_number<double>(need("dur"), 1, "dur");
  trace.resolution.width = parse_number<int>(need("w"), 1, "w");
  trace.resolution.height = parse_number<int>(need("h"), 1, "h");
  const auto full = parse_number<std::int64_t>(need("full"), 1, "full");
  const auto thumb = parse_number<std::int64_t>(need("thumb"), 1, "thumb");
  if (trace.fps <= 0.0 || trace.duration_s <= 0.0) parse_fail(1, "fps and dur must be positive");
  if (thumb > full || thumb <= 0) parse_fail(1, "thumb must be in (0, full]");
  if (auto it = kv.find("classes"); it != kv.end() && !it->second.empty())
    for (const auto& c : split(it->second, ';')) trace.classes.push_back(parse_number<int>(c, 1, "class"));
  if (auto it = kv.find("hard"); it != kv.end())
    trace.difficulty.hard_fraction = parse_number<double>(it->second, 1, "hard");
  if (auto it = kv.find("hmul"); it != kv.end())
    trace.difficulty.hard_multiplier = parse_number<double>(it->second, 1, "hmul");
  if (auto it = kv.find("dseed"); it != kv.end())
    trace.difficulty.seed = parse_number<std::uint64_t>(it->second, 1, "dseed");

  const std::int64_t n = dense_frame_count(trace.fps, trace.duration_s);
  trace.frames.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    auto& fr = trace.frames[static_cast<std::size_t>(i)];
    fr.index = i;
    fr.timestamp_s = static_cast<double>(i) / trace.fps;
    fr.full_bytes = full;
    fr.thumb_bytes = thumb;
  }

  const bool declared_classes = !trace.classes.empty();
  std::int64_t current = -1;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    const auto fields = split(text, ',');
    if (fields.size() != 6) parse_fail(line_no, "expected 6 comma-separated fields");
    const auto idx = parse_number<std::int64_t>(fields[0], line_no, "frame_index");
    if (idx < 0 || idx >= n)
      parse_fail(line_no, "frame index " + std::to_string(idx) + " outside [0, " + std::to_string(n) + ")");
    if (idx != current) {
      if (seen[static_cast<std::size_t>(idx)]) parse_fail(line_no, "duplicate frame index " + std::to_string(idx));
      if (idx < current) parse_fail(line_no, "frame index " + std::to_string(idx) + " out of order");
      seen[static_cast<std::size_t>(idx)] = true;
      current = idx;
    }
    Detection d;
    d.class_id = parse_number<int>(fields[1], line_no, "class_id");
    d.bbox.x = parse_number<int>(fields[2], line_no, "x");
    d.bbox.y = parse_number<int>(fields[3], line_no, "y");
    d.bbox.w = parse_number<int>(fields[4], line_no, "w");
    d.bbox.h = parse_number<int>(fields[5], line_no, "h");
    if (!d.bbox.inside(trace.resolution)) parse_fail(line_no, "bounding box outside frame");
    if (declared_classes && !trace.has_class(d.class_id))
      parse_fail(line_no, "class " + std::to_string(d.class_id) + " not declared in header");
    if (!declared_classes && !trace.has_class(d.class_id)) trace.classes.push_back(d.class_id);
    trace.frames[static_cast<std::size_t>(idx)].detections.push_back(d);
  }
  std::sort(trace.classes.begin(), trace.classes.end());
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open " + path.string());
  return load_trace(in);
}

// --- statistics ---------------------------------------------------------------

double median_of(std::vector<int> values) {
  if (values.empty()) return 0.0;
  const auto n = values.size();
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n / 2), values.end());
  const double upper = values[n / 2];
  if (n % 2 == 1) return upper;
  const int lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n / 2));
  return (lower + upper) / 2.0;
}

GroundTruthStats ground_truth_stats(const Trace& trace, int class_id, const Span& span) {
  const auto range = trace.frames_in(span);
  if (span.end_s <= span.start_s || range.size() <= 0) throw TraceError("empty span");
  if (span.start_s < 0.0 || span.end_s > trace.duration_s + 1e-9) throw TraceError("span outside trace");

  GroundTruthStats st;
  st.per_frame_counts.reserve(static_cast<std::size_t>(range.size()));
  std::int64_t positives = 0;
  std::int64_t total = 0;
  for (auto i = range.first; i < range.last; ++i) {
    const int c = trace.frame(i).count(class_id);
    st.per_frame_counts.push_back(c);
    positives += c > 0;
    total += c;
    st.max_count = std::max(st.max_count, c);
  }
  const auto n = static_cast<double>(range.size());
  st.pos_ratio = static_cast<double>(positives) / n;
  st.avg_count = static_cast<double>(total) / n;
  st.median_count = median_of(st.per_frame_counts);
  return st;
}

}  // namespace zc
