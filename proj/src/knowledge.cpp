#include "zc/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "zc/rng.hpp"

namespace zc {

int Landmark::count(int class_id) const {
  return static_cast<int>(std::count_if(detections.begin(), detections.end(),
                                        [class_id](const Detection& d) { return d.class_id == class_id; }));
}

std::vector<Landmark> sample_landmarks(const Trace& trace, const Span& span, int interval_frames) {
  if (interval_frames < 1) throw KnowledgeError("landmark interval must be >= 1");
  const auto range = trace.frames_in(span);
  if (range.size() <= 0) throw KnowledgeError("empty span");
  std::vector<Landmark> out;
  out.reserve(static_cast<std::size_t>((range.size() + interval_frames - 1) / interval_frames));
  for (auto i = range.first; i < range.last; i += interval_frames) {
    const auto& fr = trace.frame(i);
    out.push_back(Landmark{i, fr.detections, fr.thumb_bytes});
  }
  return out;
}

std::vector<Landmark> corrupt_landmarks(std::span<const Landmark> landmarks, const LandmarkCorruption& corruption,
                                        const Trace& trace, int object_w, int object_h) {
  std::vector<Landmark> out(landmarks.begin(), landmarks.end());
  if (!corruption.active()) return out;
  const auto& res = trace.resolution;
  for (auto& lm : out) {
    SplitMix64 rng(hash_keys(corruption.seed, 0x4c4d4bULL, lm.frame_index));
    std::vector<Detection> kept;
    for (const auto& d : lm.detections)
      if (!rng.bernoulli(corruption.drop_probability)) kept.push_back(d);
    const auto spurious = rng.poisson(corruption.spurious_rate);
    for (std::int64_t s = 0; s < spurious && !trace.classes.empty(); ++s) {
      const int cls = trace.classes[static_cast<std::size_t>(rng.below(trace.classes.size()))];
      const int w = std::min(object_w, res.width);
      const int h = std::min(object_h, res.height);
      const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(res.width - w + 1)));
      const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(res.height - h + 1)));
      kept.push_back(Detection{cls, Rect{x, y, w, h}});
    }
    lm.detections = std::move(kept);
  }
  return out;
}

// --- heatmap ------------------------------------------------------------------

std::int64_t Heatmap::total() const { return std::accumulate(cells.begin(), cells.end(), std::int64_t{0}); }

std::vector<double> Heatmap::normalized() const {
  std::vector<double> out(cells.size(), 0.0);
  const auto t = total();
  if (t == 0) return out;
  for (std::size_t i = 0; i < cells.size(); ++i) out[i] = static_cast<double>(cells[i]) / static_cast<double>(t);
  return out;
}

Rect Heatmap::cell_rect(int cx0, int cy0, int cx1, int cy1, const Resolution& res) const {
  const int x0 = static_cast<int>(std::floor(cx0 * cell_w));
  const int y0 = static_cast<int>(std::floor(cy0 * cell_h));
  const int x1 = std::min(res.width, static_cast<int>(std::ceil((cx1 + 1) * cell_w)));
  const int y1 = std::min(res.height, static_cast<int>(std::ceil((cy1 + 1) * cell_h)));
  return Rect{x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)};
}

Heatmap build_heatmap(std::span<const Landmark> landmarks, int class_id, int grid_w, int grid_h,
                      const Resolution& resolution) {
  if (grid_w < 1 || grid_h < 1) throw KnowledgeError("heatmap grid must be at least 1x1");
  Heatmap hm;
  hm.class_id = class_id;
  hm.grid_w = grid_w;
  hm.grid_h = grid_h;
  hm.cell_w = static_cast<double>(resolution.width) / grid_w;
  hm.cell_h = static_cast<double>(resolution.height) / grid_h;
  hm.cells.assign(static_cast<std::size_t>(grid_w) * grid_h, 0);
  for (const auto& lm : landmarks) {
    for (const auto& d : lm.detections) {
      if (d.class_id != class_id) continue;
      const int cx = std::clamp(static_cast<int>(d.bbox.center_x() / hm.cell_w), 0, grid_w - 1);
      const int cy = std::clamp(static_cast<int>(d.bbox.center_y() / hm.cell_h), 0, grid_h - 1);
      ++hm.cells[static_cast<std::size_t>(cy) * grid_w + cx];
    }
  }
  return hm;
}

double top_area_mass(const Heatmap& heatmap, double area_fraction) {
  const auto total = heatmap.total();
  if (total == 0) return 0.0;
  std::vector<std::int64_t> sorted = heatmap.cells;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto limit = static_cast<std::size_t>(std::floor(area_fraction * static_cast<double>(sorted.size()) + 1e-9));
  std::int64_t mass = 0;
  for (std::size_t i = 0; i < limit && i < sorted.size(); ++i) mass += sorted[i];
  return static_cast<double>(mass) / static_cast<double>(total);
}

double total_variation(const Heatmap& a, const Heatmap& b) {
  if (a.cells.size() != b.cells.size()) throw KnowledgeError("heatmap grids differ");
  const auto pa = a.normalized();
  const auto pb = b.normalized();
  double tv = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) tv += std::abs(pa[i] - pb[i]);
  return tv / 2.0;
}

// --- k-enclosing --------------------------------------------------------------

Rect Enclosing::rect() const { return Rect{x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)}; }

std::int64_t required_coverage(std::int64_t total, double coverage_p) {
  const auto k = static_cast<std::int64_t>(std::ceil(coverage_p * static_cast<double>(total) - 1e-9));
  return std::clamp<std::int64_t>(k, 1, total);
}

Enclosing k_enclosing_search(std::span<const WeightedPoint> points, double coverage_p) {
  if (points.empty()) throw KnowledgeError("k-enclosing needs at least one point");
  if (!(coverage_p > 0.0 && coverage_p <= 1.0)) throw KnowledgeError("coverage must lie in (0,1]");

  std::vector<int> xs, ys;
  std::int64_t total = 0;
  for (const auto& p : points) {
    if (p.weight < 0) throw KnowledgeError("negative point weight");
    xs.push_back(p.x);
    ys.push_back(p.y);
    total += p.weight;
  }
  if (total == 0) throw KnowledgeError("k-enclosing needs positive total weight");
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  const std::size_t mx = xs.size(), my = ys.size();

  // Coordinate-compressed weight grid, column-major by x.
  std::vector<std::int64_t> grid(mx * my, 0);
  for (const auto& p : points) {
    const auto ix = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), p.x) - xs.begin());
    const auto iy = static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), p.y) - ys.begin());
    grid[ix * my + iy] += p.weight;
  }

  const std::int64_t k = required_coverage(total, coverage_p);
  Enclosing best;
  bool found = false;
  auto better = [&](const Enclosing& c) {
    if (!found) return true;
    return std::tie(c.area, c.x0, c.y0, c.x1, c.y1) < std::tie(best.area, best.x0, best.y0, best.x1, best.y1);
  };

  std::vector<std::int64_t> rows(my);
  for (std::size_t xl = 0; xl < mx; ++xl) {
    std::fill(rows.begin(), rows.end(), 0);
    std::int64_t strip = 0;
    for (std::size_t xh = xl; xh < mx; ++xh) {
      for (std::size_t iy = 0; iy < my; ++iy) {
        rows[iy] += grid[xh * my + iy];
        strip += grid[xh * my + iy];
      }
      if (strip < k) continue;
      const std::int64_t width = static_cast<std::int64_t>(xs[xh]) - xs[xl];
      // Minimal y-window per lower edge; the upper edge only moves forward.
      std::size_t hi = 0;
      std::int64_t window = 0;
      for (std::size_t lo = 0; lo < my; ++lo) {
        if (hi < lo) {
          hi = lo;
          window = 0;
        }
        while (window < k && hi < my) window += rows[hi++];
        if (window < k) break;
        const std::size_t top = hi - 1;
        Enclosing c{xs[xl], ys[lo], xs[xh], ys[top], width * (static_cast<std::int64_t>(ys[top]) - ys[lo]), window, k};
        if (better(c)) {
          best = c;
          found = true;
        }
        window -= rows[lo];
      }
    }
  }
  return best;
}

Rect k_enclosing_region(std::span<const Point> points, double coverage_p) {
  std::vector<WeightedPoint> wp;
  wp.reserve(points.size());
  for (const auto& p : points) wp.push_back({p.x, p.y, 1});
  return k_enclosing_search(wp, coverage_p).rect();
}

// --- temporal -----------------------------------------------------------------

TemporalDensity temporal_density(std::span<const Landmark> landmarks, int class_id, double bin_s, const Span& span,
                                 double fps) {
  if (bin_s <= 0.0) throw KnowledgeError("bin length must be positive");
  TemporalDensity td;
  td.class_id = class_id;
  td.bin_s = bin_s;
  const auto nbins = static_cast<std::size_t>(std::max(1.0, std::ceil(span.length() / bin_s - 1e-9)));
  td.bins.assign(nbins, 0);
  td.landmarks.assign(nbins, 0);
  for (const auto& lm : landmarks) {
    const double t = static_cast<double>(lm.frame_index) / fps - span.start_s;
    if (t < 0.0) continue;
    const auto b = std::min(nbins - 1, static_cast<std::size_t>(t / bin_s));
    ++td.landmarks[b];
    if (lm.contains(class_id)) ++td.bins[b];
  }
  return td;
}

double estimate_pos_ratio(std::span<const Landmark> landmarks, int class_id) {
  if (landmarks.empty()) throw KnowledgeError("no landmarks");
  const auto pos = std::count_if(landmarks.begin(), landmarks.end(),
                                 [class_id](const Landmark& lm) { return lm.contains(class_id); });
  return static_cast<double>(pos) / static_cast<double>(landmarks.size());
}

// --- summary ------------------------------------------------------------------

Rect crop_region(std::span<const Landmark> landmarks, int class_id, double coverage_p, const Heatmap& heatmap,
                 const Resolution& resolution, std::size_t exact_point_limit) {
  std::set<std::pair<int, int>> distinct;
  std::vector<WeightedPoint> centers;
  for (const auto& lm : landmarks)
    for (const auto& d : lm.detections)
      if (d.class_id == class_id) {
        const int x = static_cast<int>(std::floor(d.bbox.center_x()));
        const int y = static_cast<int>(std::floor(d.bbox.center_y()));
        centers.push_back({x, y, 1});
        distinct.insert({x, y});
      }
  if (centers.empty()) return Rect{0, 0, resolution.width, resolution.height};

  if (distinct.size() <= exact_point_limit) {
    const auto e = k_enclosing_search(centers, coverage_p);
    // Pixel-inclusive so every covered center (floored) lies inside.
    return Rect{e.x0, e.y0, e.x1 - e.x0 + 1, e.y1 - e.y0 + 1};
  }
  std::vector<WeightedPoint> cells;
  for (int cy = 0; cy < heatmap.grid_h; ++cy)
    for (int cx = 0; cx < heatmap.grid_w; ++cx)
      if (heatmap.at(cx, cy) > 0) cells.push_back({cx, cy, heatmap.at(cx, cy)});
  const auto e = k_enclosing_search(cells, coverage_p);
  return heatmap.cell_rect(e.x0, e.y0, e.x1, e.y1, resolution);
}

KnowledgeSummary build_knowledge(std::vector<Landmark> landmarks, int class_id, const Trace& trace, const Span& span,
                                 const KnowledgeOptions& options) {
  KnowledgeSummary ks;
  ks.class_id = class_id;
  ks.heatmap = build_heatmap(landmarks, class_id, options.grid_w, options.grid_h, trace.resolution);
  ks.density = temporal_density(landmarks, class_id, options.bin_s, span, trace.fps);
  ks.r_pos = estimate_pos_ratio(landmarks, class_id);
  for (double p : options.coverage_levels)
    ks.crop_regions[p] =
        crop_region(landmarks, class_id, p, ks.heatmap, trace.resolution, options.exact_point_limit);
  ks.landmarks = std::move(landmarks);
  return ks;
}

void write_heatmap_csv(const Heatmap& heatmap, std::ostream& out) {
  out << "cell_x,cell_y,count\n";
  for (int cy = 0; cy < heatmap.grid_h; ++cy)
    for (int cx = 0; cx < heatmap.grid_w; ++cx) out << cx << ',' << cy << ',' << heatmap.at(cx, cy) << '\n';
}

void write_density_csv(const TemporalDensity& density, std::ostream& out) {
  out << "bin,count\n";
  for (std::size_t b = 0; b < density.bins.size(); ++b) out << b << ',' << density.bins[b] << '\n';
}

}  // namespace zc
