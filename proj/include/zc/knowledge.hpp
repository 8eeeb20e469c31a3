#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "zc/trace.hpp"

namespace zc {

class KnowledgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A sparsely sampled frame annotated at capture time.
struct Landmark {
  std::int64_t frame_index = 0;
  std::vector<Detection> detections;
  std::int64_t thumb_bytes = 0;

  int count(int class_id) const;
  bool contains(int class_id) const { return count(class_id) > 0; }
};

// Degrades landmark annotations to model a weaker capture-time detector.
struct LandmarkCorruption {
  double drop_probability = 0.0;  // per detection
  double spurious_rate = 0.0;     // expected spurious detections per landmark
  std::uint64_t seed = 0;

  bool active() const { return drop_probability > 0.0 || spurious_rate > 0.0; }
};

std::vector<Landmark> sample_landmarks(const Trace& trace, const Span& span, int interval_frames);

std::vector<Landmark> corrupt_landmarks(std::span<const Landmark> landmarks, const LandmarkCorruption& corruption,
                                        const Trace& trace, int object_w = 64, int object_h = 48);

struct Heatmap {
  int class_id = 0;
  int grid_w = 32;
  int grid_h = 32;
  double cell_w = 40.0;
  double cell_h = 22.5;
  std::vector<std::int64_t> cells;  // row-major, grid_h rows of grid_w

  std::int64_t at(int cx, int cy) const { return cells[static_cast<std::size_t>(cy) * grid_w + cx]; }
  std::int64_t total() const;
  std::vector<double> normalized() const;
  // Pixel rectangle spanned by cells [cx0, cx1] x [cy0, cy1], inclusive.
  Rect cell_rect(int cx0, int cy0, int cx1, int cy1, const Resolution& res) const;
};

Heatmap build_heatmap(std::span<const Landmark> landmarks, int class_id, int grid_w, int grid_h,
                      const Resolution& resolution);

// Fraction of heatmap mass inside the densest cells that together cover at
// most area_fraction of the frame.
double top_area_mass(const Heatmap& heatmap, double area_fraction);

double total_variation(const Heatmap& a, const Heatmap& b);

struct Point {
  int x = 0;
  int y = 0;
};

struct WeightedPoint {
  int x = 0;
  int y = 0;
  std::int64_t weight = 1;
};

// Exact minimum-area k-enclosing search. Edges lie on point coordinates and
// the rectangle is closed; area is (x1-x0)*(y1-y0), so a single point has
// area 0.
struct Enclosing {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  std::int64_t area = 0;
  std::int64_t covered = 0;
  std::int64_t required = 0;

  // Rect with edges on the point coordinates; degenerate sides widen to 1 px.
  Rect rect() const;
};

std::int64_t required_coverage(std::int64_t total, double coverage_p);

Enclosing k_enclosing_search(std::span<const WeightedPoint> points, double coverage_p);
Rect k_enclosing_region(std::span<const Point> points, double coverage_p);

struct TemporalDensity {
  int class_id = 0;
  double bin_s = 3600.0;
  std::vector<std::int64_t> bins;       // positive landmarks per bin
  std::vector<std::int64_t> landmarks;  // landmarks per bin
};

TemporalDensity temporal_density(std::span<const Landmark> landmarks, int class_id, double bin_s, const Span& span,
                                 double fps);

double estimate_pos_ratio(std::span<const Landmark> landmarks, int class_id);

struct KnowledgeOptions {
  int grid_w = 32;
  int grid_h = 32;
  double bin_s = 3600.0;
  std::vector<double> coverage_levels{0.75, 0.90, 0.95, 1.0};
  // Below this many distinct detection centers the crop search runs on exact
  // points; above it, on weighted heatmap cells.
  std::size_t exact_point_limit = 64;
};

struct KnowledgeSummary {
  int class_id = 0;
  std::vector<Landmark> landmarks;
  Heatmap heatmap;
  TemporalDensity density;
  double r_pos = 0.0;
  std::map<double, Rect> crop_regions;
};

// Crop region covering at least ceil(p*N) of the landmark detection centers.
Rect crop_region(std::span<const Landmark> landmarks, int class_id, double coverage_p, const Heatmap& heatmap,
                 const Resolution& resolution, std::size_t exact_point_limit = 64);

KnowledgeSummary build_knowledge(std::vector<Landmark> landmarks, int class_id, const Trace& trace, const Span& span,
                                 const KnowledgeOptions& options = {});

void write_heatmap_csv(const Heatmap& heatmap, std::ostream& out);
void write_density_csv(const TemporalDensity& density, std::ostream& out);

}  // namespace zc
