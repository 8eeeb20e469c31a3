#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace zc {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Resolution {
  int width = 1280;
  int height = 720;
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

// Axis-aligned pixel rectangle, half-open: [x, x+w) x [y, y+h).
struct Rect {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  std::int64_t area() const { return static_cast<std::int64_t>(w) * h; }
  double center_x() const { return x + w / 2.0; }
  double center_y() const { return y + h / 2.0; }
  bool contains(double px, double py) const { return px >= x && px < x + w && py >= y && py < y + h; }
  bool inside(const Resolution& res) const {
    return w > 0 && h > 0 && x >= 0 && y >= 0 && x + w <= res.width && y + h <= res.height;
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Detection {
  int class_id = 0;
  Rect bbox;
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct FrameRecord {
  std::int64_t index = 0;
  double timestamp_s = 0.0;
  std::vector<Detection> detections;
  std::int64_t full_bytes = 60000;
  std::int64_t thumb_bytes = 6000;

  int count(int class_id) const;
  bool contains(int class_id) const { return count(class_id) > 0; }

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

// Hardness scales the on-camera scoring noise. Hard frames get 1.0, easy ones
// 1/hard_multiplier. Derived from (seed, index) so it never needs storing.
struct DifficultyProfile {
  double hard_fraction = 0.3;
  double hard_multiplier = 4.0;
  std::uint64_t seed = 0;

  double hardness(std::int64_t index) const;
  friend bool operator==(const DifficultyProfile&, const DifficultyProfile&) = default;
};

// Half-open time range [start_s, end_s).
struct Span {
  double start_s = 0.0;
  double end_s = 0.0;
  double length() const { return end_s - start_s; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct FrameRange {
  std::int64_t first = 0;
  std::int64_t last = 0;  // exclusive
  std::int64_t size() const { return last - first; }
};

struct Trace {
  std::string id = "trace";
  double fps = 1.0;
  double duration_s = 0.0;
  Resolution resolution;
  std::vector<int> classes;
  std::vector<FrameRecord> frames;
  DifficultyProfile difficulty;

  std::int64_t frame_count() const { return static_cast<std::int64_t>(frames.size()); }
  const FrameRecord& frame(std::int64_t index) const { return frames.at(static_cast<std::size_t>(index)); }
  double hardness(std::int64_t index) const { return difficulty.hardness(index); }
  Span full_span() const { return {0.0, duration_s}; }
  FrameRange frames_in(const Span& span) const;
  bool has_class(int class_id) const;

  friend bool operator==(const Trace&, const Trace&) = default;
};

// Number of frames a trace of this shape holds.
std::int64_t dense_frame_count(double fps, double duration_s);

// --- synthetic generation ---------------------------------------------------

struct Hotspot {
  Rect area;
  double weight = 1.0;
  double jitter_px = 0.0;
  // Optional per-bin multipliers on the weight (cyclic, bin length from the
  // owning class's temporal_bin_s). Lets the spatial mix drift over the day.
  std::vector<double> time_profile;
};

struct CountDistribution {
  enum class Kind { Geometric, Poisson };
  Kind kind = Kind::Geometric;
  double mean = 1.5;  // instances per positive frame, >= 1
};

struct ClassParams {
  int class_id = 0;
  double occurrence_rate = 0.2;
  std::vector<Hotspot> hotspots;
  // Cyclic rate multipliers; normalized to mean 1 before use.
  std::vector<double> temporal_profile;
  double temporal_bin_s = 3600.0;
  CountDistribution count;
  int object_w = 64;
  int object_h = 48;
};

struct SynthParams {
  std::string id = "synth";
  std::vector<ClassParams> classes;
  DifficultyProfile difficulty;
  std::uint64_t seed = 1;
  std::int64_t full_bytes = 60000;
  std::int64_t thumb_bytes = 6000;
};

void validate(const SynthParams& params, const Resolution& resolution);

Trace generate_trace(const SynthParams& params, double fps, double duration_s, const Resolution& resolution);

// --- file format --------------------------------------------------------------

void save_trace(const Trace& trace, std::ostream& out);
void save_trace(const Trace& trace, const std::filesystem::path& path);
Trace load_trace(std::istream& in);
Trace load_trace(const std::filesystem::path& path);

// --- exhaustive statistics ----------------------------------------------------

struct GroundTruthStats {
  double pos_ratio = 0.0;
  std::vector<int> per_frame_counts;
  int max_count = 0;
  double avg_count = 0.0;
  double median_count = 0.0;
};

GroundTruthStats ground_truth_stats(const Trace& trace, int class_id, const Span& span);

// Median of a multiset; mean of the two middle values for even sizes.
double median_of(std::vector<int> values);

}  // namespace zc
