#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "zc/rng.hpp"
#include "zc/trace.hpp"

namespace zc {

class OperatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArchGrid {
  std::vector<int> conv_layers{2, 3, 4, 5};
  std::vector<int> kernel{8, 16, 32};
  std::vector<int> dense{16, 32, 64};
  std::vector<int> input_px{25, 50, 100};
};

// Constants of the abstract cost/accuracy model. Desk-scale sample counts are
// the real system's divided by 25.
struct OperatorCalibration {
  double flops_conv_coeff = 1000.0;
  double flops_dense_coeff = 5000.0;
  double sigma0 = 0.8;
  double sigma_min_best = 0.05;
  double sigma_min_worst = 0.35;
  double tau_min = 100.0;
  double tau_max = 2000.0;
  double density_gain_cap = 4.0;
  double model_bytes_min = 0.2 * 1048576.0;
  double model_bytes_max = 15.0 * 1048576.0;
  double train_latency_min_s = 5.0;
  double train_latency_max_s = 45.0;
  int bootstrap_min = 200;
  std::int64_t tag_message_bytes = 16;
};

struct CropRegion {
  double coverage = 1.0;
  Rect rect;
};

struct OperatorSpec {
  int id = 0;
  int conv_layers = 2;
  int kernel = 8;
  int dense = 16;
  int input_px = 25;
  Rect region;
  double coverage = 1.0;
  double flops = 0.0;
  // flops scaled by the pixel-density gain from cropping.
  double capacity = 0.0;
  std::int64_t model_bytes = 0;
};

struct CameraModel {
  std::string preset = "rpi3";
  double compute_rate = 1.0e11;  // abstract flops per second
  int landmark_interval_frames = 30;
  double detector_fps = 0.1;
};

// Known presets: rpi3 (default), odroid, jetson.
CameraModel camera_preset(const std::string& name);

// Maps architecture knobs and crop regions to cost, capacity and learning
// behaviour. Normalization uses the extremes of the arch grid so the same spec
// always gets the same numbers regardless of which subset is selected.
class FamilyModel {
 public:
  FamilyModel(ArchGrid grid, OperatorCalibration calibration, Resolution resolution);

  double flops(int conv_layers, int kernel, int dense, int input_px) const;
  OperatorSpec make_spec(int id, int conv_layers, int kernel, int dense, int input_px, const Rect& region,
                         double coverage) const;

  double sigma_min(const OperatorSpec& spec) const;
  double tau(const OperatorSpec& spec) const;
  double sigma_at(const OperatorSpec& spec, double n_train) const;
  double train_latency_s(const OperatorSpec& spec) const;

  const ArchGrid& grid() const { return grid_; }
  const OperatorCalibration& calibration() const { return cal_; }
  const Resolution& resolution() const { return res_; }
  double flops_min() const { return flops_lo_; }
  double flops_max() const { return flops_hi_; }

 private:
  double cost_level(double flops) const;  // 0 at the cheapest arch, 1 at the priciest

  ArchGrid grid_;
  OperatorCalibration cal_;
  Resolution res_;
  double flops_lo_ = 1.0;
  double flops_hi_ = 1.0;
};

std::vector<OperatorSpec> enumerate_family(const FamilyModel& model, std::span<const CropRegion> regions,
                                           std::size_t limit = 40);

double operator_fps(const OperatorSpec& spec, const CameraModel& camera);

enum class Signal { Presence, Count };

enum class Tag : std::uint8_t { Untagged, Positive, Negative, Undecidable };

const char* tag_name(Tag t);

// Frames scoring below low resolve Negative, above high Positive, else
// Undecidable.
struct Thresholds {
  double low = 0.0;
  double high = 1.0;
};

Tag classify(double score, const Thresholds& th);

struct ErrorTolerance {
  double fp = 0.01;
  double fn = 0.01;
};

struct OperatorState {
  OperatorSpec spec;
  Signal signal = Signal::Presence;
  double count_scale = 1.0;  // Count signal saturates at this many visible objects
  double n_train = 0.0;
  double sigma = 0.8;
  std::optional<Thresholds> thresholds;
  double measured_gamma = 0.0;
  double measured_auc = 0.5;
  double fps_cam = 0.0;
  bool trained = false;
  bool fixed_sigma = false;  // hand-specified operators do not learn
};

OperatorState initial_state(const OperatorSpec& spec, const FamilyModel& model, const CameraModel& camera,
                            Signal signal = Signal::Presence);

// Ground truth the operator can see through its crop region.
double visible_signal(const OperatorState& state, const FrameRecord& frame, int class_id);

double score_frame(const OperatorState& state, const FrameRecord& frame, int class_id, double hardness,
                   SplitMix64& rng);

// Stream seed for one (operator, frame) pair. Scoring the same frame with the
// same operator always draws the same noise sample.
std::uint64_t noise_stream(std::uint64_t seed, int operator_id, std::int64_t frame_index);

// Deterministic 70/30 split.
bool is_validation_frame(std::int64_t frame_index);

struct LabeledSample {
  std::int64_t frame_index = 0;
  int label_count = 0;  // count as reported by whoever labeled the frame
};

struct TrainOptions {
  int class_id = 0;
  std::uint64_t noise_seed = 0;
  std::optional<ErrorTolerance> tolerance;
  // Frames for gamma; defaults to the validation split of the samples.
  std::span<const LabeledSample> gamma_set;
  // Count rankers treat label_count >= this as the positive class for AUC.
  int count_label_threshold = 1;
  // Precomputed effective_training_samples() when many states share a set.
  std::optional<double> effective_samples;
};

// Training-split samples whose label agrees with the truth, minus those that
// disagree. Corrupted labels slow learning.
double effective_training_samples(std::span<const LabeledSample> samples, const Trace& trace, int class_id,
                                  Signal signal);

OperatorState train(const OperatorState& state, std::span<const LabeledSample> samples, const Trace& trace,
                    const FamilyModel& model, const TrainOptions& options);

// Area under the ROC curve (Mann-Whitney, ties count one half).
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Widest thresholds whose false-positive rate (negatives above high) and
// false-negative rate (positives below low) stay within tolerance.
Thresholds calibrate_thresholds(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                const ErrorTolerance& tolerance);

std::vector<OperatorState> pareto_frontier(std::span<const OperatorState> states);

void write_family_csv(std::span<const OperatorState> states, std::ostream& out);

}  // namespace zc
