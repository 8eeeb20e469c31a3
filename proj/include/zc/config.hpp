#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zc/cloud_policies.hpp"
#include "zc/knowledge.hpp"
#include "zc/operators.hpp"
#include "zc/simkernel.hpp"
#include "zc/trace.hpp"

namespace zc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TraceSource {
  std::string path;  // empty: synthesize from synth
  SynthParams synth;
  double fps = 1.0;
  double duration_s = 172800.0;
  Resolution resolution;
};

// A hand-specified operator with fixed speed and noise; it never learns.
struct ExplicitOperator {
  double fps = 10.0;
  double sigma = 0.0;
  std::int64_t model_bytes = 1048576;
  std::optional<Rect> region;
};

struct TrainingConfig {
  int retrain_every = 500;           // new labeled samples between rounds
  std::size_t max_validation = 2000; // most recent validation samples scored per round
  std::size_t gamma_window = 300;    // recent uploads used to re-measure gamma
  std::optional<double> latency_s;   // replaces the per-spec latency when set
};

// Capture-time index for PreIndexAll: ground truth with detections dropped
// and spurious ones added.
struct IndexModel {
  double drop_probability = 0.35;
  double spurious_rate = 0.05;
  std::uint64_t seed = 0;
};

struct SimConfig {
  TraceSource trace;
  CameraModel camera;
  NetworkModel network;
  LandmarkCorruption corruption;
  ArchGrid grid;
  OperatorCalibration calibration;
  std::size_t family_limit = 40;
  std::vector<ExplicitOperator> operators;
  KnowledgeOptions knowledge;
  PolicyConfig policy;
  QuerySpec query;
  TrainingConfig training;
  IndexModel index;
  std::string system = "zc2";
  std::uint64_t seed = 1;
  std::optional<double> abort_time_s;
  bool stop_at_full_recall = true;
  bool verify = false;
  int first_pass_stride = 10;
  // Frozen-operator variant: selection reasons about these resources instead
  // of the real ones.
  std::optional<double> planning_uplink_bytes_per_s;
  std::optional<double> planning_compute_rate;
};

// Two classes over 48 h at 1 FPS with day/night cycles and a crop-friendly
// hotspot for class 0.
SimConfig default_config();

SimConfig parse_config(const std::string& json_text);
SimConfig load_config(const std::filesystem::path& path);
std::string dump_config(const SimConfig& config);  // canonical JSON, sorted keys

// Throws ConfigError naming the offending field.
void validate(const SimConfig& config);

std::uint64_t config_hash(const SimConfig& config);

// Loads or synthesizes the trace the config refers to.
Trace materialize_trace(const SimConfig& config);

const std::vector<std::string>& known_systems();

}  // namespace zc
