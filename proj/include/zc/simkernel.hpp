#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "zc/operators.hpp"

namespace zc {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantViolation : public SimError {
 public:
  using SimError::SimError;
};

// Declaration order is the tie-break order for simultaneous events:
// transfers, then compute, then policy.
enum class EventKind : int {
  LandmarksUploaded,
  FrameUploadDone,
  TagUploadDone,
  OperatorShipped,
  FrameScored,
  OperatorTrained,
  UploadStolen,
  PassCompleted,
  UpgradeTriggered,
  ResultEmitted,
};

const char* kind_name(EventKind kind);
int kind_group(EventKind kind);  // 0 transfer, 1 compute, 2 policy

struct Event {
  double time_s = 0.0;
  EventKind kind = EventKind::FrameScored;
  std::int64_t frame = -1;
  int op = -1;
  double value = 0.0;

  std::string payload() const;
  friend bool operator==(const Event&, const Event&) = default;
};

bool event_order(const Event& a, const Event& b);

struct NetworkModel {
  double uplink_bytes_per_s = 1048576.0;
  double downlink_bytes_per_s = 1048576.0;

  // Full-resolution frames per second the uplink sustains.
  double fps_net(std::int64_t frame_bytes) const { return uplink_bytes_per_s / static_cast<double>(frame_bytes); }
};

struct ProgressPoint {
  double time_s = 0.0;
  std::string metric;
  double value = 0.0;
};

struct PolicyDecision {
  double time_s = 0.0;
  std::string decision;
  int operator_id = -1;
  double f_value = 0.0;
  std::string reason;
};

struct Traffic {
  std::int64_t landmark_bytes = 0;
  std::int64_t frame_bytes = 0;
  std::int64_t tag_bytes = 0;
  std::int64_t model_bytes = 0;
  std::int64_t landmarks = 0;
  std::int64_t frames = 0;
  std::int64_t tags = 0;
  std::int64_t models = 0;
};

struct QueryAnswer {
  std::vector<std::int64_t> positives;  // Retrieval, oracle-confirmed
  std::vector<Tag> tags;                // Tagging, indexed from span start
  std::vector<std::uint8_t> tag_from_camera;
  int max_count = 0;
  double avg_count = 0.0;
  double median_count = 0.0;
};

struct SimResult {
  std::string system;
  std::vector<Event> events;
  std::vector<ProgressPoint> progress;
  std::vector<PolicyDecision> decisions;
  std::int64_t bytes_uplink = 0;
  std::int64_t bytes_downlink = 0;
  Traffic traffic;
  std::vector<int> operator_switches;
  QueryAnswer answer;
  double end_time_s = 0.0;
  std::int64_t span_first = 0;
  std::int64_t frames_scored = 0;
  std::int64_t n_landmarks = 0;
};

// Single-timeline event heap. Actions scheduled for the same instant run in
// (group, key, insertion) order.
class Engine {
 public:
  using Action = std::function<void()>;

  void at(double time_s, int group, std::int64_t key, Action action);
  double now() const { return now_; }
  void stop() { stopped_ = true; }
  bool stopped() const { return stopped_; }
  // Runs until the heap drains, stop() is called, or the abort time passes.
  void run(std::optional<double> abort_time_s = std::nullopt);

 private:
  struct Item {
    double time;
    int group;
    std::int64_t key;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.group != b.group) return a.group > b.group;
      if (a.key != b.key) return a.key > b.key;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Item, std::vector<Item>, Later> heap_;
  double now_ = 0.0;
  std::uint64_t seq_ = 0;
  bool stopped_ = false;
};

struct Transfer {
  enum class Kind { Landmarks, Frame, Tag, Model };
  Kind kind = Kind::Frame;
  std::int64_t bytes = 0;
  std::int64_t frame = -1;
  int op = -1;
  std::int64_t count = 1;
};

// A serial byte pipe. When idle it pulls the next transfer from its source.
class Channel {
 public:
  using Pull = std::function<std::optional<Transfer>()>;
  using Done = std::function<void(const Transfer&)>;

  Channel(Engine& engine, double bytes_per_s, Pull pull, Done done);
  void kick();
  bool busy() const { return busy_; }
  double bandwidth() const { return bytes_per_s_; }
  void set_bandwidth(double bytes_per_s) { bytes_per_s_ = bytes_per_s; }
  std::int64_t bytes_sent() const { return bytes_sent_; }

 private:
  Engine& engine_;
  double bytes_per_s_;
  Pull pull_;
  Done done_;
  bool busy_ = false;
  std::int64_t bytes_sent_ = 0;
};

struct ComputeJob {
  std::int64_t frame = -1;
  int op = -1;
  double duration_s = 0.0;
};

// The camera's compute: one frame at a time.
class Processor {
 public:
  using Pull = std::function<std::optional<ComputeJob>()>;
  using Done = std::function<void(const ComputeJob&)>;

  Processor(Engine& engine, Pull pull, Done done);
  void kick();
  bool busy() const { return busy_; }

 private:
  Engine& engine_;
  Pull pull_;
  Done done_;
  bool busy_ = false;
};

// Sorts the log into its canonical order.
void finalize_log(std::vector<Event>& events);

// Violations of the kernel-level invariants; empty when the result is sound.
std::vector<std::string> check_kernel_invariants(const SimResult& result);

void write_events_csv(const std::vector<Event>& events, std::ostream& out);
void write_progress_csv(const std::vector<ProgressPoint>& progress, std::ostream& out);
void write_decisions_csv(const std::vector<PolicyDecision>& decisions, std::ostream& out);

}  // namespace zc
