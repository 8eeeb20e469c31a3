#include "zc/simkernel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "zc/text.hpp"

namespace zc {

const char* kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::LandmarksUploaded: return "landmarks_uploaded";
    case EventKind::FrameUploadDone: return "frame_upload_done";
    case EventKind::TagUploadDone: return "tag_upload_done";
    case EventKind::OperatorShipped: return "operator_shipped";
    case EventKind::FrameScored: return "frame_scored";
    case EventKind::OperatorTrained: return "operator_trained";
    case EventKind::UploadStolen: return "upload_stolen";
    case EventKind::PassCompleted: return "pass_completed";
    case EventKind::UpgradeTriggered: return "upgrade_triggered";
    case EventKind::ResultEmitted: return "result_emitted";
  }
  return "unknown";
}

int kind_group(EventKind kind) {
  switch (kind) {
    case EventKind::LandmarksUploaded:
    case EventKind::FrameUploadDone:
    case EventKind::TagUploadDone:
    case EventKind::OperatorShipped: return 0;
    case EventKind::FrameScored:
    case EventKind::OperatorTrained: return 1;
    default: return 2;
  }
}

std::string Event::payload() const {
  std::string s;
  if (frame >= 0) s += "frame=" + std::to_string(frame);
  if (op >= 0) s += std::string(s.empty() ? "" : ";") + "op=" + std::to_string(op);
  s += std::string(s.empty() ? "" : ";") + "value=" + format_double(value);
  return s;
}

bool event_order(const Event& a, const Event& b) {
  return std::make_tuple(a.time_s, static_cast<int>(a.kind), a.frame, a.op) <
         std::make_tuple(b.time_s, static_cast<int>(b.kind), b.frame, b.op);
}

// --- engine -------------------------------------------------------------------

void Engine::at(double time_s, int group, std::int64_t key, Action action) {
  if (time_s < now_) throw SimError("cannot schedule in the past");
  heap_.push(Item{time_s, group, key, seq_++, std::move(action)});
}

void Engine::run(std::optional<double> abort_time_s) {
  while (!heap_.empty() && !stopped_) {
    if (abort_time_s && heap_.top().time > *abort_time_s) {
      now_ = *abort_time_s;
      break;
    }
    Item item = heap_.top();
    heap_.pop();
    now_ = item.time;
    item.action();
  }
}

// --- channel / processor ------------------------------------------------------

Channel::Channel(Engine& engine, double bytes_per_s, Pull pull, Done done)
    : engine_(engine), bytes_per_s_(bytes_per_s), pull_(std::move(pull)), done_(std::move(done)) {
  if (!(bytes_per_s_ > 0.0)) throw SimError("channel bandwidth must be positive");
}

void Channel::kick() {
  if (busy_ || engine_.stopped()) return;
  auto next = pull_();
  if (!next) return;
  busy_ = true;
  const Transfer t = *next;
  const double duration = std::isinf(bytes_per_s_) ? 0.0 : static_cast<double>(t.bytes) / bytes_per_s_;
  engine_.at(engine_.now() + duration, 0, t.frame, [this, t] {
    busy_ = false;
    bytes_sent_ += t.bytes;
    done_(t);
    kick();
  });
}

Processor::Processor(Engine& engine, Pull pull, Done done)
    : engine_(engine), pull_(std::move(pull)), done_(std::move(done)) {}

void Processor::kick() {
  if (busy_ || engine_.stopped()) return;
  auto next = pull_();
  if (!next) return;
  busy_ = true;
  const ComputeJob job = *next;
  engine_.at(engine_.now() + job.duration_s, 1, job.frame, [this, job] {
    busy_ = false;
    done_(job);
    kick();
  });
}

// --- log ----------------------------------------------------------------------

void finalize_log(std::vector<Event>& events) { std::stable_sort(events.begin(), events.end(), event_order); }

std::vector<std::string> check_kernel_invariants(const SimResult& r) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i < r.events.size(); ++i)
    if (r.events[i].time_s < r.events[i - 1].time_s) {
      out.push_back("event log not sorted at position " + std::to_string(i));
      break;
    }

  const auto& t = r.traffic;
  if (t.landmark_bytes + t.frame_bytes + t.tag_bytes != r.bytes_uplink)
    out.push_back("uplink bytes differ from the sum of uplink transfers");
  if (t.model_bytes != r.bytes_downlink) out.push_back("downlink bytes differ from the sum of model transfers");

  // Causality: scoring only after the scoring operator arrived; each frame
  // uploaded at most once.
  std::set<int> shipped;
  std::set<std::int64_t> uploaded;
  bool has_ships = false;
  for (const auto& e : r.events) has_ships |= e.kind == EventKind::OperatorShipped;
  for (const auto& e : r.events) {
    if (e.kind == EventKind::OperatorShipped) shipped.insert(e.op);
    if (e.kind == EventKind::FrameScored && has_ships && !shipped.count(e.op))
      out.push_back("frame " + std::to_string(e.frame) + " scored by operator " + std::to_string(e.op) +
                    " before it was shipped");
    if (e.kind == EventKind::FrameUploadDone && !uploaded.insert(e.frame).second)
      out.push_back("frame " + std::to_string(e.frame) + " uploaded twice");
  }
  return out;
}

void write_events_csv(const std::vector<Event>& events, std::ostream& out) {
  out << "time_s,kind,payload\n";
  for (const auto& e : events) out << format_double(e.time_s) << ',' << kind_name(e.kind) << ',' << e.payload() << '\n';
}

void write_progress_csv(const std::vector<ProgressPoint>& progress, std::ostream& out) {
  out << "time_s,metric,value\n";
  for (const auto& p : progress) out << format_double(p.time_s) << ',' << p.metric << ',' << format_double(p.value) << '\n';
}

void write_decisions_csv(const std::vector<PolicyDecision>& decisions, std::ostream& out) {
  out << "time_s,decision,operator_id,f_value,reason\n";
  for (const auto& d : decisions)
    out << format_double(d.time_s) << ',' << d.decision << ',' << d.operator_id << ',' << format_double(d.f_value)
        << ',' << d.reason << '\n';
}

}  // namespace zc
