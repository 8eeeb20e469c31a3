#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "zc/operators.hpp"
#include "zc/rng.hpp"
#include "zc/simkernel.hpp"

namespace zc {

// Frames waiting for the uplink. Priority mode dequeues the highest score
// first; frames never ranked sit after ranked frames of equal score and keep
// their insertion order. Fifo mode ignores scores.
class UploadQueue {
 public:
  enum class Mode { Priority, Fifo };

  struct Entry {
    std::int64_t frame = 0;
    double score = 0.0;
    bool ranked = false;
    std::int64_t order = 0;
  };

  explicit UploadQueue(Mode mode = Mode::Priority) : mode_(mode) {}

  // Inserts, or re-keys a frame already waiting. Throws for a frame that has
  // already left through pop_front().
  void push(std::int64_t frame, double score, bool ranked, std::int64_t order);
  void push_back(std::int64_t frame);

  bool contains(std::int64_t frame) const { return index_.count(frame) != 0; }
  std::optional<Entry> find(std::int64_t frame) const;
  bool sent(std::int64_t frame) const { return sent_.count(frame) != 0; }
  std::optional<Entry> peek_front() const;
  std::optional<Entry> pop_front();
  std::optional<Entry> back() const;
  bool remove(std::int64_t frame);
  std::vector<std::int64_t> clear();

  std::size_t size() const { return set_.size(); }
  bool empty() const { return set_.empty(); }
  Mode mode() const { return mode_; }
  // Frames in dequeue order.
  std::vector<std::int64_t> order() const;

 private:
  struct Before {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.score != b.score) return a.score > b.score;
      if (a.ranked != b.ranked) return a.ranked;
      if (a.order != b.order) return a.order < b.order;
      return a.frame < b.frame;
    }
  };

  Mode mode_;
  std::set<Entry, Before> set_;
  std::unordered_map<std::int64_t, Entry> index_;
  std::unordered_set<std::int64_t> sent_;
  std::int64_t next_order_ = 0;
};

// Scores up to budget frames of order that have not been uploaded and re-keys
// them in the queue. Returns how many were scored.
std::size_t rank_pass(std::span<const std::int64_t> order, UploadQueue& queue, std::size_t budget,
                      const std::function<double(std::int64_t)>& score);

// Per-frame tags of a span with their provenance.
class TagState {
 public:
  enum class Source : std::uint8_t { None, Camera, Cloud };

  explicit TagState(FrameRange range);

  Tag get(std::int64_t frame) const { return tags_[slot(frame)]; }
  Source source(std::int64_t frame) const { return sources_[slot(frame)]; }
  // P and N are final; U may later resolve.
  void set(std::int64_t frame, Tag tag, Source source);
  // Forgets every U so a new operator can retry those frames.
  std::size_t clear_undecidable();

  const FrameRange& range() const { return range_; }
  std::int64_t count(Tag tag) const;
  const std::vector<Tag>& tags() const { return tags_; }
  const std::vector<Source>& sources() const { return sources_; }

 private:
  std::size_t slot(std::int64_t frame) const;

  FrameRange range_;
  std::vector<Tag> tags_;
  std::vector<Source> sources_;
};

// One filtering pass at group size K over the span, with rapid attempting
// followed by work stealing. Undecidable frames queue for upload; the camera
// cancels a queued upload when it resolves another frame of that group.
class TaggingRuntime {
 public:
  struct Steal {
    std::int64_t cancelled = -1;  // queued frame no longer uploaded
    std::int64_t resolved_by = -1;
  };

  TaggingRuntime(FrameRange range, std::uint64_t seed);

  TagState& tags() { return tags_; }
  const TagState& tags() const { return tags_; }

  // Starts a pass at group size k; clears the pending upload queue.
  void start_pass(int k);
  int level() const { return k_; }

  // Next frame for the camera, or nothing if it should idle for now.
  std::optional<std::int64_t> next_frame();
  // Forgets U tags except on frames being uploaded.
  std::size_t clear_undecidable();
  // Records the camera's verdict on a frame previously handed out.
  std::optional<Steal> on_camera_tag(std::int64_t frame, Tag tag);

  std::optional<std::int64_t> pop_upload();
  void on_cloud_tag(std::int64_t frame, Tag tag);

  bool rapid_done() const { return cursor_ >= n_groups_; }
  bool camera_holding() const { return processing_ >= 0; }
  // Every group resolved or holding a U; nothing queued or in flight.
  bool pass_complete() const;
  std::int64_t untagged_count() const { return tags_.count(Tag::Untagged); }
  const UploadQueue& queue() const { return queue_; }
  std::size_t in_flight() const { return in_flight_.size(); }

 private:
  std::int64_t group_of(std::int64_t frame) const { return (frame - range_.first) / k_; }
  std::int64_t group_begin(std::int64_t g) const { return range_.first + g * k_; }
  std::int64_t group_end(std::int64_t g) const { return std::min(range_.last, group_begin(g) + k_); }
  bool group_resolved(std::int64_t g) const;
  bool group_pending(std::int64_t g) const;  // holds a frame queued or in flight
  std::optional<std::int64_t> first_undecidable(std::int64_t g) const;
  std::optional<std::int64_t> random_untagged(std::int64_t g);

  FrameRange range_;
  TagState tags_;
  SplitMix64 rng_;
  int k_ = 1;
  std::int64_t n_groups_ = 0;
  std::int64_t cursor_ = 0;
  UploadQueue queue_{UploadQueue::Mode::Fifo};
  std::unordered_set<std::int64_t> in_flight_;
  // Queued frames whose group may still have untagged frames, by queue order.
  std::map<std::int64_t, std::int64_t> stealable_;
  std::int64_t processing_ = -1;
  std::int64_t steal_target_ = -1;
};

// Runs one pass to quiescence with an instantaneous classifier and no uploads
// in between. Returns the frames left queued for upload.
std::vector<std::int64_t> filter_pass(TaggingRuntime& runtime, int k,
                                      const std::function<Tag(std::int64_t)>& classify_frame,
                                      std::vector<TaggingRuntime::Steal>* steals = nullptr);

// Uniform random order over a frame range, excluding some frames.
std::vector<std::int64_t> random_sample_stream(FrameRange range, std::uint64_t seed,
                                               const std::unordered_set<std::int64_t>& exclude = {});

}  // namespace zc
