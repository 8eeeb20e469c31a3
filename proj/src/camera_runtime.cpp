#include "zc/camera_runtime.hpp"

#include <algorithm>

namespace zc {

// --- upload queue ---------------------------------------------------------------

void UploadQueue::push(std::int64_t frame, double score, bool ranked, std::int64_t order) {
  if (sent_.count(frame)) throw InvariantViolation("frame " + std::to_string(frame) + " re-enqueued after upload");
  if (auto it = index_.find(frame); it != index_.end()) set_.erase(it->second);
  Entry e{frame, mode_ == Mode::Fifo ? 0.0 : score, mode_ == Mode::Fifo ? false : ranked, order};
  set_.insert(e);
  index_[frame] = e;
  next_order_ = std::max(next_order_, order + 1);
}

void UploadQueue::push_back(std::int64_t frame) { push(frame, 0.0, false, next_order_); }

std::optional<UploadQueue::Entry> UploadQueue::find(std::int64_t frame) const {
  auto it = index_.find(frame);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<UploadQueue::Entry> UploadQueue::peek_front() const {
  if (set_.empty()) return std::nullopt;
  return *set_.begin();
}

std::optional<UploadQueue::Entry> UploadQueue::pop_front() {
  if (set_.empty()) return std::nullopt;
  Entry e = *set_.begin();
  set_.erase(set_.begin());
  index_.erase(e.frame);
  sent_.insert(e.frame);
  return e;
}

std::optional<UploadQueue::Entry> UploadQueue::back() const {
  if (set_.empty()) return std::nullopt;
  return *set_.rbegin();
}

bool UploadQueue::remove(std::int64_t frame) {
  auto it = index_.find(frame);
  if (it == index_.end()) return false;
  set_.erase(it->second);
  index_.erase(it);
  return true;
}

std::vector<std::int64_t> UploadQueue::clear() {
  std::vector<std::int64_t> out = order();
  set_.clear();
  index_.clear();
  return out;
}

std::vector<std::int64_t> UploadQueue::order() const {
  std::vector<std::int64_t> out;
  out.reserve(set_.size());
  for (const auto& e : set_) out.push_back(e.frame);
  return out;
}

std::size_t rank_pass(std::span<const std::int64_t> order, UploadQueue& queue, std::size_t budget,
                      const std::function<double(std::int64_t)>& score) {
  std::size_t done = 0;
  for (std::size_t i = 0; i < order.size() && done < budget; ++i) {
    const std::int64_t f = order[i];
    if (queue.sent(f)) continue;
    const double s = score(f);
    const auto existing = queue.find(f);
    queue.push(f, s, true, existing ? existing->order : static_cast<std::int64_t>(i));
    ++done;
  }
  return done;
}

// --- tags -----------------------------------------------------------------------

TagState::TagState(FrameRange range)
    : range_(range),
      tags_(static_cast<std::size_t>(std::max<std::int64_t>(0, range.size())), Tag::Untagged),
      sources_(tags_.size(), Source::None) {}

std::size_t TagState::slot(std::int64_t frame) const {
  if (frame < range_.first || frame >= range_.last)
    throw InvariantViolation("frame " + std::to_string(frame) + " outside the tagged span");
  return static_cast<std::size_t>(frame - range_.first);
}

void TagState::set(std::int64_t frame, Tag tag, Source source) {
  const std::size_t i = slot(frame);
  const Tag old = tags_[i];
  if (old == Tag::Positive || old == Tag::Negative) {
    if (tag != old)
      throw InvariantViolation("frame " + std::to_string(frame) + " already tagged " + tag_name(old) + ", got " +
                               tag_name(tag));
    return;
  }
  tags_[i] = tag;
  sources_[i] = tag == Tag::Untagged ? Source::None : source;
}

std::size_t TagState::clear_undecidable() {
  std::size_t n = 0;
  for (std::size_t i = 0; i < tags_.size(); ++i)
    if (tags_[i] == Tag::Undecidable) {
      tags_[i] = Tag::Untagged;
      sources_[i] = Source::None;
      ++n;
    }
  return n;
}

std::int64_t TagState::count(Tag tag) const { return std::count(tags_.begin(), tags_.end(), tag); }

// --- filtering passes -----------------------------------------------------------

TaggingRuntime::TaggingRuntime(FrameRange range, std::uint64_t seed) : range_(range), tags_(range), rng_(seed) {}

void TaggingRuntime::start_pass(int k) {
  if (k < 1) throw SimError("group size must be at least 1");
  k_ = k;
  n_groups_ = (range_.size() + k - 1) / k;
  cursor_ = 0;
  queue_.clear();
  stealable_.clear();
  steal_target_ = -1;
}

std::size_t TaggingRuntime::clear_undecidable() {
  std::size_t n = 0;
  for (std::int64_t f = range_.first; f < range_.last; ++f)
    if (tags_.get(f) == Tag::Undecidable && !in_flight_.count(f)) {
      tags_.set(f, Tag::Untagged, TagState::Source::None);
      ++n;
    }
  return n;
}

bool TaggingRuntime::group_resolved(std::int64_t g) const {
  for (std::int64_t f = group_begin(g); f < group_end(g); ++f) {
    const Tag t = tags_.get(f);
    if (t == Tag::Positive || t == Tag::Negative) return true;
  }
  return false;
}

bool TaggingRuntime::group_pending(std::int64_t g) const {
  for (std::int64_t f = group_begin(g); f < group_end(g); ++f)
    if (queue_.contains(f) || in_flight_.count(f)) return true;
  return false;
}

std::optional<std::int64_t> TaggingRuntime::first_undecidable(std::int64_t g) const {
  for (std::int64_t f = group_begin(g); f < group_end(g); ++f)
    if (tags_.get(f) == Tag::Undecidable) return f;
  return std::nullopt;
}

std::optional<std::int64_t> TaggingRuntime::random_untagged(std::int64_t g) {
  std::vector<std::int64_t> pool;
  for (std::int64_t f = group_begin(g); f < group_end(g); ++f)
    if (tags_.get(f) == Tag::Untagged && f != processing_ && !in_flight_.count(f)) pool.push_back(f);
  if (pool.empty()) return std::nullopt;
  return pool[rng_.below(pool.size())];
}

std::optional<std::int64_t> TaggingRuntime::next_frame() {
  if (processing_ >= 0) return std::nullopt;

  // Rapid attempting: one random frame per group.
  while (cursor_ < n_groups_) {
    const std::int64_t g = cursor_++;
    if (group_resolved(g) || group_pending(g)) continue;
    if (auto u = first_undecidable(g)) {
      queue_.push_back(*u);
      stealable_[queue_.find(*u)->order] = *u;
      continue;
    }
    if (auto f = random_untagged(g)) {
      processing_ = *f;
      return f;
    }
  }

  // Work stealing from the tail of the upload queue.
  while (!stealable_.empty()) {
    auto it = std::prev(stealable_.end());
    const std::int64_t target = it->second;
    const std::int64_t g = group_of(target);
    if (group_resolved(g)) {
      queue_.remove(target);
      stealable_.erase(it);
      continue;
    }
    if (auto f = random_untagged(g)) {
      processing_ = *f;
      steal_target_ = target;
      return f;
    }
    stealable_.erase(it);
  }
  return std::nullopt;
}

std::optional<TaggingRuntime::Steal> TaggingRuntime::on_camera_tag(std::int64_t frame, Tag tag) {
  if (frame != processing_) throw InvariantViolation("camera tagged frame " + std::to_string(frame) + " it was not given");
  processing_ = -1;
  const bool stealing = steal_target_ >= 0;
  steal_target_ = -1;
  tags_.set(frame, tag, TagState::Source::Camera);

  if (tag == Tag::Undecidable) {
    if (!stealing) {
      queue_.push_back(frame);
      stealable_[queue_.find(frame)->order] = frame;
    }
    return std::nullopt;
  }

  const std::int64_t g = group_of(frame);
  for (std::int64_t f = group_begin(g); f < group_end(g); ++f) {
    if (auto e = queue_.find(f)) {
      stealable_.erase(e->order);
      queue_.remove(f);
      return Steal{f, frame};
    }
  }
  return std::nullopt;
}

std::optional<std::int64_t> TaggingRuntime::pop_upload() {
  auto e = queue_.pop_front();
  if (!e) return std::nullopt;
  stealable_.erase(e->order);
  in_flight_.insert(e->frame);
  return e->frame;
}

void TaggingRuntime::on_cloud_tag(std::int64_t frame, Tag tag) {
  in_flight_.erase(frame);
  tags_.set(frame, tag, TagState::Source::Cloud);
}

bool TaggingRuntime::pass_complete() const {
  return rapid_done() && queue_.empty() && in_flight_.empty() && processing_ < 0;
}

std::vector<std::int64_t> filter_pass(TaggingRuntime& runtime, int k,
                                      const std::function<Tag(std::int64_t)>& classify_frame,
                                      std::vector<TaggingRuntime::Steal>* steals) {
  runtime.start_pass(k);
  while (auto f = runtime.next_frame()) {
    auto s = runtime.on_camera_tag(*f, classify_frame(*f));
    if (s && steals) steals->push_back(*s);
  }
  return runtime.queue().order();
}

std::vector<std::int64_t> random_sample_stream(FrameRange range, std::uint64_t seed,
                                               const std::unordered_set<std::int64_t>& exclude) {
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, range.size())));
  for (std::int64_t f = range.first; f < range.last; ++f)
    if (!exclude.count(f)) out.push_back(f);
  SplitMix64 rng(seed);
  shuffle(out, rng);
  return out;
}

}  // namespace zc
