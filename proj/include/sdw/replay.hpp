#pragma once

// Generation-tagged trajectory buffer. New-segment unrolls are admitted with
//   P_insert = P_base + lambda * (1 - w_buffer / p_old)   (clamped to [0, 1])
// where p_old is the fraction of entries collected before the current segment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sdw/errors.hpp"
#include "sdw/losses.hpp"
#include "sdw/rng.hpp"

namespace sdw {

inline constexpr std::size_t kUnrollLength = 20;

/// p_old == 0 returns p_base (the formula is singular there).
inline double compute_p_insert(double p_old, double w_buffer, double p_base, double lambda) {
  if (p_old <= 0.0) return std::clamp(p_base, 0.0, 1.0);
  return std::clamp(p_base + lambda * (1.0 - w_buffer / p_old), 0.0, 1.0);
}

struct BufferEntry {
  Trajectory trajectory;
  std::int64_t insertion_step = 0;
};

struct ReplayConfig {
  std::size_t capacity = 4096;
  double p_base = 0.2;
  double lambda = 0.5;

  void validate() const {
    if (capacity == 0) throw ConfigError("replay.capacity must be > 0");
    if (!(p_base >= 0.0 && p_base <= 1.0)) throw ConfigError("replay.p_base must be in [0, 1]");
    if (!(lambda >= 0.0)) throw ConfigError("replay.lambda must be >= 0");
  }
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(ReplayConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  const ReplayConfig& config() const { return cfg_; }
  std::size_t size() const { return old_.size() + new_.size(); }
  std::size_t capacity() const { return cfg_.capacity; }
  bool empty() const { return size() == 0; }
  int current_segment() const { return segment_; }
  double w_buffer() const { return w_buffer_; }
  std::size_t old_count() const { return old_.size(); }
  std::size_t new_count() const { return new_.size(); }

  double p_old() const { return empty() ? 0.0 : static_cast<double>(old_.size()) / static_cast<double>(size()); }
  double p_insert() const { return compute_p_insert(p_old(), w_buffer_, cfg_.p_base, cfg_.lambda); }

  void set_target(double w_buffer) {
    if (!(w_buffer >= 0.0 && w_buffer <= 1.0))
      throw ConfigError("w_buffer must be in [0, 1], got " + std::to_string(w_buffer));
    w_buffer_ = w_buffer;
  }

  /// Every stored entry becomes old relative to new_segment.
  void rollover(int new_segment) {
    if (new_segment < segment_) throw UsageError("rollover: segments must not go backwards");
    segment_ = new_segment;
    for (auto& e : new_) old_.push_back(std::move(e));
    new_.clear();
  }

  /// Admits the entry with probability P_insert. At capacity, evicts a random new entry while
  /// p_old < w_buffer, otherwise a random old one.
  bool offer(BufferEntry entry, Rng& rng) {
    if (entry.trajectory.generation != segment_)
      throw UsageError("offer: entry generation " + std::to_string(entry.trajectory.generation) +
                       " != current segment " + std::to_string(segment_));
    const double p = p_insert();
    const double u = uniform01(rng);
    if (!(u < p)) return false;
    if (size() >= cfg_.capacity) evict(rng);
    entry.trajectory.is_replay = false;
    new_.push_back(std::move(entry));
    return true;
  }

  /// Entry i of the logical concatenation [old..., new...].
  const BufferEntry& at(std::size_t i) const { return i < old_.size() ? old_[i] : new_.at(i - old_.size()); }

 private:
  void evict(Rng& rng) {
    auto remove_from = [&](std::vector<BufferEntry>& v) {
      const std::size_t k = uniform_index(rng, v.size());
      std::swap(v[k], v.back());
      v.pop_back();
    };
    const bool prefer_new = p_old() < w_buffer_;
    if ((prefer_new && !new_.empty()) || old_.empty())
      remove_from(new_);
    else
      remove_from(old_);
  }

  ReplayConfig cfg_;
  int segment_ = 0;
  double w_buffer_ = 0.75;
  std::vector<BufferEntry> old_;
  std::vector<BufferEntry> new_;
};

/// floor(ratio * B) replayed unrolls drawn uniformly (with replacement) from the buffer,
/// the remaining B - floor(ratio * B) taken in order from `fresh`. With an empty buffer the
/// replay share falls back to fresh data.
inline TrainBatch sample_batch(const ReplayBuffer& buffer, std::span<const Trajectory> fresh, std::size_t batch_size,
                               double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw UsageError("sample_batch: ratio must be in [0, 1]");
  std::size_t n_replay = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(batch_size)));
  if (n_replay > 0 && buffer.empty()) {
    warn("sample_batch: replay requested from an empty buffer; using fresh data only");
    n_replay = 0;
  }
  const std::size_t n_fresh = batch_size - n_replay;
  if (fresh.size() < n_fresh)
    throw UsageError("sample_batch: need " + std::to_string(n_fresh) + " fresh unrolls, have " +
                     std::to_string(fresh.size()));
  TrainBatch batch;
  batch.reserve(batch_size);
  for (std::size_t k = 0; k < n_replay; ++k) {
    Trajectory t = buffer.at(uniform_index(rng, buffer.size())).trajectory;
    t.is_replay = true;
    batch.push_back(std::move(t));
  }
  for (std::size_t k = 0; k < n_fresh; ++k) {
    Trajectory t = fresh[k];
    t.is_replay = false;
    batch.push_back(std::move(t));
  }
  return batch;
}

}  // namespace sdw
