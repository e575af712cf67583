#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fermi/drqn.hpp"
#include "fermi/env.hpp"
#include "fermi/rng.hpp"

namespace fermi {

/// One stored trajectory chunk. `obs` has one more entry than `actions`
/// (the successor of the last step).
struct SequenceTransition {
  std::vector<Observation> obs;
  std::vector<std::array<int, kNumHeads>> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> done;
  double delay_norm = 0.0;    // mean normalised delay over the chunk, [0,1]
  double interference = 0.0;  // fraction of steps with a denied MAC attempt

  std::size_t length() const { return actions.size(); }
  void check() const;
};

/// Binary sum tree over leaf priorities.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity = 1);
  void set(std::size_t leaf, double value);
  double get(std::size_t leaf) const { return nodes_[base_ + leaf]; }
  double total() const { return nodes_[1]; }
  /// Leaf whose cumulative range contains `mass`, for mass in [0, total).
  std::size_t find(double mass) const;
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::size_t base_;
  std::vector<double> nodes_;
};

struct SampledBatch {
  std::vector<std::size_t> indices;
  std::vector<double> is_weights;  // normalised so the largest is 1
};

/// Proportional prioritized replay over sequences. Capacity is expressed in
/// transitions; the buffer holds capacity / sequence_length sequences and
/// overwrites the oldest.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity_transitions, std::size_t sequence_length, double alpha);

  /// Stores a sequence at the current maximum priority.
  void add(SequenceTransition seq);
  SampledBatch sample(std::size_t batch, double beta, Rng& rng) const;
  void update_priorities(const std::vector<std::size_t>& indices, const std::vector<double>& priorities);

  /// Pads sampled sequences into a time-major training batch.
  TrainBatch make_batch(const SampledBatch& s) const;

  double probability(std::size_t index) const;
  double priority(std::size_t index) const { return priorities_.at(index); }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity_sequences() const { return capacity_; }
  std::size_t stored_transitions() const { return transitions_; }
  const SequenceTransition& at(std::size_t i) const { return items_.at(i); }

 private:
  std::size_t capacity_;
  std::size_t sequence_length_;
  double alpha_;
  SumTree tree_;
  std::vector<SequenceTransition> items_;
  std::vector<double> priorities_;
  std::size_t next_ = 0;
  std::size_t transitions_ = 0;
  double max_priority_ = 1.0;
};

}  // namespace fermi
