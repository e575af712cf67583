#include "fermi/replay.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fermi/errors.hpp"

namespace fermi {

void SequenceTransition::check() const {
  const std::size_t n = actions.size();
  if (n == 0) throw ShapeError("empty sequence");
  if (obs.size() != n + 1 || rewards.size() != n || done.size() != n)
    throw ShapeError(fmt::format("misaligned sequence: {} obs, {} actions, {} rewards, {} done flags",
                                 obs.size(), n, rewards.size(), done.size()));
}

SumTree::SumTree(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {
  base_ = 1;
  while (base_ < capacity_) base_ <<= 1;
  nodes_.assign(2 * base_, 0.0);
}

void SumTree::set(std::size_t leaf, double value) {
  if (leaf >= capacity_) throw LookupError(fmt::format("sum tree leaf {} out of range", leaf));
  if (!(value >= 0.0) || !std::isfinite(value)) throw DomainError("priority must be finite and non-negative");
  std::size_t i = base_ + leaf;
  nodes_[i] = value;
  // Recompute sums from children to avoid drift from incremental updates.
  for (i >>= 1; i >= 1; i >>= 1) nodes_[i] = nodes_[2 * i] + nodes_[2 * i + 1];
}

std::size_t SumTree::find(double mass) const {
  std::size_t i = 1;
  while (i < base_) {
    const double left = nodes_[2 * i];
    if (mass < left || nodes_[2 * i + 1] <= 0.0) {
      i = 2 * i;
    } else {
      mass -= left;
      i = 2 * i + 1;
    }
  }
  std::size_t leaf = i - base_;
  // Rounding can land on a zero-priority leaf; walk back to a positive one.
  while (leaf > 0 && nodes_[base_ + leaf] <= 0.0) --leaf;
  return leaf;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity_transitions, std::size_t sequence_length, double alpha)
    : capacity_(sequence_length ? capacity_transitions / sequence_length : 0),
      sequence_length_(sequence_length),
      alpha_(alpha),
      tree_(std::max<std::size_t>(capacity_, 1)) {
  if (sequence_length == 0 || capacity_ == 0)
    throw ConfigError("replay buffer must hold at least one sequence");
  if (!(alpha >= 0.0)) throw ConfigError("PER exponent must be non-negative");
  items_.reserve(capacity_);
  priorities_.reserve(capacity_);
}

void ReplayBuffer::add(SequenceTransition seq) {
  seq.check();
  if (seq.length() > sequence_length_)
    throw ShapeError(fmt::format("sequence of length {} exceeds {}", seq.length(), sequence_length_));
  const double p = max_priority_;
  if (items_.size() < capacity_) {
    transitions_ += seq.length();
    items_.push_back(std::move(seq));
    priorities_.push_back(p);
    tree_.set(items_.size() - 1, std::pow(p, alpha_));
    return;
  }
  transitions_ -= items_[next_].length();
  transitions_ += seq.length();
  items_[next_] = std::move(seq);
  priorities_[next_] = p;
  tree_.set(next_, std::pow(p, alpha_));
  next_ = (next_ + 1) % capacity_;
}

double ReplayBuffer::probability(std::size_t index) const {
  if (index >= items_.size()) throw LookupError("replay index out of range");
  return tree_.get(index) / tree_.total();
}

SampledBatch ReplayBuffer::sample(std::size_t batch, double beta, Rng& rng) const {
  if (items_.empty()) throw LookupError("cannot sample from an empty replay buffer");
  SampledBatch s;
  s.indices.reserve(batch);
  s.is_weights.reserve(batch);
  const double total = tree_.total();
  const double n = static_cast<double>(items_.size());
  double max_w = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double mass = uniform01(rng) * total;
    const std::size_t idx = std::min(tree_.find(mass), items_.size() - 1);
    const double w = std::pow(n * tree_.get(idx) / total, -beta);
    s.indices.push_back(idx);
    s.is_weights.push_back(w);
    max_w = std::max(max_w, w);
  }
  for (double& w : s.is_weights) w /= max_w;
  return s;
}

void ReplayBuffer::update_priorities(const std::vector<std::size_t>& indices, const std::vector<double>& priorities) {
  if (indices.size() != priorities.size()) throw ShapeError("priority update size mismatch");
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const double p = priorities[j];
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("priorities must be positive");
    priorities_.at(indices[j]) = p;
    tree_.set(indices[j], std::pow(p, alpha_));
    max_priority_ = std::max(max_priority_, p);
  }
}

TrainBatch ReplayBuffer::make_batch(const SampledBatch& s) const {
  TrainBatch tb;
  tb.size = static_cast<int>(s.indices.size());
  int T = 0;
  for (auto i : s.indices) T = std::max(T, static_cast<int>(items_.at(i).length()));
  tb.steps = T;
  const int B = tb.size;
  tb.obs.assign(static_cast<std::size_t>(T + 1), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kObsDim), B));
  tb.actions.assign(static_cast<std::size_t>(T), std::vector<std::array<int, kNumHeads>>(static_cast<std::size_t>(B), {0, 0, 0}));
  tb.rewards = Eigen::MatrixXd::Zero(T, B);
  tb.done = Eigen::MatrixXd::Zero(T, B);
  tb.is_weights = s.is_weights;
  for (int b = 0; b < B; ++b) {
    const auto& seq = items_[s.indices[static_cast<std::size_t>(b)]];
    const int len = static_cast<int>(seq.length());
    tb.lengths.push_back(len);
    tb.delay_norm.push_back(seq.delay_norm);
    tb.interference.push_back(seq.interference);
    for (int t = 0; t <= len; ++t)
      for (std::size_t f = 0; f < kObsDim; ++f)
        tb.obs[static_cast<std::size_t>(t)](static_cast<Eigen::Index>(f), b) = seq.obs[static_cast<std::size_t>(t)].features[f];
    for (int t = 0; t < len; ++t) {
      tb.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] = seq.actions[static_cast<std::size_t>(t)];
      tb.rewards(t, b) = seq.rewards[static_cast<std::size_t>(t)];
      tb.done(t, b) = seq.done[static_cast<std::size_t>(t)];
    }
  }
  return tb;
}

}  // namespace fermi
