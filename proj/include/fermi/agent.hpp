#pragma once

#include <array>
#include <optional>
#include <vector>

#include "fermi/config.hpp"
#include "fermi/drqn.hpp"
#include "fermi/replay.hpp"
#include "fermi/rng.hpp"

namespace fermi {

/// Epsilon-greedy per head; ties go to the lowest index. Heads switched off
/// in `active` return index 0 without consuming randomness.
std::array<int, kNumHeads> select_action(const QValues& q, double epsilon, Rng& rng,
                                         std::array<bool, kNumHeads> active = {true, true, true});

int argmax_lowest(const std::vector<double>& v);

/// max(eps_end, eps * decay)
double decay_epsilon(double eps, double eps_end = 0.05, double decay = 0.995);

/// Per-step extras feeding the replay priority.
struct StepSideInfo {
  double delay_norm = 0.0;
  bool interference = false;
};

/// One decentralised learner: online and target recurrent Q-networks,
/// prioritized sequence replay and an optimizer.
class DrqnAgent {
 public:
  DrqnAgent(const TrainingConfig& cfg, int num_channels, std::uint64_t seed,
            std::array<bool, kNumHeads> heads = {true, true, true});

  void begin_episode();
  /// Advances the recurrent state on `obs` and returns Q-values.
  QValues observe(const Observation& obs);
  std::array<int, kNumHeads> act(const QValues& q, double epsilon);
  /// Records the transition (obs_t, a_t, r_t, obs_t+1).
  void record(const Observation& obs, const std::array<int, kNumHeads>& action, double reward,
              const Observation& next_obs, bool done, const StepSideInfo& side);
  /// Flushes recorded steps into replay in chunks of sequence_length.
  void end_episode();
  /// One TD update if replay holds data. Returns nullopt when nothing was
  /// sampled.
  std::optional<TdResult> learn();

  /// Hard copy online -> target.
  void sync_target();
  /// Replaces online and target parameters (federated broadcast).
  void set_global(std::span<const double> params);

  const DrqnNet& net() const { return net_; }
  DrqnNet& net() { return net_; }
  const DrqnNet& target() const { return target_; }
  const ReplayBuffer& replay() const { return replay_; }
  long updates() const { return updates_; }
  long faults() const { return faults_; }
  std::array<bool, kNumHeads> heads() const { return heads_; }
  /// Beta for importance weights, annealed linearly over the run.
  double current_beta() const;

 private:
  void flush_chunk();

  TrainingConfig cfg_;
  std::array<bool, kNumHeads> heads_;
  DrqnNet net_;
  DrqnNet target_;
  Optimizer optimizer_;
  ReplayBuffer replay_;
  Rng rng_;
  HiddenState hidden_;
  TdOptions td_opts_;

  SequenceTransition pending_;
  double pending_delay_ = 0.0;
  int pending_interference_ = 0;

  long updates_ = 0;
  long faults_ = 0;
  long total_updates_planned_ = 1;
};

}  // namespace fermi
