#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fermi/agent.hpp"
#include "fermi/config.hpp"
#include "fermi/env.hpp"
#include "fermi/metrics.hpp"
#include "fermi/reward.hpp"
#include "fermi/secure_agg.hpp"

namespace fermi {

/// Reward inputs for one agent step. Steps that do not complete a task on
/// time are charged the full energy budget, a latency of at least twice the
/// deadline and zero energy efficiency.
RewardInputs score_inputs(const StepOutcome& o, double remaining_energy, double energy_threshold,
                          double fairness, double reliability, double mac_rate);

/// Step reward; zero when the agent had no task.
double step_reward(const StepOutcome& o, const RewardInputs& in, const RewardWeights& w);

struct RoundReport {
  std::uint32_t round = 0;
  std::vector<std::uint16_t> participants;
  bool skipped = false;  // empty participant set
  bool aborted = false;
  std::string error;
  std::uint64_t comm_bytes = 0;
  double divergence_before = 0.0;  // mean L2 distance to the previous global
};

struct EpisodeResult {
  MetricsRow row;
  std::vector<double> agent_rewards;  // per-agent mean step reward
  std::vector<double> final_energy;
  long faults = 0;
  std::optional<RoundReport> round;
  /// Per-channel count of channel choices made by the policy this episode.
  std::vector<long> channel_choices;
};

/// Runs training episodes and federated rounds for one configuration.
class Trainer {
 public:
  explicit Trainer(TrainingConfig cfg);

  /// One episode: observe, recurrent update, act, step, store, learn.
  /// With learn=false no replay or updates happen and epsilon is ignored in
  /// favour of greedy actions.
  EpisodeResult run_episode(int episode, bool learn);

  /// Eligibility, quantize, mask, aggregate, broadcast. An abort leaves
  /// every agent's parameters untouched.
  RoundReport federated_round(std::uint32_t round);

  /// Full run. `on_episode` sees every result as it is produced.
  std::vector<MetricsRow> train(const std::function<void(const EpisodeResult&)>& on_episode = {});

  /// Greedy rollouts from the current parameters; no learning, no rounds.
  std::vector<MetricsRow> evaluate(int episodes, std::uint64_t seed);

  /// Loads identical parameters into every agent.
  void load_global(std::span<const double> params);

  const TrainingConfig& config() const { return cfg_; }
  const Environment& env() const { return env_; }
  Environment& env() { return env_; }
  int num_agents() const { return cfg_.env.num_agents; }
  DrqnAgent& agent(int i) { return *agents_.at(static_cast<std::size_t>(i)); }
  const DrqnAgent& agent(int i) const { return *agents_.at(static_cast<std::size_t>(i)); }
  bool has_learners() const { return !agents_.empty(); }
  const std::vector<double>& global_params() const { return global_; }
  double epsilon() const { return epsilon_; }
  const RewardWeights& weights() const { return weights_; }
  const std::vector<RoundReport>& rounds() const { return rounds_; }
  double divergence() const;

 private:
  std::array<bool, kNumHeads> learned_heads() const;
  void adapt(const MetricsRow& row);

  TrainingConfig cfg_;
  RewardWeights weights_;
  Environment env_;
  std::vector<std::unique_ptr<DrqnAgent>> agents_;
  std::vector<secagg::KeyPair> keys_;
  secagg::Aggregator aggregator_;
  Rng policy_rng_;
  std::vector<double> global_;
  double epsilon_;
  std::uint64_t episode_seed_base_;
  std::vector<RoundReport> rounds_;
  std::vector<MetricsRow> history_;
};

}  // namespace fermi
