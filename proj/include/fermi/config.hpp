#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fermi/reward.hpp"

namespace fermi {

/// Environment parameters. Defaults follow the reference 6G edge scenario.
struct EnvConfig {
  int num_agents = 5;
  int num_channels = 3;
  int steps = 20;
  double grid_size = 100.0;
  std::array<double, 2> server_pos{50.0, 50.0};
  double retry_prob = 0.3;
  double noise_std = 0.05;
  double tx_delay_s = 2.0;
  double energy_threshold = 0.2;
  int queue_max = 10;
  int channel_capacity = 2;
  double bandwidth_hz = 150e9;
  double arrival_prob = 0.8;
  int max_attempts = 3;
  double min_speed = 0.1;
  double max_speed = 1.0;
  double heading_noise = 0.5;  // std-dev of the per-step heading perturbation, rad
  double step_s = 1.0;

  // Test hook: (agent, energy) pairs applied after every reset.
  std::vector<std::pair<int, double>> initial_energy;

  void validate() const;
  bool operator==(const EnvConfig&) const = default;
};

enum class PolicyKind { Fermi6G, FedMarlBaseline, Random };

std::string_view to_string(PolicyKind p);
PolicyKind parse_policy(std::string_view name);

enum class OptimizerKind { Sgd, Adam };

std::string_view to_string(OptimizerKind o);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainingConfig {
  EnvConfig env;
  RewardWeights weights;
  PolicyKind policy = PolicyKind::Fermi6G;

  int episodes = 800;
  int buffer = 10000;  // transitions
  int batch = 16;
  double gamma = 0.99;
  double lr = 1e-3;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay = 0.995;
  int sync_freq = 10;
  int sequence_length = 20;
  double clip_norm = 1.0;
  int smoothing_window = 10;
  int agg_interval = 10;
  bool reward_adaptation = false;
  std::uint64_t seed = 1;

  int hidden = 32;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double reward_scale = 0.02;  // applied to TD targets only
  double per_alpha = 0.6;
  double per_beta_start = 0.4;
  double priority_eta = 0.5;
  bool secure_aggregation = true;

  void validate() const;
  bool operator==(const TrainingConfig&) const = default;
};

/// Parses `KEY = value` lines with an optional `[reward]` section for the
/// weight vector. Unknown keys and malformed values raise ConfigError naming
/// the key. Missing keys keep their defaults.
TrainingConfig parse_config(std::string_view text);
TrainingConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(print_config(c)) == c.
std::string print_config(const TrainingConfig& c);

}  // namespace fermi
