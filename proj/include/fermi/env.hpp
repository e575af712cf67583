#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "fermi/config.hpp"
#include "fermi/reward.hpp"
#include "fermi/rng.hpp"

namespace fermi {

enum class TaskKind : std::uint8_t { URLLC = 0, eMBB = 1, mMTC = 2 };
inline constexpr int kNumTaskKinds = 3;

struct TaskClass {
  double size_mb;
  double deadline_s;
};

/// Size and deadline per service class.
TaskClass task_class(TaskKind kind);
std::string_view to_string(TaskKind kind);

inline constexpr double kBitsPerMb = 8e6;

struct Task {
  TaskKind kind = TaskKind::URLLC;
  double size_bits = 0.0;
  double deadline_s = 0.0;
  int created_step = 0;
  int attempts = 0;

  double size_mb() const { return size_bits / kBitsPerMb; }
};

enum class AppDecision : std::uint8_t { Local = 0, Offload = 1 };

inline constexpr int kNumCpuLevels = 3;
inline constexpr std::array<double, kNumCpuLevels> kCpuMultipliers{0.5, 1.0, 1.5};

struct ActionVector {
  AppDecision app = AppDecision::Local;
  int mac = 0;
  int cpu_level = 1;
  bool operator==(const ActionVector&) const = default;
};

/// Execution model constants. A 1 MB task at multiplier 1.0 runs in 1 s and
/// costs 0.02 of the battery; compute energy scales with the square of the
/// multiplier. A transmit attempt costs 0.01 at unit channel gain.
inline constexpr double kLocalRateMbPerS = 1.0;
inline constexpr double kComputeEnergyPerMb = 0.02;
inline constexpr double kTxEnergyPerAttempt = 0.01;
inline constexpr double kTxPowerControlCap = 4.0;
inline constexpr double kServerRateMbPerS = 4.0;
inline constexpr double kPathLossRefM = 50.0;
inline constexpr double kGainFloor = 1e-3;

double local_latency_s(double size_mb, int cpu_level);
double compute_energy(double size_mb, int cpu_level);
double transmit_energy(double gain);
double path_loss(double distance_m);

inline constexpr std::size_t kObsDim = 8;

/// Local view of one agent: queue fill, energy, gain, task one-hot, cpu
/// usage and normalised speed.
struct Observation {
  std::array<double, kObsDim> features{};

  double queue_len_norm() const { return features[0]; }
  double energy() const { return features[1]; }
  double channel_gain() const { return features[2]; }
  std::array<double, 3> task_one_hot() const { return {features[3], features[4], features[5]}; }
  double cpu_usage() const { return features[6]; }
  double mobility_speed_norm() const { return features[7]; }
  bool operator==(const Observation&) const = default;
};

struct AgentState {
  std::array<double, 2> position{};
  double velocity = 0.1;
  double heading = 0.0;
  std::deque<Task> queue;
  double energy = 1.0;
  double cpu_usage = 0.0;
  double gain = 1.0;
  std::deque<bool> reliability_window;
  std::deque<int> channel_window;
  std::vector<int> channel_counts;  // over channel_window
  long mac_attempts = 0;            // this episode
  long mac_successes = 0;           // this episode
  bool penalized = false;
};

struct StepOutcome {
  bool has_task = false;
  bool resolved = false;
  bool task_succeeded = false;
  bool offloaded = false;
  bool dropped_arrival = false;  // arrival lost to a full queue
  TaskKind kind = TaskKind::URLLC;
  double latency_s = 0.0;
  double deadline_s = 1.0;
  double energy_tx = 0.0;
  double energy_comp = 0.0;
  double energy_spent = 0.0;
  bool mac_attempted = false;
  bool mac_succeeded = false;
  int channel = -1;
  double bits_delivered = 0.0;
  double se_bps_hz = 0.0;
  bool penalized = false;
};

enum class MacGrant : std::uint8_t { NotRequested, Granted, Denied };

struct EnvState {
  int step = 0;
  std::uint64_t seed = 0;
  std::vector<AgentState> agents;
  std::vector<Rng> agent_rng;
  Rng mac_rng;
};

struct Spawned {
  Task task;
  bool queued = false;
};

/// Discrete-time multi-agent edge environment. Phases per step: mobility,
/// channel gains, MAC arbitration, execution, bookkeeping, arrivals.
class Environment {
 public:
  explicit Environment(EnvConfig cfg);

  const EnvState& reset(std::uint64_t seed);

  Observation observe(int agent) const;
  void update_mobility();
  double channel_gain(int agent);
  std::vector<MacGrant> mac_arbitrate(const std::vector<std::vector<int>>& requests);
  std::vector<StepOutcome> step(std::span<const ActionVector> actions);
  Spawned spawn_task(int agent);

  /// Jain index over per-agent successful MAC attempts this episode.
  double jain_fairness() const;
  /// Mean normalised channel-access entropy over agents.
  double average_channel_entropy() const;
  double hybrid_fairness(const RewardWeights& w) const;
  double agent_reliability(int agent) const;
  Ratio agent_mac_rate(int agent) const;

  /// Full text dump of the state, including RNG engines.
  std::string serialize() const;

  const EnvConfig& config() const { return cfg_; }
  const EnvState& state() const { return state_; }
  EnvState& mutable_state() { return state_; }
  AgentState& agent(int i);
  const AgentState& agent(int i) const;
  int num_agents() const { return cfg_.num_agents; }
  int current_step() const { return state_.step; }

 private:
  void push_reliability(AgentState& a, bool ok);
  void push_channel(AgentState& a, int channel);
  void check_agent(int agent) const;

  EnvConfig cfg_;
  EnvState state_;
};

}  // namespace fermi
