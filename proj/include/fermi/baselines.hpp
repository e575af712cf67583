#pragma once

#include <span>

#include "fermi/env.hpp"
#include "fermi/rng.hpp"

namespace fermi {

/// Uniform over every head.
ActionVector random_policy(int num_channels, Rng& rng);

/// (agent + step) mod k.
int round_robin_mac(long step, int agent, int num_channels);

/// Argmin of the loads, ties toward the lowest index.
int least_used_channel(std::span<const long> loads);

/// CPU level the app-only baseline never changes.
inline constexpr int kFixedCpuLevel = 1;

/// Heuristic part of the app-only baseline: the learned offload decision
/// plus least-used channel and the fixed CPU level.
ActionVector app_only_action(AppDecision app, std::span<const long> loads);

enum class BaselineKind { Random, RoundRobinMac, AppOnlyLearner };

/// Non-learning side of a baseline agent. The round-robin cursor advances
/// once per call; the app decision comes from outside for the app-only kind.
class BaselinePolicy {
 public:
  BaselinePolicy(BaselineKind kind, int agent, int num_channels);
  ActionVector act(Rng& rng, std::span<const long> loads, AppDecision app = AppDecision::Local);
  void reset() { cursor_ = 0; }
  long cursor() const { return cursor_; }
  BaselineKind kind() const { return kind_; }

 private:
  BaselineKind kind_;
  int agent_;
  int k_;
  long cursor_ = 0;
};

}  // namespace fermi
