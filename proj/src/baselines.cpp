#include "fermi/baselines.hpp"

#include "fermi/errors.hpp"

namespace fermi {

ActionVector random_policy(int num_channels, Rng& rng) {
  if (num_channels < 1) throw DomainError("need at least one channel");
  ActionVector a;
  a.app = static_cast<AppDecision>(uniform_int(rng, 2));
  a.mac = uniform_int(rng, num_channels);
  a.cpu_level = uniform_int(rng, kNumCpuLevels);
  return a;
}

int round_robin_mac(long step, int agent, int num_channels) {
  if (num_channels < 1) throw DomainError("need at least one channel");
  if (step < 0 || agent < 0) throw DomainError("step and agent must be non-negative");
  return static_cast<int>((static_cast<long>(agent) + step) % num_channels);
}

int least_used_channel(std::span<const long> loads) {
  if (loads.empty()) throw DomainError("need at least one channel");
  std::size_t best = 0;
  for (std::size_t c = 1; c < loads.size(); ++c)
    if (loads[c] < loads[best]) best = c;
  return static_cast<int>(best);
}

ActionVector app_only_action(AppDecision app, std::span<const long> loads) {
  return {app, least_used_channel(loads), kFixedCpuLevel};
}

BaselinePolicy::BaselinePolicy(BaselineKind kind, int agent, int num_channels)
    : kind_(kind), agent_(agent), k_(num_channels) {
  if (num_channels < 1) throw DomainError("need at least one channel");
}

ActionVector BaselinePolicy::act(Rng& rng, std::span<const long> loads, AppDecision app) {
  switch (kind_) {
    case BaselineKind::Random:
      return random_policy(k_, rng);
    case BaselineKind::RoundRobinMac: {
      ActionVector a{AppDecision::Offload, round_robin_mac(cursor_, agent_, k_), kFixedCpuLevel};
      ++cursor_;
      return a;
    }
    case BaselineKind::AppOnlyLearner:
      return app_only_action(app, loads);
  }
  return {};
}

}  // namespace fermi
