#include "fermi/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "fermi/errors.hpp"

namespace fermi {

TaskClass task_class(TaskKind kind) {
  switch (kind) {
    case TaskKind::URLLC: return {1.0, 2.0};
    case TaskKind::eMBB: return {3.0, 5.0};
    case TaskKind::mMTC: return {0.5, 10.0};
  }
  return {1.0, 2.0};
}

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::URLLC: return "URLLC";
    case TaskKind::eMBB: return "eMBB";
    case TaskKind::mMTC: return "mMTC";
  }
  return "?";
}

double local_latency_s(double size_mb, int cpu_level) {
  return size_mb / (kLocalRateMbPerS * kCpuMultipliers.at(cpu_level));
}

double compute_energy(double size_mb, int cpu_level) {
  const double m = kCpuMultipliers.at(cpu_level);
  return kComputeEnergyPerMb * size_mb * m * m;
}

// Path-loss compensating power control, capped.
double transmit_energy(double gain) {
  return kTxEnergyPerAttempt * std::min(1.0 / std::max(gain, kGainFloor), kTxPowerControlCap);
}

double path_loss(double distance_m) {
  const double r = distance_m / kPathLossRefM;
  return 1.0 / (1.0 + r * r);
}

Environment::Environment(EnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  reset(0);
}

void Environment::check_agent(int agent) const {
  if (agent < 0 || agent >= cfg_.num_agents)
    throw LookupError(fmt::format("unknown agent id {}", agent));
}

AgentState& Environment::agent(int i) {
  check_agent(i);
  return state_.agents[static_cast<std::size_t>(i)];
}

const AgentState& Environment::agent(int i) const {
  check_agent(i);
  return state_.agents[static_cast<std::size_t>(i)];
}

const EnvState& Environment::reset(std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(cfg_.num_agents);
  state_ = EnvState{};
  state_.seed = seed;
  state_.step = 0;
  state_.agents.assign(n, AgentState{});
  state_.agent_rng.clear();
  for (std::size_t i = 0; i < n; ++i) state_.agent_rng.emplace_back(derive_seed(seed, stream::kEnvAgent, i));
  state_.mac_rng.seed(derive_seed(seed, stream::kEnvMac));

  for (std::size_t i = 0; i < n; ++i) {
    auto& a = state_.agents[i];
    auto& rng = state_.agent_rng[i];
    std::uniform_real_distribution<double> pos(0.0, cfg_.grid_size);
    a.position = {pos(rng), pos(rng)};
    a.velocity = std::uniform_real_distribution<double>(cfg_.min_speed, cfg_.max_speed)(rng);
    a.heading = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    a.energy = 1.0;
    a.channel_counts.assign(static_cast<std::size_t>(cfg_.num_channels), 0);
  }
  for (auto [agent, e] : cfg_.initial_energy) state_.agents[static_cast<std::size_t>(agent)].energy = e;
  for (int i = 0; i < cfg_.num_agents; ++i) {
    spawn_task(i);
    state_.agents[static_cast<std::size_t>(i)].gain = channel_gain(i);
    auto& a = state_.agents[static_cast<std::size_t>(i)];
    a.penalized = a.energy < cfg_.energy_threshold;
  }
  return state_;
}

Observation Environment::observe(int agent_id) const {
  const auto& a = agent(agent_id);
  Observation o;
  o.features[0] = std::min(1.0, static_cast<double>(a.queue.size()) / cfg_.queue_max);
  o.features[1] = a.energy;
  o.features[2] = a.gain;
  if (!a.queue.empty()) o.features[3 + static_cast<int>(a.queue.front().kind)] = 1.0;
  o.features[6] = a.cpu_usage;
  o.features[7] = a.velocity / cfg_.max_speed;
  return o;
}

void Environment::update_mobility() {
  for (int i = 0; i < cfg_.num_agents; ++i) {
    auto& a = state_.agents[static_cast<std::size_t>(i)];
    auto& rng = state_.agent_rng[static_cast<std::size_t>(i)];
    if (cfg_.heading_noise > 0.0)
      a.heading += std::normal_distribution<double>(0.0, cfg_.heading_noise)(rng);
    a.heading = std::remainder(a.heading, 2.0 * std::numbers::pi);
    a.velocity = std::clamp(a.velocity + std::normal_distribution<double>(0.0, 0.05)(rng),
                            cfg_.min_speed, cfg_.max_speed);
    const double d = a.velocity * cfg_.step_s;
    a.position[0] = std::clamp(a.position[0] + d * std::cos(a.heading), 0.0, cfg_.grid_size);
    a.position[1] = std::clamp(a.position[1] + d * std::sin(a.heading), 0.0, cfg_.grid_size);
  }
}

double Environment::channel_gain(int agent_id) {
  const auto& a = agent(agent_id);
  const double dx = a.position[0] - cfg_.server_pos[0];
  const double dy = a.position[1] - cfg_.server_pos[1];
  double g = path_loss(std::hypot(dx, dy));
  if (cfg_.noise_std > 0.0) {
    auto& rng = state_.agent_rng[static_cast<std::size_t>(agent_id)];
    g *= 1.0 + std::normal_distribution<double>(0.0, cfg_.noise_std)(rng);
  }
  return std::max(g, kGainFloor);
}

std::vector<MacGrant> Environment::mac_arbitrate(const std::vector<std::vector<int>>& requests) {
  std::vector<MacGrant> out(static_cast<std::size_t>(cfg_.num_agents), MacGrant::NotRequested);
  const auto cap = static_cast<std::size_t>(cfg_.channel_capacity);
  for (const auto& contenders : requests) {
    std::vector<int> order = contenders;
    if (order.size() > cap) std::shuffle(order.begin(), order.end(), state_.mac_rng);
    for (std::size_t j = 0; j < order.size(); ++j) {
      check_agent(order[j]);
      out[static_cast<std::size_t>(order[j])] = j < cap ? MacGrant::Granted : MacGrant::Denied;
    }
  }
  return out;
}

Spawned Environment::spawn_task(int agent_id) {
  auto& a = agent(agent_id);
  auto& rng = state_.agent_rng[static_cast<std::size_t>(agent_id)];
  const auto kind = static_cast<TaskKind>(uniform_int(rng, kNumTaskKinds));
  const auto cls = task_class(kind);
  Spawned s;
  s.task = Task{kind, cls.size_mb * kBitsPerMb, cls.deadline_s, state_.step, 0};
  if (static_cast<int>(a.queue.size()) < cfg_.queue_max) {
    a.queue.push_back(s.task);
    s.queued = true;
  } else {
    push_reliability(a, false);
  }
  return s;
}

void Environment::push_reliability(AgentState& a, bool ok) {
  a.reliability_window.push_back(ok);
  while (static_cast<int>(a.reliability_window.size()) > cfg_.steps) a.reliability_window.pop_front();
}

void Environment::push_channel(AgentState& a, int channel) {
  a.channel_window.push_back(channel);
  ++a.channel_counts[static_cast<std::size_t>(channel)];
  while (static_cast<int>(a.channel_window.size()) > cfg_.steps) {
    --a.channel_counts[static_cast<std::size_t>(a.channel_window.front())];
    a.channel_window.pop_front();
  }
}

std::vector<StepOutcome> Environment::step(std::span<const ActionVector> actions) {
  const auto n = static_cast<std::size_t>(cfg_.num_agents);
  if (actions.size() != n)
    throw ShapeError(fmt::format("expected {} actions, got {}", n, actions.size()));
  for (const auto& act : actions) {
    if (act.mac < 0 || act.mac >= cfg_.num_channels) throw ShapeError("MAC channel out of range");
    if (act.cpu_level < 0 || act.cpu_level >= kNumCpuLevels) throw ShapeError("CPU level out of range");
    if (act.app != AppDecision::Local && act.app != AppDecision::Offload)
      throw ShapeError("invalid application decision");
  }

  update_mobility();
  for (int i = 0; i < cfg_.num_agents; ++i) state_.agents[static_cast<std::size_t>(i)].gain = channel_gain(i);

  std::vector<std::vector<int>> requests(static_cast<std::size_t>(cfg_.num_channels));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = state_.agents[i];
    if (!a.queue.empty() && actions[i].app == AppDecision::Offload &&
        a.energy >= transmit_energy(a.gain))
      requests[static_cast<std::size_t>(actions[i].mac)].push_back(static_cast<int>(i));
  }
  const auto grants = mac_arbitrate(requests);

  std::vector<StepOutcome> outcomes(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = state_.agents[i];
    auto& rng = state_.agent_rng[i];
    auto& out = outcomes[i];
    const auto& act = actions[i];
    a.cpu_usage = 0.0;
    if (a.queue.empty()) continue;

    Task& task = a.queue.front();
    out.has_task = true;
    out.kind = task.kind;
    out.deadline_s = task.deadline_s;
    const double wait = (state_.step - task.created_step) * cfg_.step_s;
    const double size_mb = task.size_mb();

    if (act.app == AppDecision::Local) {
      const double e = compute_energy(size_mb, act.cpu_level);
      out.resolved = true;
      if (a.energy < e) {
        out.latency_s = wait + task.attempts * cfg_.tx_delay_s;
      } else {
        out.energy_comp = e;
        out.latency_s = wait + task.attempts * cfg_.tx_delay_s + local_latency_s(size_mb, act.cpu_level);
        out.task_succeeded = out.latency_s <= task.deadline_s;
        a.cpu_usage = kCpuMultipliers[static_cast<std::size_t>(act.cpu_level)] / kCpuMultipliers.back();
      }
    } else {
      out.offloaded = true;
      out.channel = act.mac;
      const auto grant = grants[i];
      if (grant == MacGrant::NotRequested) {
        // Not enough energy left to transmit.
        out.resolved = true;
        out.latency_s = wait + task.attempts * cfg_.tx_delay_s;
      } else {
        ++task.attempts;
        out.mac_attempted = true;
        out.energy_tx = transmit_energy(a.gain);
        ++a.mac_attempts;
        push_channel(a, act.mac);
        const double tx_time = task.attempts * cfg_.tx_delay_s;
        if (grant == MacGrant::Granted) {
          ++a.mac_successes;
          out.mac_succeeded = true;
          out.resolved = true;
          out.latency_s = wait + tx_time + size_mb / kServerRateMbPerS;
          out.task_succeeded = out.latency_s <= task.deadline_s;
          out.se_bps_hz = task.size_bits / (cfg_.bandwidth_hz * cfg_.tx_delay_s);
        } else {
          out.latency_s = wait + tx_time;
          const bool retry = task.attempts < cfg_.max_attempts && uniform01(rng) < cfg_.retry_prob;
          out.resolved = !retry;
        }
      }
    }

    out.energy_spent = out.energy_comp + out.energy_tx;
    a.energy = std::max(0.0, a.energy - out.energy_spent);
    if (out.task_succeeded) out.bits_delivered = task.size_bits;
    if (out.resolved) {
      push_reliability(a, out.task_succeeded);
      a.queue.pop_front();
    }
  }

  ++state_.step;
  for (std::size_t i = 0; i < n; ++i) {
    auto& rng = state_.agent_rng[i];
    if (uniform01(rng) < cfg_.arrival_prob) {
      outcomes[i].dropped_arrival = !spawn_task(static_cast<int>(i)).queued;
    }
    auto& a = state_.agents[i];
    a.penalized = a.energy < cfg_.energy_threshold;
    outcomes[i].penalized = a.penalized;
  }
  return outcomes;
}

double Environment::jain_fairness() const {
  std::vector<double> x;
  x.reserve(state_.agents.size());
  for (const auto& a : state_.agents) x.push_back(static_cast<double>(a.mac_successes));
  return jain_index(x);
}

double Environment::average_channel_entropy() const {
  if (cfg_.num_channels < 2 || state_.agents.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(cfg_.num_channels);
  std::vector<double> h;
  h.reserve(state_.agents.size());
  std::vector<double> p(k);
  for (const auto& a : state_.agents) {
    if (a.channel_window.empty()) {
      h.push_back(0.0);
      continue;
    }
    const double total = static_cast<double>(a.channel_window.size());
    for (std::size_t c = 0; c < k; ++c) p[c] = a.channel_counts[c] / total;
    h.push_back(channel_entropy(p, k));
  }
  return average_entropy(h);
}

double Environment::hybrid_fairness(const RewardWeights& w) const {
  return fermi::hybrid_fairness(jain_fairness(), average_channel_entropy(), w);
}

double Environment::agent_reliability(int agent_id) const {
  const auto& win = agent(agent_id).reliability_window;
  long ok = 0;
  for (bool b : win) ok += b;
  return win.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(win.size());
}

Ratio Environment::agent_mac_rate(int agent_id) const {
  const auto& a = agent(agent_id);
  return mac_success_rate(a.mac_successes, a.mac_attempts);
}

std::string Environment::serialize() const {
  std::ostringstream os;
  os.precision(17);
  os << "step " << state_.step << " seed " << state_.seed << '\n';
  for (std::size_t i = 0; i < state_.agents.size(); ++i) {
    const auto& a = state_.agents[i];
    os << "agent " << i << " pos " << a.position[0] << ' ' << a.position[1] << " vel " << a.velocity
       << " heading " << a.heading << " energy " << a.energy << " cpu " << a.cpu_usage << " gain "
       << a.gain << " mac " << a.mac_attempts << '/' << a.mac_successes << " pen " << a.penalized
       << '\n';
    os << "  queue";
    for (const auto& t : a.queue)
      os << ' ' << static_cast<int>(t.kind) << ':' << t.size_bits << ':' << t.deadline_s << ':'
         << t.created_step << ':' << t.attempts;
    os << "\n  rel";
    for (bool b : a.reliability_window) os << ' ' << b;
    os << "\n  chan";
    for (int c : a.channel_window) os << ' ' << c;
    os << "\n  rng " << state_.agent_rng[i] << '\n';
  }
  os << "mac_rng " << state_.mac_rng << '\n';
  return os.str();
}

}  // namespace fermi
