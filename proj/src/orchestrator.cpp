#include "fermi/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fermi/baselines.hpp"
#include "fermi/errors.hpp"
#include "fermi/logging.hpp"

namespace fermi {

RewardInputs score_inputs(const StepOutcome& o, double remaining_energy, double energy_threshold,
                          double fairness, double reliability, double mac_rate) {
  RewardInputs in;
  in.deadline_s = o.deadline_s;
  in.energy_max = 1.0;
  in.remaining_energy = remaining_energy;
  in.energy_threshold = energy_threshold;
  in.fairness = fairness;
  in.reliability = reliability;
  in.mac_rate = mac_rate;
  in.spectral_eff = o.se_bps_hz;
  if (o.task_succeeded) {
    in.latency_s = o.latency_s;
    in.energy = o.energy_spent;
    in.energy_comp = o.energy_comp;
    in.energy_tx = o.energy_tx;
    in.energy_eff = o.energy_spent > 0.0 ? energy_efficiency(o.bits_delivered / kBitsPerMb, o.energy_spent) : 0.0;
  } else {
    in.latency_s = std::max(o.latency_s, 2.0 * o.deadline_s);
    in.energy = in.energy_max;
    const double spent = o.energy_comp + o.energy_tx;
    const double comp_share = spent > 0.0 ? o.energy_comp / spent : 0.5;
    in.energy_comp = in.energy * comp_share;
    in.energy_tx = in.energy - in.energy_comp;
    in.energy_eff = 0.0;
  }
  return in;
}

double step_reward(const StepOutcome& o, const RewardInputs& in, const RewardWeights& w) {
  if (!o.has_task) return 0.0;
  return total_reward(in, w).total;
}

namespace {

double l2_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

struct Accumulator {
  double reward = 0.0;
  long agent_steps = 0;
  long resolved = 0;  // includes arrivals dropped on a full queue
  long succeeded = 0;
  double latency = 0.0;
  long latency_n = 0;
  double success_latency = 0.0;
  double energy = 0.0;
  double mb_delivered = 0.0;
  double se = 0.0;
  long se_n = 0;
  double offload_delay = 0.0;
  long offload_n = 0;
};

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

Trainer::Trainer(TrainingConfig cfg)
    : cfg_(std::move(cfg)), weights_(cfg_.weights), env_(cfg_.env), policy_rng_(derive_seed(cfg_.seed, stream::kPolicy)),
      epsilon_(cfg_.eps_start),
      episode_seed_base_(cfg_.seed) {
  cfg_.validate();
  init_logging();
  if (cfg_.policy != PolicyKind::Random) {
    const auto heads = learned_heads();
    for (int i = 0; i < cfg_.env.num_agents; ++i)
      agents_.push_back(std::make_unique<DrqnAgent>(cfg_, cfg_.env.num_channels,
                                                    derive_seed(cfg_.seed, stream::kLearner, static_cast<std::uint64_t>(i)), heads));
    // Common initialisation: every agent starts from agent 0's draw.
    global_.assign(agents_.front()->net().params().begin(), agents_.front()->net().params().end());
    load_global(global_);
    if (cfg_.secure_aggregation)
      for (int i = 0; i < cfg_.env.num_agents; ++i) keys_.push_back(secagg::keygen());
  }
}

std::array<bool, kNumHeads> Trainer::learned_heads() const {
  if (cfg_.policy == PolicyKind::FedMarlBaseline) return {true, false, false};
  return {true, true, true};
}

void Trainer::load_global(std::span<const double> params) {
  for (auto& a : agents_) a->set_global(params);
  global_.assign(params.begin(), params.end());
}

double Trainer::divergence() const {
  if (agents_.empty()) return 0.0;
  double s = 0.0;
  for (const auto& a : agents_) s += l2_distance(a->net().params(), global_);
  return s / static_cast<double>(agents_.size());
}

EpisodeResult Trainer::run_episode(int episode, bool learn) {
  const int n = cfg_.env.num_agents;
  const int k = cfg_.env.num_channels;
  const int steps = cfg_.env.steps;
  const bool learners = !agents_.empty();
  learn = learn && learners;
  const double eps = learn ? epsilon_ : 0.0;

  env_.reset(derive_seed(episode_seed_base_, stream::kEpisode, static_cast<std::uint64_t>(episode)));
  for (auto& a : agents_) a->begin_episode();

  EpisodeResult res;
  res.channel_choices.assign(static_cast<std::size_t>(k), 0);
  std::vector<long> loads(static_cast<std::size_t>(k), 0);
  std::vector<double> agent_reward(static_cast<std::size_t>(n), 0.0);
  std::vector<Observation> obs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) obs[static_cast<std::size_t>(i)] = env_.observe(i);

  Accumulator acc;
  std::vector<ActionVector> actions(static_cast<std::size_t>(n));
  std::vector<std::array<int, kNumHeads>> head_actions(static_cast<std::size_t>(n));

  for (int t = 0; t < steps; ++t) {
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      ActionVector a;
      if (!learners) {
        a = random_policy(k, policy_rng_);
      } else {
        const QValues q = agents_[ui]->observe(obs[ui]);
        auto h = agents_[ui]->act(q, eps);
        if (cfg_.policy == PolicyKind::FedMarlBaseline) {
          a = app_only_action(static_cast<AppDecision>(h[0]), loads);
          h[1] = a.mac;
          h[2] = a.cpu_level;
        } else {
          a = {static_cast<AppDecision>(h[0]), h[1], h[2]};
        }
        head_actions[ui] = h;
      }
      if (a.app == AppDecision::Offload) {
        ++loads[static_cast<std::size_t>(a.mac)];
        ++res.channel_choices[static_cast<std::size_t>(a.mac)];
      }
      actions[ui] = a;
    }

    const auto outcomes = env_.step(actions);
    const double fairness = env_.hybrid_fairness(weights_);

    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const auto& o = outcomes[ui];
      const auto& st = env_.agent(i);
      const RewardInputs in = score_inputs(o, st.energy, cfg_.env.energy_threshold, fairness,
                                           env_.agent_reliability(i), env_.agent_mac_rate(i).value);
      const double r = step_reward(o, in, weights_);
      const Observation next = env_.observe(i);
      if (learn) {
        StepSideInfo side;
        side.delay_norm = o.has_task ? o.latency_s / o.deadline_s : 0.0;
        side.interference = o.mac_attempted && !o.mac_succeeded;
        agents_[ui]->record(obs[ui], head_actions[ui], r, next, t == steps - 1, side);
      }
      obs[ui] = next;

      acc.reward += r;
      agent_reward[ui] += r;
      ++acc.agent_steps;
      if (o.dropped_arrival) ++acc.resolved;
      acc.energy += o.energy_spent;
      if (o.resolved) {
        ++acc.resolved;
        acc.latency += o.latency_s;
        ++acc.latency_n;
      }
      if (o.task_succeeded) {
        ++acc.succeeded;
        acc.success_latency += o.latency_s;
        acc.mb_delivered += o.bits_delivered / kBitsPerMb;
      }
      if (o.mac_succeeded) {
        acc.se += o.se_bps_hz;
        ++acc.se_n;
        acc.offload_delay += o.latency_s;
        ++acc.offload_n;
      }
    }

    if (learn)
      for (auto& a : agents_) {
        const auto r = a->learn();
        if (r && r->fault) {
          ++res.faults;
          spdlog::warn("episode {}: non-finite TD loss, batch discarded", episode);
        }
      }
  }
  if (learn)
    for (auto& a : agents_) a->end_episode();

  long mac_att = 0, mac_succ = 0;
  for (int i = 0; i < n; ++i) {
    mac_att += env_.agent(i).mac_attempts;
    mac_succ += env_.agent(i).mac_successes;
    res.final_energy.push_back(env_.agent(i).energy);
  }
  for (auto& r : agent_reward) r /= steps;
  res.agent_rewards = agent_reward;

  MetricsRow& row = res.row;
  row.episode = episode;
  row.mean_reward = ratio(acc.reward, static_cast<double>(acc.agent_steps));
  row.reliability = ratio(static_cast<double>(acc.succeeded), static_cast<double>(acc.resolved));
  row.latency = ratio(acc.latency, static_cast<double>(acc.latency_n));
  row.completion_time = ratio(acc.success_latency, static_cast<double>(acc.succeeded));
  row.energy_per_task = ratio(acc.energy, static_cast<double>(acc.resolved));
  row.energy_efficiency = ratio(acc.mb_delivered, acc.energy);
  row.spectral_efficiency = ratio(acc.se, static_cast<double>(acc.se_n));
  row.fairness_hybrid = env_.hybrid_fairness(weights_);
  row.fairness_jain = env_.jain_fairness();
  row.mac_success = ratio(static_cast<double>(mac_succ), static_cast<double>(mac_att));
  row.failure_rate = acc.resolved > 0 ? 1.0 - row.reliability : 0.0;
  row.throughput = acc.mb_delivered / (static_cast<double>(n) * steps * cfg_.env.step_s);
  row.offloading_delay = ratio(acc.offload_delay, static_cast<double>(acc.offload_n));
  row.divergence = divergence();
  return res;
}

RoundReport Trainer::federated_round(std::uint32_t round) {
  RoundReport rep;
  rep.round = round;
  if (agents_.empty()) {
    rep.skipped = true;
    return rep;
  }
  rep.divergence_before = divergence();
  std::vector<double> energies;
  for (int i = 0; i < num_agents(); ++i) energies.push_back(env_.agent(i).energy);
  rep.participants = secagg::eligibility_filter(energies, cfg_.env.energy_threshold);
  if (rep.participants.empty()) {
    rep.skipped = true;
    spdlog::info("round {}: no eligible agents, keeping the previous global model", round);
    rounds_.push_back(rep);
    return rep;
  }

  const std::size_t dim = agents_.front()->net().layout().total;
  const std::size_t np = rep.participants.size();
  std::vector<double> global;
  try {
    if (cfg_.secure_aggregation) {
      aggregator_.begin_round(round, rep.participants, dim);
      for (auto p : rep.participants) {
        const auto wq = secagg::quantize(agents_[p]->net().params());
        std::map<std::uint16_t, secagg::Seed> seeds;
        for (auto j : rep.participants)
          if (j != p) seeds[j] = secagg::derive_pair_seed(keys_[p].secret, keys_[j].public_key, round, p, j);
        const auto bytes = secagg::encode(secagg::mask_update(wq, p, round, rep.participants, seeds));
        aggregator_.submit(p, bytes);
      }
      rep.comm_bytes = aggregator_.bytes_received();
      global = aggregator_.finalize();
    } else {
      global.assign(dim, 0.0);
      for (auto p : rep.participants) {
        const auto w = agents_[p]->net().params();
        for (std::size_t d = 0; d < dim; ++d) global[d] += w[d];
      }
      for (double& g : global) g /= static_cast<double>(np);
      rep.comm_bytes = np * dim * sizeof(double);
    }
  } catch (const std::exception& e) {
    if (aggregator_.state() == secagg::Aggregator::State::Collecting) aggregator_.abort(e.what());
    rep.aborted = true;
    rep.error = e.what();
    spdlog::warn("round {} aborted: {}", round, rep.error);
    rounds_.push_back(rep);
    return rep;
  }
  // Downlink: the global model reaches every agent, eligible or not.
  rep.comm_bytes += static_cast<std::uint64_t>(num_agents()) * dim * sizeof(double);
  load_global(global);
  spdlog::debug("round {}: {} participants, {} bytes", round, np, rep.comm_bytes);
  rounds_.push_back(rep);
  return rep;
}

void Trainer::adapt(const MetricsRow& row) {
  history_.push_back(row);
  if (!cfg_.reward_adaptation) return;
  const std::size_t w = std::min(history_.size(), static_cast<std::size_t>(cfg_.smoothing_window));
  MetricAverages avg{0.0, 0.0, 0.0};
  for (std::size_t j = history_.size() - w; j < history_.size(); ++j) {
    avg.latency_s += history_[j].latency / static_cast<double>(w);
    avg.fairness += history_[j].fairness_hybrid / static_cast<double>(w);
  }
  double e = 0.0;
  for (int i = 0; i < num_agents(); ++i) e += env_.agent(i).energy;
  avg.energy = e / num_agents();
  weights_ = adapt_weights(weights_, avg, true);
}

std::vector<MetricsRow> Trainer::train(const std::function<void(const EpisodeResult&)>& on_episode) {
  std::vector<MetricsRow> log;
  log.reserve(static_cast<std::size_t>(cfg_.episodes));
  for (int ep = 0; ep < cfg_.episodes; ++ep) {
    EpisodeResult res = run_episode(ep, true);
    if (!agents_.empty() && (ep + 1) % cfg_.agg_interval == 0) {
      const auto rep = federated_round(static_cast<std::uint32_t>((ep + 1) / cfg_.agg_interval));
      res.row.comm_bytes = static_cast<double>(rep.comm_bytes);
      res.round = rep;
    }
    if (!agents_.empty()) epsilon_ = decay_epsilon(epsilon_, cfg_.eps_end, cfg_.eps_decay);
    adapt(res.row);
    spdlog::debug("episode {} reward {:.4f} reliability {:.4f}", ep, res.row.mean_reward, res.row.reliability);
    if (on_episode) on_episode(res);
    log.push_back(res.row);
  }
  return log;
}

std::vector<MetricsRow> Trainer::evaluate(int episodes, std::uint64_t seed) {
  const auto saved = episode_seed_base_;
  episode_seed_base_ = seed;
  std::vector<MetricsRow> rows;
  try {
    for (int ep = 0; ep < episodes; ++ep) rows.push_back(run_episode(ep, false).row);
  } catch (...) {
    episode_seed_base_ = saved;
    throw;
  }
  episode_seed_base_ = saved;
  return rows;
}

}  // namespace fermi
