#include "fermi/agent.hpp"

#include <algorithm>

#include "fermi/errors.hpp"

namespace fermi {

int argmax_lowest(const std::vector<double>& v) {
  if (v.empty()) throw ShapeError("argmax of an empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
  return best;
}

std::array<int, kNumHeads> select_action(const QValues& q, double epsilon, Rng& rng,
                                         std::array<bool, kNumHeads> active) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("epsilon must lie in [0,1]");
  std::array<int, kNumHeads> a{0, 0, 0};
  for (std::size_t h = 0; h < kNumHeads; ++h) {
    if (!active[h]) continue;
    const int n = static_cast<int>(q.heads[h].size());
    if (epsilon > 0.0 && uniform01(rng) < epsilon)
      a[h] = uniform_int(rng, n);
    else
      a[h] = argmax_lowest(q.heads[h]);
  }
  return a;
}

double decay_epsilon(double eps, double eps_end, double decay) { return std::max(eps_end, eps * decay); }

namespace {

NetShape shape_for(const TrainingConfig& cfg, int num_channels) {
  NetShape s;
  s.hidden = cfg.hidden;
  s.heads = {2, num_channels, kNumCpuLevels};
  return s;
}

}  // namespace

DrqnAgent::DrqnAgent(const TrainingConfig& cfg, int num_channels, std::uint64_t seed,
                     std::array<bool, kNumHeads> heads)
    : cfg_(cfg),
      heads_(heads),
      net_(shape_for(cfg, num_channels)),
      target_(shape_for(cfg, num_channels)),
      replay_(static_cast<std::size_t>(cfg.buffer), static_cast<std::size_t>(cfg.sequence_length), cfg.per_alpha),
      rng_(seed) {
  net_.init(rng_);
  target_.set_params(net_.params());
  optimizer_ = Optimizer(cfg.optimizer, net_.layout().total);
  td_opts_.gamma = cfg.gamma;
  td_opts_.reward_scale = cfg.reward_scale;
  td_opts_.train_heads = heads;
  td_opts_.priority_eta = cfg.priority_eta;
  total_updates_planned_ = std::max<long>(1, static_cast<long>(cfg.episodes) * cfg.env.steps);
  begin_episode();
}

void DrqnAgent::begin_episode() {
  hidden_ = net_.zero_state(1);
  pending_ = SequenceTransition{};
  pending_delay_ = 0.0;
  pending_interference_ = 0;
}

QValues DrqnAgent::observe(const Observation& obs) { return net_.step(obs.features, hidden_); }

std::array<int, kNumHeads> DrqnAgent::act(const QValues& q, double epsilon) {
  return select_action(q, epsilon, rng_, heads_);
}

void DrqnAgent::record(const Observation& obs, const std::array<int, kNumHeads>& action, double reward,
                       const Observation& next_obs, bool done, const StepSideInfo& side) {
  if (pending_.obs.empty()) pending_.obs.push_back(obs);
  pending_.actions.push_back(action);
  pending_.rewards.push_back(reward);
  pending_.done.push_back(done ? 1 : 0);
  pending_.obs.push_back(next_obs);
  pending_delay_ += std::clamp(side.delay_norm, 0.0, 1.0);
  pending_interference_ += side.interference ? 1 : 0;
  if (static_cast<int>(pending_.length()) >= cfg_.sequence_length) flush_chunk();
}

void DrqnAgent::flush_chunk() {
  if (pending_.actions.empty()) return;
  const double n = static_cast<double>(pending_.length());
  pending_.delay_norm = pending_delay_ / n;
  pending_.interference = pending_interference_ / n;
  replay_.add(std::move(pending_));
  pending_ = SequenceTransition{};
  pending_delay_ = 0.0;
  pending_interference_ = 0;
}

void DrqnAgent::end_episode() { flush_chunk(); }

double DrqnAgent::current_beta() const {
  const double frac = std::min(1.0, static_cast<double>(updates_) / static_cast<double>(total_updates_planned_));
  return cfg_.per_beta_start + (1.0 - cfg_.per_beta_start) * frac;
}

std::optional<TdResult> DrqnAgent::learn() {
  if (replay_.size() == 0) return std::nullopt;
  const auto sampled = replay_.sample(static_cast<std::size_t>(cfg_.batch), current_beta(), rng_);
  const TrainBatch batch = replay_.make_batch(sampled);
  TdResult r = td_update(net_, target_, batch, td_opts_, cfg_.lr, cfg_.clip_norm, optimizer_);
  if (r.fault) {
    ++faults_;
    return r;
  }
  replay_.update_priorities(sampled.indices, r.new_priorities);
  ++updates_;
  if (updates_ % cfg_.sync_freq == 0) sync_target();
  return r;
}

void DrqnAgent::sync_target() { target_.set_params(net_.params()); }

void DrqnAgent::set_global(std::span<const double> params) {
  net_.set_params(params);
  target_.set_params(params);
}

}  // namespace fermi
