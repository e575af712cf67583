#pragma once

#include <random>
#include <vector>

#include "fermi/drqn.hpp"
#include "fermi/reward.hpp"

namespace fermi::testing {

inline RewardInputs random_inputs(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RewardInputs in;
  in.deadline_s = 0.5 + 10.0 * u(g);
  in.latency_s = 12.0 * u(g);
  in.energy_comp = u(g) < 0.1 ? 0.0 : 0.5 * u(g);
  in.energy_tx = u(g) < 0.1 ? 0.0 : 0.5 * u(g);
  in.energy = in.energy_comp + in.energy_tx;
  in.energy_max = 1.0;
  in.remaining_energy = u(g);
  in.energy_threshold = 0.2;
  in.fairness = u(g);
  in.reliability = u(g);
  in.spectral_eff = u(g) < 0.3 ? 0.0 : 5.0 * u(g);
  in.energy_eff = 100.0 * u(g);
  in.mac_rate = u(g);
  return in;
}

inline RewardWeights random_weights(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RewardWeights w;
  w.w_latency = u(g);
  w.w_energy = u(g);
  w.w_fairness = u(g);
  w.w_spectral = u(g);
  w.w_reliability = u(g);
  w.w_energy_eff = u(g);
  w.w_mac = u(g);
  w.beta_jain = u(g);
  w.beta_entropy = 1.0 - w.beta_jain;
  w.lambda_extra = 0.05 + 3.0 * u(g);
  return w;
}

/// Random tiny network and matching batch for gradient checks.
struct TinyProblem {
  DrqnNet net;
  DrqnNet target;
  TrainBatch batch;
};

inline TinyProblem random_tiny_problem(std::mt19937_64& g, int hidden, int steps, int batch_size, int channels = 3) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  NetShape s;
  s.hidden = hidden;
  s.heads = {2, channels, kNumCpuLevels};
  TinyProblem p{DrqnNet(s), DrqnNet(s), {}};
  std::vector<double> w(p.net.layout().total), wt(w.size());
  for (auto& x : w) x = 0.8 * u(g);
  for (auto& x : wt) x = 0.8 * u(g);
  p.net.set_params(w);
  p.target.set_params(wt);
  auto& b = p.batch;
  b.steps = steps;
  b.size = batch_size;
  b.obs.assign(static_cast<std::size_t>(steps + 1), Eigen::MatrixXd::Zero(s.obs_dim, batch_size));
  for (auto& o : b.obs)
    for (Eigen::Index i = 0; i < o.size(); ++i) o.data()[i] = u(g);
  b.actions.assign(static_cast<std::size_t>(steps), std::vector<std::array<int, kNumHeads>>(static_cast<std::size_t>(batch_size)));
  for (auto& row : b.actions)
    for (auto& a : row) {
      a[0] = static_cast<int>(g() % 2);
      a[1] = static_cast<int>(g() % static_cast<unsigned>(channels));
      a[2] = static_cast<int>(g() % kNumCpuLevels);
    }
  b.rewards = Eigen::MatrixXd::Zero(steps, batch_size);
  b.done = Eigen::MatrixXd::Zero(steps, batch_size);
  for (int j = 0; j < batch_size; ++j) {
    const int len = 1 + static_cast<int>(g() % static_cast<unsigned>(steps));
    b.lengths.push_back(len);
    b.is_weights.push_back(0.2 + 0.8 * (u(g) + 1.0) / 2.0);
    b.delay_norm.push_back(0.0);
    b.interference.push_back(0.0);
    for (int t = 0; t < steps; ++t) b.rewards(t, j) = 3.0 * u(g);
    b.done(len - 1, j) = g() % 2 ? 1.0 : 0.0;
  }
  return p;
}

/// Largest relative error between the BPTT gradient and central differences.
/// h near cbrt(machine eps); at 1e-6 cancellation in the loss difference
/// already dominates for coordinates around 1e-6.
inline double max_gradient_error(const TinyProblem& p, const TdOptions& opt, double h = 1e-5) {
  Eigen::VectorXd grad;
  td_loss(p.net, p.target, p.batch, opt, &grad);
  DrqnNet probe = p.net;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    const double w0 = probe.param_vector()[i];
    probe.param_vector()[i] = w0 + h;
    const double lp = td_loss(probe, p.target, p.batch, opt, nullptr);
    probe.param_vector()[i] = w0 - h;
    const double lm = td_loss(probe, p.target, p.batch, opt, nullptr);
    probe.param_vector()[i] = w0;
    const double fd = (lp - lm) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
    worst = std::max(worst, std::abs(fd - grad[i]) / denom);
  }
  return worst;
}

}  // namespace fermi::testing
