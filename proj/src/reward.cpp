#include "fermi/reward.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fermi/errors.hpp"

namespace fermi {

void RewardWeights::validate() const {
  const double all[] = {w_latency,   w_energy,  w_fairness, w_spectral,  w_reliability,
                        w_energy_eff, w_mac,    beta_jain,  beta_entropy, lambda_extra};
  for (double v : all) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("reward weights must be finite and >= 0");
  }
  if (std::abs(beta_jain + beta_entropy - 1.0) > 1e-9)
    throw ConfigError("BETA_JAIN + BETA_ENTROPY must equal 1");
  if (lambda_extra <= 0.0) throw ConfigError("LAMBDA_EXTRA must be > 0");
}

double RewardWeights::metric_weight_sum() const {
  return w_latency + w_energy + w_fairness + w_spectral + w_reliability + w_energy_eff + w_mac;
}

double normalized_latency(double latency_s, double deadline_s) {
  if (!(deadline_s > 0.0)) throw DomainError("deadline must be positive");
  if (latency_s < 0.0) throw DomainError("latency must be non-negative");
  return latency_s / deadline_s;
}

double normalized_energy(double energy, double energy_max) {
  if (!(energy_max > 0.0)) throw DomainError("E_max must be positive");
  return energy / energy_max;
}

double jain_index(std::span<const double> x) {
  if (x.empty()) throw DomainError("jain_index of an empty allocation");
  double sum = 0.0, sum_sq = 0.0;
  for (double v : x) {
    if (v < 0.0) throw DomainError("jain_index requires non-negative allocations");
    sum += v;
    sum_sq += v * v;
  }
  // Nobody has anything: perfectly equal.
  if (sum_sq == 0.0) return 1.0;
  const double n = static_cast<double>(x.size());
  return std::clamp(sum * sum / (n * sum_sq), 1.0 / n, 1.0);
}

double channel_entropy(std::span<const double> p, std::size_t num_channels) {
  if (num_channels < 2) throw DomainError("channel entropy needs at least two channels");
  if (p.size() != num_channels) throw DomainError("distribution size differs from channel count");
  double total = 0.0;
  for (double v : p) {
    if (v < 0.0) throw DomainError("negative probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("distribution does not sum to 1");
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return std::clamp(h / std::log2(static_cast<double>(num_channels)), 0.0, 1.0);
}

double average_entropy(std::span<const double> entropies) {
  if (entropies.empty()) return 0.0;
  double s = 0.0;
  for (double h : entropies) s += h;
  return s / static_cast<double>(entropies.size());
}

double hybrid_fairness(double jain, double entropy_avg, const RewardWeights& w) {
  return w.beta_jain * jain + w.beta_entropy * entropy_avg;
}

Ratio reliability(std::span<const bool> window) {
  if (window.empty()) return {0.0, false};
  long ok = 0;
  for (bool b : window) ok += b ? 1 : 0;
  return {static_cast<double>(ok) / static_cast<double>(window.size()), true};
}

double normalized_se(double se) { return std::max(se, kSpectralFloor); }

double energy_efficiency(double throughput, double energy_total) {
  if (!(energy_total > 0.0)) throw DomainError("energy efficiency with zero energy");
  return throughput / energy_total;
}

Ratio mac_success_rate(long successes, long total) {
  if (successes < 0 || total < 0) throw DomainError("negative MAC counters");
  if (successes > total) throw DomainError("more MAC successes than attempts");
  if (total == 0) return {0.0, false};
  return {static_cast<double>(successes) / static_cast<double>(total), true};
}

Penalties penalties(double latency_s, double remaining_energy, double threshold) {
  Penalties p;
  p.latency = latency_s > kLatencyPenaltyThresholdS ? 2.0 : 1.0;
  p.energy = remaining_energy < threshold ? 2.0 : 1.0;
  return p;
}

RewardBreakdown total_reward(const RewardInputs& in, const RewardWeights& w) {
  RewardBreakdown b;
  const double l_norm = std::max(normalized_latency(in.latency_s, in.deadline_s), kInverseFloor);
  const double e_norm = std::max(normalized_energy(in.energy, in.energy_max), kInverseFloor);
  const double ec_norm = std::max(normalized_energy(in.energy_comp, in.energy_max), kInverseFloor);
  const double et_norm = std::max(normalized_energy(in.energy_tx, in.energy_max), kInverseFloor);
  b.inv_latency = 1.0 / l_norm;
  b.inv_energy = 1.0 / e_norm;
  b.inv_energy_comp = 1.0 / ec_norm;
  b.inv_energy_tx = 1.0 / et_norm;
  b.norm_se = normalized_se(in.spectral_eff);
  b.penalties = penalties(in.latency_s, in.remaining_energy, in.energy_threshold);

  b.latency_term = w.w_latency * b.inv_latency * b.penalties.latency;
  b.energy_term = w.w_energy * b.inv_energy * b.penalties.energy;
  b.fairness_term = w.w_fairness * in.fairness;
  b.reliability_term = w.w_reliability * in.reliability;
  b.spectral_term = w.w_spectral * b.norm_se;
  b.energy_eff_term = w.w_energy_eff * in.energy_eff;
  b.mac_term = w.w_mac * in.mac_rate;
  b.total = b.latency_term + b.energy_term + b.fairness_term + b.reliability_term +
            b.spectral_term + b.energy_eff_term + b.mac_term;

  // Layer decomposition. alpha and gamma map directly onto the latency and
  // fairness weights; beta is fitted per step so that the split compute and
  // transmit inverses carry exactly the energy term.
  b.alpha = -w.w_latency;
  b.gamma_fair = w.w_fairness;
  b.beta = -w.w_energy * b.inv_energy / (b.inv_energy_comp + b.inv_energy_tx);
  b.lambda_extra = w.lambda_extra;
  b.r_app = -b.alpha * b.inv_latency * b.penalties.latency -
            b.beta * b.inv_energy_comp * b.penalties.energy;
  b.r_mac = -b.beta * b.inv_energy_tx * b.penalties.energy + b.gamma_fair * in.fairness;
  b.omega_extra =
      (b.reliability_term + b.spectral_term + b.energy_eff_term + b.mac_term) / w.lambda_extra;
  return b;
}

RewardWeights adapt_weights(const RewardWeights& w, const MetricAverages& avg, bool enabled,
                            const AdaptationThresholds& th) {
  if (!enabled) return w;
  RewardWeights out = w;
  if (avg.latency_s > th.latency_s) out.w_latency *= 1.0 + th.nudge;
  if (avg.energy < th.energy) out.w_energy *= 1.0 + th.nudge;
  if (avg.fairness < th.fairness) out.w_fairness *= 1.0 + th.nudge;
  const double s = out.metric_weight_sum();
  if (s > 0.0) {
    out.w_latency /= s;
    out.w_energy /= s;
    out.w_fairness /= s;
    out.w_spectral /= s;
    out.w_reliability /= s;
    out.w_energy_eff /= s;
    out.w_mac /= s;
  }
  return out;
}

}  // namespace fermi
