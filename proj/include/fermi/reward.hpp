#pragma once

#include <cstddef>
#include <span>

namespace fermi {

/// Weight vector of the multi-objective step reward.
///
/// The seven metric weights scale the latency, energy, fairness, spectral
/// efficiency, reliability, energy efficiency and MAC-success terms. The two
/// beta weights blend Jain's index with the average channel-access entropy.
/// `lambda_extra` scales the auxiliary term of the layer decomposition.
struct RewardWeights {
  double w_latency = 0.25;
  double w_energy = 0.2;
  double w_fairness = 0.15;
  double w_spectral = 0.1;
  double w_reliability = 0.15;
  double w_energy_eff = 0.1;
  double w_mac = 0.05;
  double beta_jain = 0.5;
  double beta_entropy = 0.5;
  double lambda_extra = 1.0;

  void validate() const;
  double metric_weight_sum() const;
  bool operator==(const RewardWeights&) const = default;
};

/// Value that may be undefined for lack of samples (0/0, empty window).
struct Ratio {
  double value = 0.0;
  bool has_data = false;
};

struct Penalties {
  double latency = 1.0;  // P_dyn
  double energy = 1.0;   // P_energy
};

/// Raw per-step metrics fed to the reward.
struct RewardInputs {
  double latency_s = 0.0;
  double deadline_s = 1.0;
  double energy = 0.0;       // energy charged to the step, E_max units
  double energy_comp = 0.0;  // compute share of `energy`
  double energy_tx = 0.0;    // transmit share of `energy`
  double energy_max = 1.0;
  double remaining_energy = 1.0;
  double energy_threshold = 0.2;
  double fairness = 0.0;     // hybrid fairness F_i(t)
  double reliability = 0.0;  // rolling success mean R_i(t)
  double spectral_eff = 0.0; // raw SE sample, floored inside
  double energy_eff = 0.0;   // EE_i(t)
  double mac_rate = 0.0;
};

struct RewardBreakdown {
  // Inputs after normalisation, floors and inversion.
  double inv_latency = 0.0;
  double inv_energy = 0.0;
  double inv_energy_comp = 0.0;
  double inv_energy_tx = 0.0;
  double norm_se = 0.0;
  Penalties penalties;

  // Weighted terms of the total.
  double latency_term = 0.0;
  double energy_term = 0.0;
  double fairness_term = 0.0;
  double reliability_term = 0.0;
  double spectral_term = 0.0;
  double energy_eff_term = 0.0;
  double mac_term = 0.0;
  double total = 0.0;

  // Application/MAC layer decomposition with its fitted coefficients.
  double alpha = 0.0;
  double beta = 0.0;
  double gamma_fair = 0.0;
  double lambda_extra = 1.0;
  double r_app = 0.0;
  double r_mac = 0.0;
  double omega_extra = 0.0;

  double decomposed_total() const { return r_app + r_mac + lambda_extra * omega_extra; }
};

/// Floor applied to normalised latency/energy before inversion.
inline constexpr double kInverseFloor = 0.01;
inline constexpr double kSpectralFloor = 0.01;
inline constexpr double kLatencyPenaltyThresholdS = 2.0;

double normalized_latency(double latency_s, double deadline_s);
double normalized_energy(double energy, double energy_max);
double jain_index(std::span<const double> allocation);
double channel_entropy(std::span<const double> distribution, std::size_t num_channels);
double average_entropy(std::span<const double> entropies);
double hybrid_fairness(double jain, double entropy_avg, const RewardWeights& w);
Ratio reliability(std::span<const bool> window);
double normalized_se(double se);
double energy_efficiency(double throughput, double energy_total);
Ratio mac_success_rate(long successes, long total);
Penalties penalties(double latency_s, double remaining_energy, double threshold);

/// Total step reward and its layer decomposition; the decomposition
/// reproduces `total` to within 1e-9.
RewardBreakdown total_reward(const RewardInputs& in, const RewardWeights& w);

struct MetricAverages {
  double latency_s = 0.0;
  double energy = 1.0;  // mean remaining energy
  double fairness = 1.0;
};

struct AdaptationThresholds {
  double latency_s = 2.0;
  double energy = 0.2;
  double fairness = 0.5;
  double nudge = 0.10;
};

/// Nudges w_latency/w_energy/w_fairness up by `nudge` when the matching
/// moving average breaches its threshold, then renormalises the metric
/// weights to sum 1. Identity when disabled.
RewardWeights adapt_weights(const RewardWeights& w, const MetricAverages& avg, bool enabled,
                            const AdaptationThresholds& th = {});

}  // namespace fermi
