#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fermi/errors.hpp"
#include "fermi/reward.hpp"
#include "support.hpp"

using namespace fermi;

TEST_CASE("normalisations") {
  CHECK(normalized_latency(1.0, 2.0) == doctest::Approx(0.5));
  CHECK(normalized_latency(0.0, 2.0) == 0.0);
  CHECK_THROWS_AS(normalized_latency(1.0, 0.0), DomainError);
  CHECK_THROWS_AS(normalized_latency(-1.0, 2.0), DomainError);
  CHECK(normalized_energy(0.05, 1.0) == doctest::Approx(0.05));
  CHECK_THROWS_AS(normalized_energy(0.5, 0.0), DomainError);
}

TEST_CASE("jain index") {
  const std::vector<double> equal{3, 3, 3, 3};
  CHECK(jain_index(equal) == 1.0);
  const std::vector<double> one{1, 0, 0, 0};
  CHECK(jain_index(one) == doctest::Approx(0.25));
  const std::vector<double> two_one{2, 1};
  CHECK(jain_index(two_one) == doctest::Approx(0.9));
  const std::vector<double> zeros{0, 0, 0};
  CHECK(jain_index(zeros) == 1.0);
  CHECK_THROWS_AS(jain_index(std::vector<double>{}), DomainError);
  CHECK_THROWS_AS(jain_index(std::vector<double>{1, -1}), DomainError);

  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + g() % 20;
    std::vector<double> x(n);
    for (auto& v : x) v = g() % 3 == 0 ? 0.0 : u(g);
    x[g() % n] += 0.1;
    double s = 0, ss = 0;
    for (double v : x) s += v, ss += v * v;
    const double oracle = s * s / (static_cast<double>(n) * ss);
    const double j = jain_index(x);
    CHECK(j >= 1.0 / static_cast<double>(n));
    CHECK(j <= 1.0);
    CHECK(j == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("channel entropy") {
  const std::vector<double> half{0.5, 0.5, 0.0};
  CHECK(channel_entropy(half, 3) == doctest::Approx(std::log(2.0) / std::log(3.0)));
  const std::vector<double> uniform{0.25, 0.25, 0.25, 0.25};
  CHECK(channel_entropy(uniform, 4) == doctest::Approx(1.0));
  const std::vector<double> point{0.0, 1.0, 0.0};
  CHECK(channel_entropy(point, 3) == 0.0);
  CHECK_THROWS_AS(channel_entropy(std::vector<double>{1.0}, 1), DomainError);
  CHECK_THROWS_AS(channel_entropy(std::vector<double>{0.5, 0.4}, 2), DomainError);
  CHECK_THROWS_AS(channel_entropy(std::vector<double>{0.5, 0.5}, 3), DomainError);

  std::mt19937_64 g(5);
  std::gamma_distribution<double> gam(0.7, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + g() % 8;
    std::vector<double> p(k);
    double s = 0;
    for (auto& v : p) s += (v = gam(g));
    for (auto& v : p) v /= s;
    const double h = channel_entropy(p, k);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
  }
}

TEST_CASE("hybrid fairness and averages") {
  RewardWeights w;
  CHECK(hybrid_fairness(0.8, 0.4, w) == doctest::Approx(0.6));
  CHECK(average_entropy(std::vector<double>{}) == 0.0);
  CHECK(average_entropy(std::vector<double>{0.2, 0.4}) == doctest::Approx(0.3));
}

TEST_CASE("reliability, SE, EE and MAC rate") {
  const bool win[] = {true, false, true, true};
  CHECK(reliability(win).value == doctest::Approx(0.75));
  CHECK_FALSE(reliability(std::span<const bool>{}).has_data);
  CHECK(normalized_se(0.0) == 0.01);
  CHECK(normalized_se(0.005) == 0.01);
  CHECK(normalized_se(2.5) == 2.5);
  CHECK(energy_efficiency(3.0, 0.06) == doctest::Approx(50.0));
  CHECK_THROWS_AS(energy_efficiency(1.0, 0.0), DomainError);
  CHECK(mac_success_rate(3, 4).value == doctest::Approx(0.75));
  CHECK_FALSE(mac_success_rate(0, 0).has_data);
  CHECK_THROWS_AS(mac_success_rate(5, 4), DomainError);
}

TEST_CASE("penalty table") {
  CHECK(penalties(2.0, 0.5, 0.2).latency == 1.0);
  CHECK(penalties(2.0001, 0.5, 0.2).latency == 2.0);
  CHECK(penalties(1.0, 0.2, 0.2).energy == 1.0);
  CHECK(penalties(1.0, 0.1999, 0.2).energy == 2.0);
}

TEST_CASE("latency penalty doubles the latency term") {
  RewardWeights w;
  RewardInputs in;
  in.deadline_s = 5.0;
  in.energy = 0.05;
  in.latency_s = 2.0;
  const auto below = total_reward(in, w);
  in.latency_s = 2.0 + 1e-9;
  const auto above = total_reward(in, w);
  CHECK(above.latency_term == doctest::Approx(2.0 * below.latency_term).epsilon(1e-6));
  CHECK(above.penalties.latency == 2.0);
}

TEST_CASE("total reward matches a hand computation") {
  RewardWeights w;
  RewardInputs in;
  in.latency_s = 1.0;
  in.deadline_s = 2.0;
  in.energy = 0.04;
  in.energy_comp = 0.03;
  in.energy_tx = 0.01;
  in.remaining_energy = 0.9;
  in.fairness = 0.7;
  in.reliability = 0.8;
  in.spectral_eff = 0.0;
  in.energy_eff = 25.0;
  in.mac_rate = 0.5;
  const double expected = 0.25 * 2.0 + 0.2 * 25.0 + 0.15 * 0.7 + 0.15 * 0.8 + 0.1 * 0.01 + 0.1 * 25.0 + 0.05 * 0.5;
  const auto b = total_reward(in, w);
  CHECK(b.total == doctest::Approx(expected).epsilon(1e-12));
  // Floors keep tiny metrics bounded.
  in.energy = 0.0;
  in.latency_s = 0.0;
  const auto f = total_reward(in, w);
  CHECK(f.inv_energy == doctest::Approx(100.0));
  CHECK(f.inv_latency == doctest::Approx(100.0));
}

TEST_CASE("layer decomposition reproduces the total") {
  std::mt19937_64 g(2024);
  for (int i = 0; i < 2000; ++i) {
    const auto in = testing::random_inputs(g);
    const auto w = testing::random_weights(g);
    const auto b = total_reward(in, w);
    CHECK(std::abs(b.decomposed_total() - b.total) <= 1e-9 * std::max(1.0, std::abs(b.total)));
    CHECK(b.alpha == -w.w_latency);
    CHECK(b.gamma_fair == w.w_fairness);
  }
}

TEST_CASE("reward is pure") {
  std::mt19937_64 g(3);
  const auto in = testing::random_inputs(g);
  const auto w = testing::random_weights(g);
  CHECK(total_reward(in, w).total == total_reward(in, w).total);
}

TEST_CASE("weight adaptation") {
  RewardWeights w;
  MetricAverages calm{1.0, 0.9, 0.9};
  CHECK(adapt_weights(w, calm, false) == w);
  const auto same = adapt_weights(w, calm, true);
  CHECK(same.w_latency == doctest::Approx(w.w_latency));
  MetricAverages slow{3.0, 0.9, 0.9};
  const auto nudged = adapt_weights(w, slow, true);
  CHECK(nudged.w_latency / nudged.w_energy > w.w_latency / w.w_energy);
  CHECK(nudged.metric_weight_sum() == doctest::Approx(1.0));
  // Algebra of the nudge: the ratio grows by exactly the nudge factor.
  CHECK(nudged.w_latency / nudged.w_energy == doctest::Approx(1.1 * w.w_latency / w.w_energy));
}

TEST_CASE("weight validation") {
  RewardWeights w;
  w.beta_jain = 0.7;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w = RewardWeights{};
  w.w_energy = -0.1;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w = RewardWeights{};
  w.lambda_extra = 0.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
}
