#include <doctest.h>

#include <array>
#include <vector>

#include "fermi/baselines.hpp"
#include "fermi/errors.hpp"
#include "fermi/reward.hpp"

using namespace fermi;

TEST_CASE("random policy is uniform on every head") {
  Rng g(1);
  std::array<long, 2> app{};
  std::array<long, 4> mac{};
  std::array<long, 3> cpu{};
  const int draws = 40000;
  for (int i = 0; i < draws; ++i) {
    const auto a = random_policy(4, g);
    ++app[static_cast<std::size_t>(a.app)];
    ++mac[static_cast<std::size_t>(a.mac)];
    ++cpu[static_cast<std::size_t>(a.cpu_level)];
  }
  for (long c : app) CHECK(c / double(draws) == doctest::Approx(0.5).epsilon(0.03));
  for (long c : mac) CHECK(c / double(draws) == doctest::Approx(0.25).epsilon(0.04));
  for (long c : cpu) CHECK(c / double(draws) == doctest::Approx(1.0 / 3.0).epsilon(0.04));
  for (int i = 0; i < 100; ++i) CHECK(random_policy(1, g).mac == 0);
  CHECK_THROWS_AS(random_policy(0, g), DomainError);
}

TEST_CASE("round-robin cycles through every channel") {
  for (int k = 1; k <= 6; ++k)
    for (int agent = 0; agent < 5; ++agent) {
      std::vector<int> seen(static_cast<std::size_t>(k), 0);
      for (long s = 0; s < k; ++s) ++seen[static_cast<std::size_t>(round_robin_mac(s, agent, k))];
      for (int c : seen) CHECK(c == 1);
    }
  CHECK(round_robin_mac(7, 2, 3) == 0);
  CHECK_THROWS_AS(round_robin_mac(0, 0, 0), DomainError);
}

TEST_CASE("round-robin usage is perfectly fair over multiples of k") {
  for (int k = 1; k <= 5; ++k)
    for (int n = 1; n <= 7; ++n)
      for (int m = 1; m <= 3; ++m) {
        std::vector<BaselinePolicy> pol;
        for (int i = 0; i < n; ++i) pol.emplace_back(BaselineKind::RoundRobinMac, i, k);
        std::vector<double> usage(static_cast<std::size_t>(k), 0.0);
        Rng g(0);
        for (int t = 0; t < m * k; ++t)
          for (auto& p : pol) {
            const auto a = p.act(g, {});
            CHECK(a.app == AppDecision::Offload);
            CHECK(p.cursor() < 1000);
            usage[static_cast<std::size_t>(a.mac)] += 1.0;
          }
        CHECK(jain_index(usage) == 1.0);
      }
}

TEST_CASE("least used channel") {
  CHECK(least_used_channel(std::vector<long>{3, 1, 2}) == 1);
  CHECK(least_used_channel(std::vector<long>{2, 2, 2}) == 0);
  CHECK(least_used_channel(std::vector<long>{5, 0, 0}) == 1);
  CHECK(least_used_channel(std::vector<long>{4}) == 0);
  CHECK_THROWS_AS(least_used_channel(std::vector<long>{}), DomainError);
}

TEST_CASE("app-only heuristics ignore the learned decision") {
  Rng g(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<long> loads(4);
    for (auto& l : loads) l = static_cast<long>(g() % 5);
    BaselinePolicy p(BaselineKind::AppOnlyLearner, 0, 4);
    const auto local = p.act(g, loads, AppDecision::Local);
    const auto off = p.act(g, loads, AppDecision::Offload);
    CHECK(local.mac == off.mac);
    CHECK(local.cpu_level == kFixedCpuLevel);
    CHECK(off.cpu_level == kFixedCpuLevel);
    CHECK(off.mac == least_used_channel(loads));
    CHECK(off.app == AppDecision::Offload);
    CHECK(local.app == AppDecision::Local);
  }
}

TEST_CASE("greedy least-used assignment balances adversarial loads") {
  // Agents choosing in turn against the running loads never leave a gap
  // larger than one between channels.
  Rng g(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + static_cast<int>(g() % 6);
    const int n = static_cast<int>(g() % 40);
    std::vector<long> loads(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) ++loads[static_cast<std::size_t>(least_used_channel(loads))];
    const auto [lo, hi] = std::minmax_element(loads.begin(), loads.end());
    CHECK(*hi - *lo <= 1);
  }
}
