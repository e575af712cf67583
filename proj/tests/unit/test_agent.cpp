#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fermi/agent.hpp"
#include "fermi/errors.hpp"

using namespace fermi;

namespace {

QValues make_q(std::vector<double> app, std::vector<double> mac, std::vector<double> cpu) {
  QValues q;
  q.heads = {std::move(app), std::move(mac), std::move(cpu)};
  return q;
}

bool same(std::span<const double> a, std::span<const double> b) { return std::equal(a.begin(), a.end(), b.begin(), b.end()); }

}  // namespace

TEST_CASE("greedy selection and ties") {
  Rng g(1);
  const auto q = make_q({0.1, 0.3}, {2.0, 5.0, -1.0}, {0.0, 0.0, 0.0});
  const auto a = select_action(q, 0.0, g);
  CHECK(a == std::array<int, 3>{1, 1, 0});
  CHECK(argmax_lowest({1.0, 3.0, 3.0}) == 1);
  CHECK_THROWS_AS(argmax_lowest({}), ShapeError);
  CHECK_THROWS_AS(select_action(q, 1.5, g), DomainError);
}

TEST_CASE("epsilon one is uniform per head") {
  Rng g(2);
  const auto q = make_q({9.0, 0.0}, {9.0, 0.0, 0.0}, {9.0, 0.0, 0.0});
  std::array<long, 3> mac{};
  const int draws = 30000;
  for (int i = 0; i < draws; ++i) ++mac[static_cast<std::size_t>(select_action(q, 1.0, g)[1])];
  for (long c : mac) CHECK(c / double(draws) == doctest::Approx(1.0 / 3.0).epsilon(0.05));
}

TEST_CASE("inactive heads return zero and use no randomness") {
  const auto q = make_q({0.0, 1.0}, {0.0, 0.0, 9.0}, {0.0, 9.0, 0.0});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng a(seed);
    const auto x = select_action(q, 0.5, a, {true, false, false});
    CHECK(x[1] == 0);
    CHECK(x[2] == 0);
    // Replay the app head alone on a fresh engine; both must end in step.
    Rng b(seed);
    if (uniform01(b) < 0.5) uniform_int(b, 2);
    CHECK(a == b);
  }
}

TEST_CASE("epsilon schedule") {
  double eps = 1.0;
  int floor_at = -1;
  for (int n = 1; n <= 800; ++n) {
    const double next = decay_epsilon(eps);
    CHECK(next <= eps);
    CHECK(next >= 0.05);
    eps = next;
    if (floor_at < 0 && eps == 0.05) floor_at = n;
  }
  CHECK(eps == 0.05);
  CHECK(floor_at == static_cast<int>(std::ceil(std::log(0.05) / std::log(0.995))));
  CHECK(floor_at == 598);
  CHECK(decay_epsilon(0.5, 0.1, 0.5) == 0.25);
}

TEST_CASE("agent records sequences and syncs the target on cadence") {
  TrainingConfig cfg;
  cfg.hidden = 4;
  cfg.buffer = 40;
  cfg.sequence_length = 4;
  cfg.env.steps = 4;
  cfg.batch = 2;
  cfg.sync_freq = 3;
  DrqnAgent agent(cfg, 3, 7);
  CHECK(same(agent.net().params(), agent.target().params()));
  CHECK_FALSE(agent.learn().has_value());

  Observation o;
  o.features[0] = 0.5;
  agent.begin_episode();
  for (int t = 0; t < 6; ++t) agent.record(o, {1, 2, 0}, 10.0, o, t == 5, {0.3, t % 2 == 0});
  CHECK(agent.replay().size() == 1);  // one full chunk, two steps pending
  agent.end_episode();
  CHECK(agent.replay().size() == 2);
  CHECK(agent.replay().at(1).length() == 2);
  CHECK(agent.replay().at(0).interference == doctest::Approx(0.5));
  CHECK(agent.replay().at(0).delay_norm == doctest::Approx(0.3));

  const double beta0 = agent.current_beta();
  CHECK(beta0 == doctest::Approx(cfg.per_beta_start));
  REQUIRE(agent.learn().has_value());
  CHECK_FALSE(same(agent.net().params(), agent.target().params()));
  agent.learn();
  CHECK_FALSE(same(agent.net().params(), agent.target().params()));
  agent.learn();
  CHECK(agent.updates() == 3);
  CHECK(same(agent.net().params(), agent.target().params()));
  CHECK(agent.current_beta() > beta0);
}

TEST_CASE("set_global replaces both networks") {
  TrainingConfig cfg;
  cfg.hidden = 3;
  DrqnAgent agent(cfg, 2, 1);
  std::vector<double> p(agent.net().params().size(), 0.25);
  agent.set_global(p);
  CHECK(same(agent.net().params(), p));
  CHECK(same(agent.target().params(), p));
  CHECK_THROWS_AS(agent.set_global(std::vector<double>(3)), ShapeError);
}
