#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "poolprice/adaptive.hpp"
#include "poolprice/revenue.hpp"
#include "support.hpp"

using namespace poolprice;

namespace {

// Drives a round controller with scripted phase revenues.
std::vector<std::size_t> play(RoundController& c,
                              const std::vector<double>& revenue_by_arm) {
  double last = 0.0;
  while (auto ph = c.next_phase(0.0, 0, last)) {
    last = revenue_by_arm[c.arms_played().back()];
  }
  return c.arms_played();
}

}  // namespace

TEST_CASE("q") {
  CHECK(q(0.0, 3.0) == 0.0);
  CHECK(q(50.0, 1.0) == doctest::Approx(1.0));
  CHECK(q(0.1, 1.0) == doctest::Approx(0.0951626).epsilon(1e-6));
}

TEST_CASE("per-customer purchase frequency matches q") {
  // One customer, one price, a phase of length 0.1 at rate 1.
  const auto inst = make_udpm(1.0, {1.0}, {1});
  const ExplorationPlan plan({0.1});
  std::size_t buys = 0;
  const std::size_t reps = 1'000'000;
  for (std::size_t r = 0; r < reps; ++r)
    buys += simulate_learning_phase(inst, plan, r).sales[0];
  const double p = q(0.1, 1.0);
  CHECK(std::abs(double(buys) / reps - p) <= 3 * std::sqrt(p * (1 - p) / reps));
}

TEST_CASE("debiased estimates") {
  const ExplorationPlan plan({0.1, 0.1});
  const auto zero = debiased_estimates({{0, 0}}, plan, 1.0);
  CHECK(zero.n_hat[0] == 0.0);
  CHECK(zero.n_hat[1] == 0.0);

  const auto e = debiased_estimates({{10, 5}}, plan, 1.0);
  CHECK(e.n_hat[0] == doctest::Approx(105.083).epsilon(1e-5));
  CHECK(e.n_hat[1] == doctest::Approx(-42.54).epsilon(1e-3));

  // Exact expected count for the top type recovers it.
  const ExplorationPlan one({0.25});
  const double qv = q(0.25, 2.0);
  const auto x = debiased_estimates({{static_cast<std::size_t>(40)}}, one, 2.0);
  CHECK(x.n_hat[0] * qv == doctest::Approx(40.0));

  CHECK_THROWS_AS(debiased_estimates({{1}}, plan, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(debiased_estimates({{1, 2}}, plan, 0.0), std::invalid_argument);
}

TEST_CASE("re-deriving estimates is idempotent") {
  std::mt19937_64 gen(73);
  std::uniform_int_distribution<std::size_t> d(0, 30);
  for (int trial = 0; trial < 50; ++trial) {
    const ExplorationPlan plan({0.05, 0.1, 0.02, 0.2});
    PhaseObservations obs{{d(gen), d(gen), d(gen), d(gen)}};
    const auto a = debiased_estimates(obs, plan, 2.0);
    const auto b = debiased_estimates(obs, plan, 2.0);
    CHECK(a.n_hat == b.n_hat);
    // Telescoping: sum_j q_j (n_hat_j + carried_j) = sum_j D_j.
    double carried = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK((a.n_hat[j] + carried) * q(plan[j], 2.0) ==
            doctest::Approx(double(obs.sales[j])));
      carried += a.n_hat[j] - double(obs.sales[j]);
    }
  }
}

TEST_CASE("exploration plans") {
  const auto single = default_exploration(2.0, 1, 27.0);
  CHECK(single[0] == doctest::Approx(1.0 / (2.0 * 3.0)));
  CHECK(default_exploration(0.01, 1, 8.0)[0] == 0.5);
  const auto p = default_exploration(3.0, 5, 1024.0);
  CHECK(p[0] == doctest::Approx(0.01933).epsilon(1e-3));
  CHECK(p[0] == doctest::Approx(1.0 / (3.0 * std::cbrt(5120.0))));
  for (double lambda : {0.01, 1.0, 100.0})
    for (std::size_t k : {1, 2, 7})
      for (double n : {1.0, 1e6}) CHECK(default_exploration(lambda, k, n).total() < 1.0);
  CHECK_THROWS_AS(ExplorationPlan({0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(ExplorationPlan({0.1, 0.0}), std::invalid_argument);
}

TEST_CASE("LTE phase structure") {
  const auto inst = make_udpm(3.0, {1.0, 0.5}, {200, 100});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    LteController lte(3.0, inst.ladder(), ExplorationPlan({0.1, 0.1}));
    const auto out = simulate_pool(inst, DiscountMode::kUnitDemand, lte, seed);
    REQUIRE(out.phases.size() >= 3);
    CHECK(out.phases[0].price == 1.0);
    CHECK(out.phases[0].duration == doctest::Approx(0.1));
    CHECK(out.phases[1].price == 0.5);
    double total = 0.0;
    for (const auto& ph : out.phases) total += ph.duration;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(lte.earning_allocation());
    const auto& t = *lte.earning_allocation();
    double earned = 0.0;
    for (std::size_t i = 2; i < out.phases.size(); ++i) {
      earned += out.phases[i].duration;
      if (i > 2) CHECK(out.phases[i].price < out.phases[i - 1].price);
    }
    CHECK(earned == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(out.phases[2].duration ==
          doctest::Approx(0.8 * t[out.phases[2].price == 1.0 ? 0 : 1]));
    const auto est = lte.estimates();
    REQUIRE(est);
    CHECK(est->n_hat == debiased_estimates({{out.phases[0].sales, out.phases[1].sales}},
                                           ExplorationPlan({0.1, 0.1}), 3.0)
                            .n_hat);
  }
}

TEST_CASE("LTE falls back to the robust policy when nothing sells") {
  const auto inst = make_udpm(1e-9, {1.0, 0.5}, {3, 3});
  LteController lte(1e-9, inst.ladder(), ExplorationPlan({0.1, 0.1}));
  simulate_pool(inst, DiscountMode::kUnitDemand, lte, 1);
  REQUIRE(lte.earning_allocation());
  CHECK(*lte.earning_allocation() == robust_finite(inst.ladder()));
}

TEST_CASE("LTE on a large Dirac instance earns close to the optimum") {
  const auto inst = make_udpm(2.0, {1.0, 0.6, 0.3}, {10'000, 0, 0});
  const auto plan = default_exploration(2.0, 3, 10'000.0);
  double mean_dwell = 0.0;
  std::size_t concentrated = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    LteController lte(2.0, inst.ladder(), plan);
    simulate_pool(inst, DiscountMode::kUnitDemand, lte, seed);
    const double t0 = (*lte.earning_allocation())[0];
    mean_dwell += t0 / 200.0;
    if (t0 > 0.9) ++concentrated;
  }
  CHECK(mean_dwell >= 0.95);
  CHECK(concentrated >= 180);
  const auto est = estimate_revenue(inst, DiscountMode::kUnitDemand,
                                    lte_factory(2.0, inst.ladder(), plan),
                                    {200, 3, 1});
  const double opt = 10'000 * (1 - std::exp(-2.0));
  CHECK(est.mean <= opt);
  // Same learning phases, then the known optimum for the rest.
  const double s0 = plan[0];
  const PriceSchedule oracle({0.0, s0, 2 * s0, 3 * s0}, {1.0, 0.6, 0.3, 1.0});
  CHECK(est.mean >= 0.99 * testing_support::schedule_revenue(oracle, inst));
  CHECK(regret(inst, est.mean) >= -3 * est.std_error);
}

TEST_CASE("estimator is unbiased") {
  const auto inst = make_udpm(1.0, {1.0, 0.6, 0.3}, {150, 100, 50});
  const auto plan = default_exploration(1.0, 3, 300.0);
  const auto rep = error_process_diagnostics(inst, plan, 100'000, 81);
  for (const auto& b : rep.bias) CHECK(std::abs(b.mean) <= 3 * b.std_error);
  for (const auto& s : rep.running_sum) CHECK(std::abs(s.mean) <= 3 * s.std_error);
  for (const auto& c : rep.pointwise) CHECK(c.within());
  for (const auto& c : rep.uniform) CHECK(c.within());
}

TEST_CASE("single price: Bernstein tail") {
  const auto inst = make_udpm(1.0, {1.0}, {200});
  const ExplorationPlan plan({0.2});
  const double qv = q(0.2, 1.0);
  const ReplicationPlan rp{100'000, 5, 1};
  std::vector<double> dev(rp.num_reps);
  for (std::size_t r = 0; r < rp.num_reps; ++r) {
    const auto obs = simulate_learning_phase(inst, plan, rp.replication_seed(r));
    dev[r] = std::abs(debiased_estimates(obs, plan, 1.0).n_hat[0] - 200.0);
  }
  for (double tau : {5.0, 10.0, 20.0, 30.0, 45.0, 60.0}) {
    double hits = 0;
    for (double d : dev) hits += d > tau ? 1 : 0;
    const double bound = bernstein_tail_bound(200, qv, tau);
    const double slack = 3 * std::sqrt(bound * (1 - bound) / rp.num_reps);
    CHECK(hits / rp.num_reps <= bound + slack);
  }
  const auto rep = error_process_diagnostics(inst, plan, 20'000, 6);
  for (const auto& c : rep.pointwise) CHECK(c.within());
}

TEST_CASE("diagnostics reject a zero purchase probability") {
  const auto inst = make_udpm(1e-300, {1.0}, {5});
  CHECK_THROWS_AS(error_process_diagnostics(inst, ExplorationPlan({1e-300}), 10, 1),
                  std::invalid_argument);
}

TEST_CASE("UCB plays every arm once first") {
  UcbController ucb(PriceLadder::Uniform(4), {16, 1.0, 0, 0.0});
  const auto arms = play(ucb, {0.1, 0.9, 0.3, 0.2});
  REQUIRE(arms.size() == 16);
  for (std::size_t a = 0; a < 4; ++a) CHECK(arms[a] == a);
  CHECK(std::count(arms.begin(), arms.end(), 1) > 6);
}

TEST_CASE("EXP3 starts uniform") {
  Exp3Controller exp3(PriceLadder::Uniform(5), {20, 1.0, 0, 0.0}, 3);
  for (double p : exp3.probabilities()) CHECK(p == doctest::Approx(0.2));
  exp3.next_phase(0.0, 0, 0.0);
  exp3.next_phase(0.05, 0, 1.0);
  double s = 0.0;
  for (double p : exp3.probabilities()) s += p;
  CHECK(s == doctest::Approx(1.0));
  CHECK(default_exp3_rate(5, 20) == doctest::Approx(std::sqrt(2 * std::log(5.0) / 100)));
}

TEST_CASE("ETC cycles, then commits with ties to the highest price") {
  EtcController tie(PriceLadder::Uniform(3), {12, 1.0, 2, 0.0});
  const auto a = play(tie, {0.5, 0.5, 0.5});
  const std::vector<std::size_t> cycle{0, 1, 2, 0, 1, 2};
  CHECK(std::equal(cycle.begin(), cycle.end(), a.begin()));
  for (std::size_t i = 6; i < a.size(); ++i) CHECK(a[i] == 0);

  EtcController best(PriceLadder::Uniform(3), {12, 1.0, 2, 0.0});
  const auto b = play(best, {0.2, 0.3, 0.7});
  for (std::size_t i = 6; i < b.size(); ++i) CHECK(b[i] == 2);

  CHECK(default_explore_per_arm(5, 64) == 5);
  CHECK_THROWS_AS(EtcController(PriceLadder::Uniform(3), {2, 1.0, 0, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(UcbController(PriceLadder::Uniform(3), {2, 1.0, 0, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("rewards are normalized and clipped") {
  CHECK(bandit_normalizer(PriceLadder::Uniform(2), 100, 3.0, 64) ==
        doctest::Approx(100 * q(1.0 / 64, 3.0)));
  CHECK(bandit_normalizer(PriceLadder::Uniform(2), 1, 3.0, 64) == 1.0);
  // Huge revenue on arm 2 saturates at 1 and still wins.
  EtcController etc(PriceLadder::Uniform(3), {9, 1.0, 1, 0.0});
  const auto a = play(etc, {0.4, 0.2, 50.0});
  CHECK(a.back() == 2);
}

TEST_CASE("bandit controllers run inside the simulator") {
  const auto inst = make_udpm(3.0, {1.0, 0.5}, {64, 64});
  const BanditParams bp{16, bandit_normalizer(inst.ladder(), 128, 3.0, 16), 0, 0.0};
  for (const auto& f : {etc_factory(inst.ladder(), bp), ucb_factory(inst.ladder(), bp),
                        exp3_factory(inst.ladder(), bp),
                        random_round_factory(inst.ladder(),
                                             robust_stream(inst.ladder()), 16)}) {
    auto c = f(11);
    const auto out = simulate_pool(inst, DiscountMode::kUnitDemand, *c, 11);
    CHECK(out.phases.size() == 16);
    CHECK(out.revenue <= upper_bound(inst) * 3);
    CHECK(regret(inst, out.revenue) <= solve_gradient(inst).value);
  }
}

TEST_CASE("random-round simulation matches its closed form") {
  const auto inst = make_udpm(2.0, {1.0, 0.6, 0.3}, {5, 5, 5});
  const auto dist = robust_stream(inst.ladder());
  const auto est = estimate_revenue(inst, DiscountMode::kUnitDemand,
                                    random_round_factory(inst.ladder(), dist, 8),
                                    {50'000, 19, 1});
  CHECK(std::abs(est.mean - random_round_revenue(dist, inst, 8)) <=
        3 * est.std_error);
}
