#include <cmath>
#include <memory>
#include <random>

#include "doctest.h"
#include "poolprice/revenue.hpp"
#include "poolprice/robust.hpp"
#include "poolprice/sim.hpp"
#include "support.hpp"

using namespace poolprice;

namespace {

bool within(const Estimate& e, double want, double sigmas = 3.0) {
  return std::abs(e.mean - want) <= sigmas * e.std_error;
}

class FixedPhases : public Controller {
 public:
  explicit FixedPhases(std::vector<Phase> phases) : phases_(std::move(phases)) {}
  std::optional<Phase> next_phase(double, std::size_t, double) override {
    if (i_ == phases_.size()) return std::nullopt;
    return phases_[i_++];
  }

 private:
  std::vector<Phase> phases_;
  std::size_t i_ = 0;
};

}  // namespace

TEST_CASE("vanishing rate: no sales") {
  const auto inst = make_udpm(1e-12, {1.0, 0.5}, {50, 50});
  const auto s = PriceSchedule::Constant(0.5);
  for (auto mode : {DiscountMode::kUnitDemand, DiscountMode::kConstantOne}) {
    const auto out = simulate_pool(inst, mode, s, 1);
    CHECK(out.revenue == 0.0);
    CHECK(out.sales.empty());
  }
}

TEST_CASE("constant price below every valuation") {
  const auto inst = make_udpm(1.3, {1.0, 0.6, 0.4}, {5, 3, 2});
  const auto est = estimate_revenue(inst, DiscountMode::kUnitDemand,
                                    PriceSchedule::Constant(0.3),
                                    {100'000, 5, 1});
  CHECK(within(est, 10 * 0.3 * (1 - std::exp(-1.3))));
}

TEST_CASE("determinism") {
  const auto inst = make_udpm(2.0, {1.0, 0.6, 0.3}, {7, 5, 9});
  const auto s = PriceSchedule::FromAllocation(MarkdownAllocation({0.2, 0.3, 0.5}),
                                               inst.ladder());
  for (auto mode : {DiscountMode::kUnitDemand, DiscountMode::kConstantOne}) {
    CHECK(simulate_pool(inst, mode, s, 99) == simulate_pool(inst, mode, s, 99));
    CHECK(simulate_pool_events(inst, mode, s, 99) ==
          simulate_pool_events(inst, mode, s, 99));
  }
  const ReplicationPlan one{2000, 8, 1}, four{2000, 8, 4};
  const auto a = estimate_revenue(inst, DiscountMode::kUnitDemand, s, one);
  const auto b = estimate_revenue(inst, DiscountMode::kUnitDemand, s, four);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("outcome bookkeeping and conservation") {
  const auto inst = make_udpm(4.0, {1.0, 0.6, 0.3}, {7, 5, 9});
  const auto s = PriceSchedule::FromAllocation(MarkdownAllocation({0.2, 0.3, 0.5}),
                                               inst.ladder());
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (const auto& out :
         {simulate_pool(inst, DiscountMode::kUnitDemand, s, seed),
          simulate_pool_events(inst, DiscountMode::kUnitDemand, s, seed)}) {
      double rev = 0.0;
      std::vector<double> per_type(3, 0.0);
      for (std::size_t i = 0; i < out.sales.size(); ++i) {
        rev += out.sales[i].price;
        per_type[out.sales[i].type_index] += 1;
        if (i > 0) CHECK(out.sales[i].time >= out.sales[i - 1].time);
        CHECK(out.sales[i].price <= inst.ladder()[out.sales[i].type_index]);
      }
      CHECK(out.revenue == doctest::Approx(rev));
      for (std::size_t j = 0; j < 3; ++j) CHECK(per_type[j] <= inst.count(j));
      std::size_t phase_sales = 0;
      for (const auto& ph : out.phases) phase_sales += ph.sales;
      CHECK(phase_sales == out.sales.size());
    }
  }
}

TEST_CASE("fractional counts are rejected") {
  const auto inst = make_udpm(1.0, {1.0}, {2.5});
  CHECK_THROWS_AS(
      simulate_pool(inst, DiscountMode::kUnitDemand, PriceSchedule::Constant(1.0), 1),
      std::invalid_argument);
}

TEST_CASE("fast path and event engine agree in distribution") {
  std::mt19937_64 gen(67);
  for (int trial = 0; trial < 4; ++trial) {
    const auto inst = testing_support::random_instance(gen, 3, 1.0 + trial, true);
    const auto t = testing_support::random_allocation(gen, 3);
    const auto s = PriceSchedule::FromAllocation(t, inst.ladder());
    const ReplicationPlan plan{40'000, 100u + trial, 1};
    const auto fast = estimate_revenue(inst, DiscountMode::kUnitDemand, s, plan);
    const auto events = replicate(plan, [&](std::uint64_t seed) {
      return simulate_pool_events(inst, DiscountMode::kUnitDemand, s, seed).revenue;
    });
    const auto ev = summarize(events);
    const double want = expected_revenue(t, inst);
    CHECK(within(fast, want));
    CHECK(within(ev, want));
  }
}

TEST_CASE("schedules with price increases are simulated exactly") {
  // A markup order; the oracle is written directly from the model.
  const auto inst = make_udpm(1.5, {1.0, 0.6, 0.3}, {4, 3, 3});
  const PriceSchedule s({0.0, 0.3, 0.5, 0.8}, {0.3, 1.0, 0.6, 1.0});
  const ReplicationPlan plan{100'000, 3, 1};
  const double want = testing_support::schedule_revenue(s, inst);
  CHECK(within(estimate_revenue(inst, DiscountMode::kUnitDemand, s, plan), want));
  const auto ev = summarize(replicate(plan, [&](std::uint64_t seed) {
    return simulate_pool_events(inst, DiscountMode::kUnitDemand, s, seed).revenue;
  }));
  CHECK(within(ev, want));
}

TEST_CASE("constant-one mode: Poisson purchase counts") {
  const auto inst = make_udpm(2.0, {1.0, 0.5}, {3, 4});
  const auto s = PriceSchedule::Constant(0.5);
  const auto est = estimate_revenue(inst, DiscountMode::kConstantOne, s,
                                    {50'000, 12, 1});
  CHECK(within(est, 7 * 2.0 * 0.5));
}

TEST_CASE("stream model") {
  const StreamInstance none(5.0, PriceLadder({1.0, 0.5}), {0.0, 0.0});
  CHECK(simulate_stream(none, PriceSchedule::Constant(0.5), 3).revenue == 0.0);

  const StreamInstance st(6.0, PriceLadder({1.0, 0.5}), {0.25, 0.75});
  for (std::size_t j = 0; j < 2; ++j) {
    const auto s = PriceSchedule::Constant(st.ladder()[j]);
    const auto sales = summarize(replicate({100'000, 21 + j, 1}, [&](std::uint64_t seed) {
      return double(simulate_stream(st, s, seed).sales.size());
    }));
    CHECK(within(sales, 6.0 * st.demand()[j]));
  }
}

TEST_CASE("pool and stream demand means agree") {
  const std::vector<double> v{1.0, 1.0, 0.6, 0.3, 0.3, 0.3};
  const PriceLadder ladder({1.0, 0.6, 0.3});
  const double lambda = 1.5;
  const auto pool = UdpmInstance(lambda, ladder, tally_valuations(v, ladder));
  const StreamInstance stream(6 * lambda, ladder, demand_function(v, ladder));
  const auto s = PriceSchedule::FromAllocation(MarkdownAllocation({0.3, 0.3, 0.4}),
                                               ladder);
  const ReplicationPlan plan{100'000, 77, 1};
  for (auto [a, b] : {std::pair{0.0, 1.0}, std::pair{0.1, 0.45}, std::pair{0.6, 0.9}}) {
    const auto x = summarize(replicate(plan, [&](std::uint64_t seed) {
      return double(sales_between(
          simulate_pool(pool, DiscountMode::kConstantOne, s, seed), a, b));
    }));
    const auto y = summarize(replicate(plan, [&](std::uint64_t seed) {
      return double(sales_between(simulate_stream(stream, s, seed ^ 0xabcdef), a, b));
    }));
    const double z =
        (x.mean - y.mean) / std::hypot(x.std_error, y.std_error);
    CHECK(std::abs(z) <= 3.0);
  }
  // Whole horizon at the lowest price: every interaction is a sale.
  const auto full = summarize(replicate(plan, [&](std::uint64_t seed) {
    return double(simulate_stream(stream, PriceSchedule::Constant(0.3), seed)
                      .sales.size());
  }));
  CHECK(within(full, 6 * lambda));
}

TEST_CASE("estimate_revenue edge cases") {
  const auto inst = make_udpm(1.0, {1.0}, {4});
  const auto s = PriceSchedule::Constant(1.0);
  const auto one = estimate_revenue(inst, DiscountMode::kUnitDemand, s, {1, 9, 1});
  CHECK(std::isnan(one.std_error));
  CHECK(one.mean ==
        simulate_pool(inst, DiscountMode::kUnitDemand, s,
                      ReplicationPlan{1, 9, 1}.replication_seed(0))
            .revenue);
  CHECK_THROWS_AS(estimate_revenue(inst, DiscountMode::kUnitDemand, s, {0, 9, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(summarize(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("one-hot at the top price on a Dirac instance") {
  const auto inst = make_udpm(2.0, {1.0, 0.5}, {20, 0});
  const NonAdaptivePolicy t = MarkdownAllocation::OneHot(2, 0);
  const auto est =
      estimate_revenue(inst, DiscountMode::kUnitDemand, t, {50'000, 4, 1});
  CHECK(within(est, 20 * (1 - std::exp(-2.0))));
}

TEST_CASE("robust policy and price distributions match closed forms") {
  std::mt19937_64 gen(71);
  const auto inst = testing_support::random_instance(gen, 4, 2.0, true);
  const NonAdaptivePolicy rp = robust_finite(inst.ladder());
  CHECK(within(estimate_revenue(inst, DiscountMode::kUnitDemand, rp,
                                {50'000, 6, 1}),
               policy_revenue(rp, inst)));
  const NonAdaptivePolicy nr = naive_randomized(inst.ladder());
  CHECK(within(estimate_revenue(inst, DiscountMode::kUnitDemand, nr,
                                {50'000, 7, 1}),
               policy_revenue(nr, inst)));
}

TEST_CASE("controller-driven simulation") {
  const auto inst = make_udpm(2.0, {1.0, 0.5}, {3, 4});
  FixedPhases two({{1.0, 0.4}, {0.5, 0.6}});
  const auto ctl = simulate_pool(inst, DiscountMode::kConstantOne, two, 5);
  REQUIRE(ctl.phases.size() == 2);
  CHECK(ctl.phases[1].duration == doctest::Approx(0.6));

  // Phases past the horizon are truncated; early stop is allowed.
  FixedPhases longer({{1.0, 0.7}, {0.5, 0.7}});
  const auto cut = simulate_pool(inst, DiscountMode::kUnitDemand, longer, 5);
  REQUIRE(cut.phases.size() == 2);
  CHECK(cut.phases[1].duration == doctest::Approx(0.3));
  FixedPhases stop({{1.0, 0.2}});
  CHECK(simulate_pool(inst, DiscountMode::kUnitDemand, stop, 5).phases.size() == 1);

  FixedPhases bad({{1.0, 0.0}});
  CHECK_THROWS_AS(simulate_pool(inst, DiscountMode::kUnitDemand, bad, 5),
                  std::invalid_argument);
  FixedPhases nan_price({{std::nan(""), 0.5}});
  CHECK_THROWS_AS(simulate_pool(inst, DiscountMode::kUnitDemand, nan_price, 5),
                  std::invalid_argument);

  const ControllerFactory f = [](std::uint64_t) {
    return std::make_unique<FixedPhases>(std::vector<Phase>{{1.0, 0.4}, {0.5, 0.6}});
  };
  const auto est =
      estimate_revenue(inst, DiscountMode::kUnitDemand, f, {50'000, 15, 1});
  CHECK(within(est, expected_revenue(MarkdownAllocation({0.4, 0.6}), inst)));
}
