#include "poolprice/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "poolprice/parallel.hpp"
#include "poolprice/rng.hpp"

namespace poolprice {

namespace {

// Substream index reserved for the policy's own randomness; customer
// substreams use indices 0..n-1.
constexpr std::uint64_t kPolicyStream = ~std::uint64_t{0};

constexpr double kHorizonSlack = 1e-12;

void require_integral(const UdpmInstance& inst) {
  if (!inst.has_integral_counts()) {
    throw std::invalid_argument("simulation needs whole customer counts");
  }
}

// [first, last) customer indices of each type; customers are laid out type
// by type.
std::vector<std::size_t> type_offsets(const UdpmInstance& inst) {
  std::vector<std::size_t> off(inst.size() + 1, 0);
  for (std::size_t j = 0; j < inst.size(); ++j) {
    off[j + 1] = off[j] + static_cast<std::size_t>(std::llround(inst.count(j)));
  }
  return off;
}

void sort_by_time(std::vector<SaleEvent>& sales, std::size_t from) {
  std::stable_sort(sales.begin() + static_cast<std::ptrdiff_t>(from),
                   sales.end(), [](const SaleEvent& a, const SaleEvent& b) {
                     return a.time < b.time;
                   });
}

// Per-customer event engine. Interaction times are only materialized while
// a customer could buy; a stale next event is redrawn from the phase start,
// which is exact because exponential gaps are memoryless.
class PoolEngine {
 public:
  PoolEngine(const UdpmInstance& inst, DiscountMode mode, std::uint64_t seed)
      : inst_(inst), mode_(mode), offsets_(type_offsets(inst)) {
    const std::size_t n = offsets_.back();
    rng_.reserve(n);
    for (std::size_t c = 0; c < n; ++c) rng_.emplace_back(derive_seed(seed, c));
    next_.assign(n, -std::numeric_limits<double>::infinity());
    alive_.assign(n, 1);
  }

  PhaseSummary run_phase(double from, double to, double price,
                         std::vector<SaleEvent>& sales) {
    const std::size_t first_sale = sales.size();
    const double lambda = inst_.lambda();
    const bool unit = mode_ == DiscountMode::kUnitDemand;
    for (std::size_t j = 0; j < inst_.size(); ++j) {
      if (inst_.ladder()[j] < price) continue;
      for (std::size_t c = offsets_[j]; c < offsets_[j + 1]; ++c) {
        if (!alive_[c]) continue;
        double& t = next_[c];
        if (t < from) t = from + rng_[c].exponential(lambda);
        while (t < to) {
          sales.push_back({t, price, j});
          if (unit) {
            alive_[c] = 0;
            break;
          }
          t += rng_[c].exponential(lambda);
        }
      }
    }
    sort_by_time(sales, first_sale);
    PhaseSummary summary{price, to - from, sales.size() - first_sale, 0.0};
    for (std::size_t i = first_sale; i < sales.size(); ++i) {
      summary.revenue += sales[i].price;
    }
    return summary;
  }

 private:
  const UdpmInstance& inst_;
  DiscountMode mode_;
  std::vector<std::size_t> offsets_;
  std::vector<RandomStream> rng_;
  std::vector<double> next_;
  std::vector<unsigned char> alive_;
};

// For each type, the schedule pieces it would buy in, with cumulative
// eligible time. A UnitDemand customer buys at its first interaction inside
// that eligible set, i.e. after Exp(lambda) units of eligible time.
struct EligibleSet {
  std::vector<std::size_t> piece;
  std::vector<double> cum_end;  // eligible time through piece i
};

std::vector<EligibleSet> eligible_sets(const UdpmInstance& inst,
                                       const PriceSchedule& schedule) {
  std::vector<EligibleSet> sets(inst.size());
  for (std::size_t j = 0; j < inst.size(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      if (schedule.price(i) > inst.ladder()[j]) continue;
      acc += schedule.end(i) - schedule.start(i);
      sets[j].piece.push_back(i);
      sets[j].cum_end.push_back(acc);
    }
  }
  return sets;
}

template <typename Sink>
void fast_unit_demand(const UdpmInstance& inst, const PriceSchedule& schedule,
                      std::uint64_t seed, Sink&& sink) {
  require_integral(inst);
  const auto sets = eligible_sets(inst, schedule);
  const auto offsets = type_offsets(inst);
  for (std::size_t j = 0; j < inst.size(); ++j) {
    const auto& set = sets[j];
    if (set.piece.empty()) continue;
    const double total = set.cum_end.back();
    for (std::size_t c = offsets[j]; c < offsets[j + 1]; ++c) {
      RandomStream rng(derive_seed(seed, c));
      const double wait = rng.exponential(inst.lambda());
      if (wait >= total) continue;
      const auto it =
          std::upper_bound(set.cum_end.begin(), set.cum_end.end(), wait);
      const auto pos = static_cast<std::size_t>(it - set.cum_end.begin());
      const std::size_t piece = set.piece[pos];
      const double into =
          wait - (pos == 0 ? 0.0 : set.cum_end[pos - 1]);
      sink(piece, schedule.start(piece) + into, j);
    }
  }
}

}  // namespace

SimOutcome simulate_pool_events(const UdpmInstance& inst, DiscountMode mode,
                                const PriceSchedule& schedule,
                                std::uint64_t seed) {
  require_integral(inst);
  PoolEngine engine(inst, mode, seed);
  SimOutcome out;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    auto summary = engine.run_phase(schedule.start(i), schedule.end(i),
                                    schedule.price(i), out.sales);
    out.revenue += summary.revenue;
    out.phases.push_back(summary);
  }
  return out;
}

SimOutcome simulate_pool(const UdpmInstance& inst, DiscountMode mode,
                         const PriceSchedule& schedule, std::uint64_t seed) {
  if (mode != DiscountMode::kUnitDemand) {
    return simulate_pool_events(inst, mode, schedule, seed);
  }
  SimOutcome out;
  out.phases.resize(schedule.size());
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    out.phases[i].price = schedule.price(i);
    out.phases[i].duration = schedule.end(i) - schedule.start(i);
  }
  fast_unit_demand(inst, schedule, seed,
                   [&](std::size_t piece, double time, std::size_t type) {
                     out.sales.push_back({time, schedule.price(piece), type});
                     out.phases[piece].sales += 1;
                   });
  sort_by_time(out.sales, 0);
  for (const auto& s : out.sales) out.revenue += s.price;
  for (auto& ph : out.phases) ph.revenue = ph.price * static_cast<double>(ph.sales);
  return out;
}

double pool_revenue_fast(const UdpmInstance& inst,
                         const PriceSchedule& schedule, std::uint64_t seed) {
  double revenue = 0.0;
  fast_unit_demand(inst, schedule, seed,
                   [&](std::size_t piece, double, std::size_t) {
                     revenue += schedule.price(piece);
                   });
  return revenue;
}

SimOutcome simulate_pool(const UdpmInstance& inst, DiscountMode mode,
                         Controller& controller, std::uint64_t seed) {
  require_integral(inst);
  PoolEngine engine(inst, mode, seed);
  SimOutcome out;
  double now = 0.0;
  std::size_t last_sales = 0;
  double last_revenue = 0.0;
  while (now < 1.0 - kHorizonSlack) {
    const auto phase = controller.next_phase(now, last_sales, last_revenue);
    if (!phase) break;
    if (!(phase->duration > 0.0) || !std::isfinite(phase->duration)) {
      throw std::invalid_argument("controller requested a nonpositive duration");
    }
    if (!(phase->price > 0.0) || !std::isfinite(phase->price)) {
      throw std::invalid_argument("controller requested a nonpositive price");
    }
    const double end = std::min(1.0, now + phase->duration);
    auto summary = engine.run_phase(now, end, phase->price, out.sales);
    out.revenue += summary.revenue;
    out.phases.push_back(summary);
    last_sales = summary.sales;
    last_revenue = summary.revenue;
    now = end;
  }
  return out;
}

SimOutcome simulate_stream(const StreamInstance& inst,
                           const PriceSchedule& schedule, std::uint64_t seed) {
  RandomStream rng(seed);
  const auto& ladder = inst.ladder();
  const auto demand = inst.demand();
  SimOutcome out;
  out.phases.resize(schedule.size());
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    out.phases[i].price = schedule.price(i);
    out.phases[i].duration = schedule.end(i) - schedule.start(i);
  }
  std::size_t piece = 0;
  double t = rng.exponential(inst.base_rate());
  while (t < 1.0) {
    while (piece + 1 < schedule.size() && t >= schedule.end(piece)) ++piece;
    const double price = schedule.price(piece);
    // Valuation index: the first j with u < d(p_j); none means the arrival
    // values the product below every ladder price.
    const double u = rng.uniform();
    std::size_t v = 0;
    while (v < demand.size() && !(u < demand[v])) ++v;
    if (v < demand.size() && ladder[v] >= price) {
      out.sales.push_back({t, price, v});
      out.phases[piece].sales += 1;
      out.phases[piece].revenue += price;
      out.revenue += price;
    }
    t += rng.exponential(inst.base_rate());
  }
  return out;
}

std::uint64_t ReplicationPlan::replication_seed(std::size_t r) const {
  return derive_seed(master_seed, r);
}

Estimate summarize(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("no replications");
  const auto n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (double x : samples) sum += x;
  const double mean = sum / n;
  if (samples.size() == 1) {
    return {mean, std::numeric_limits<double>::quiet_NaN()};
  }
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

std::vector<double> replicate(const ReplicationPlan& plan,
                              const std::function<double(std::uint64_t)>& fn) {
  if (plan.num_reps == 0) throw std::invalid_argument("num_reps must be positive");
  std::vector<double> values(plan.num_reps);
  parallel_for(plan.num_reps, plan.threads, [&](std::size_t r) {
    values[r] = fn(plan.replication_seed(r));
  });
  return values;
}

Estimate estimate_revenue(const UdpmInstance& inst, DiscountMode mode,
                          const PriceSchedule& schedule,
                          const ReplicationPlan& plan) {
  require_integral(inst);
  const auto values = replicate(plan, [&](std::uint64_t seed) {
    if (mode == DiscountMode::kUnitDemand) {
      return pool_revenue_fast(inst, schedule, seed);
    }
    return simulate_pool_events(inst, mode, schedule, seed).revenue;
  });
  return summarize(values);
}

Estimate estimate_revenue(const UdpmInstance& inst, DiscountMode mode,
                          const ControllerFactory& factory,
                          const ReplicationPlan& plan) {
  require_integral(inst);
  const auto values = replicate(plan, [&](std::uint64_t seed) {
    auto controller = factory(derive_seed(seed, kPolicyStream));
    return simulate_pool(inst, mode, *controller, seed).revenue;
  });
  return summarize(values);
}

Estimate estimate_revenue(const UdpmInstance& inst, DiscountMode mode,
                          const NonAdaptivePolicy& policy,
                          const ReplicationPlan& plan) {
  if (const auto* t = std::get_if<MarkdownAllocation>(&policy)) {
    return estimate_revenue(
        inst, mode, PriceSchedule::FromAllocation(*t, inst.ladder()), plan);
  }
  require_integral(inst);
  const auto& dist = std::get<PriceDistribution>(policy);
  if (dist.size() != inst.size()) {
    throw std::invalid_argument("distribution and instance differ in length");
  }
  const auto values = replicate(plan, [&](std::uint64_t seed) {
    RandomStream rng(derive_seed(seed, kPolicyStream));
    const double u = rng.uniform();
    std::size_t j = 0;
    double acc = dist[0];
    while (j + 1 < dist.size() && !(u < acc)) acc += dist[++j];
    const auto schedule = PriceSchedule::Constant(inst.ladder()[j]);
    if (mode == DiscountMode::kUnitDemand) {
      return pool_revenue_fast(inst, schedule, seed);
    }
    return simulate_pool_events(inst, mode, schedule, seed).revenue;
  });
  return summarize(values);
}

std::size_t sales_between(const SimOutcome& outcome, double from, double to) {
  std::size_t count = 0;
  for (const auto& s : outcome.sales) {
    if (s.time >= from && s.time < to) ++count;
  }
  return count;
}

}  // namespace poolprice
