#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "poolprice/core.hpp"
#include "poolprice/robust.hpp"

namespace poolprice {

struct SaleEvent {
  double time = 0.0;
  double price = 0.0;
  // Ladder index of the buyer's valuation.
  std::size_t type_index = 0;

  friend bool operator==(const SaleEvent&, const SaleEvent&) = default;
};

struct PhaseSummary {
  double price = 0.0;
  double duration = 0.0;
  std::size_t sales = 0;
  double revenue = 0.0;

  friend bool operator==(const PhaseSummary&, const PhaseSummary&) = default;
};

struct SimOutcome {
  double revenue = 0.0;
  // Time ordered.
  std::vector<SaleEvent> sales;
  std::vector<PhaseSummary> phases;

  friend bool operator==(const SimOutcome&, const SimOutcome&) = default;
};

struct Phase {
  double price = 0.0;
  double duration = 0.0;
};

// Decides prices phase by phase from aggregate feedback only. Called at
// t = 0 (with zero sales and revenue) and again at the end of every phase.
// Returning nullopt ends the selling season early.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::optional<Phase> next_phase(double now,
                                          std::size_t last_phase_sales,
                                          double last_phase_revenue) = 0;
};

// Builds a fresh controller for one replication. The seed is for
// controllers that randomize; deterministic ones ignore it.
using ControllerFactory =
    std::function<std::unique_ptr<Controller>(std::uint64_t seed)>;

// Pool model under a fixed schedule. UnitDemand uses the closed-form fast
// path (one exponential per customer); ConstantOne is event driven.
// Throws std::invalid_argument on fractional counts.
SimOutcome simulate_pool(const UdpmInstance& inst, DiscountMode mode,
                         const PriceSchedule& schedule, std::uint64_t seed);

// Always event driven. The reference the fast path is tested against.
SimOutcome simulate_pool_events(const UdpmInstance& inst, DiscountMode mode,
                                const PriceSchedule& schedule,
                                std::uint64_t seed);

// Pool model driven by a controller. Phases running past t = 1 are
// truncated. Throws std::invalid_argument on a nonpositive or non-finite
// duration or price.
SimOutcome simulate_pool(const UdpmInstance& inst, DiscountMode mode,
                         Controller& controller, std::uint64_t seed);

// Stream model: Poisson(base_rate) arrivals, each with an independent
// valuation drawn so that P(v >= p_j) = d(p_j).
SimOutcome simulate_stream(const StreamInstance& inst,
                           const PriceSchedule& schedule, std::uint64_t seed);

struct ReplicationPlan {
  std::size_t num_reps = 0;
  std::uint64_t master_seed = 0;
  std::size_t threads = 1;

  std::uint64_t replication_seed(std::size_t r) const;
};

struct Estimate {
  double mean = 0.0;
  // NaN when there is a single replication.
  double std_error = 0.0;
};

// Sample mean and standard error. Throws on an empty sample.
Estimate summarize(std::span<const double> samples);

// Evaluates fn(replication_seed(r)) for every r and returns the values in
// replication order, whatever the thread count.
std::vector<double> replicate(const ReplicationPlan& plan,
                              const std::function<double(std::uint64_t)>& fn);

// Throws std::invalid_argument when num_reps == 0.
Estimate estimate_revenue(const UdpmInstance& inst, DiscountMode mode,
                          const PriceSchedule& schedule,
                          const ReplicationPlan& plan);
Estimate estimate_revenue(const UdpmInstance& inst, DiscountMode mode,
                          const ControllerFactory& factory,
                          const ReplicationPlan& plan);
// Allocations run as markdown schedules; a distribution commits to one
// sampled price per replication.
Estimate estimate_revenue(const UdpmInstance& inst, DiscountMode mode,
                          const NonAdaptivePolicy& policy,
                          const ReplicationPlan& plan);

// Revenue-only variant of the UnitDemand fast path; no sale list is built.
double pool_revenue_fast(const UdpmInstance& inst,
                         const PriceSchedule& schedule, std::uint64_t seed);

// Sales with time in [from, to).
std::size_t sales_between(const SimOutcome& outcome, double from, double to);

}  // namespace poolprice
