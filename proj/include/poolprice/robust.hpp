#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "poolprice/core.hpp"

namespace poolprice {

// Probability weights over ladder prices. Read either as "commit to one
// price for the whole horizon" (naive randomized) or as a per-round price
// distribution (stream-model policies).
class PriceDistribution {
 public:
  explicit PriceDistribution(std::vector<double> weights);

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t j) const { return w_[j]; }
  std::span<const double> weights() const { return w_; }

  friend bool operator==(const PriceDistribution&,
                         const PriceDistribution&) = default;

 private:
  std::vector<double> w_;
};

// A detail-free non-adaptive policy: a markdown allocation or a random
// commitment to one price.
using NonAdaptivePolicy = std::variant<MarkdownAllocation, PriceDistribution>;

// Exact expected revenue. A distribution is evaluated as the mixture of the
// one-hot allocations, never by sampling.
double policy_revenue(const NonAdaptivePolicy& policy,
                      const UdpmInstance& inst);

// The allocation a randomized policy averages to; identity on allocations.
MarkdownAllocation mean_allocation(const NonAdaptivePolicy& policy);

// t_k = 1 / (k - sum_j p_{j+1}/p_j), t_j = (1 - p_{j+1}/p_j) t_k.
MarkdownAllocation robust_finite(const PriceLadder& ladder);

// 1 / (k - sum_{j<k} p_{j+1}/p_j); always >= 1/k.
double cr_lower_bound(const PriceLadder& ladder);

// t_j = 1/k.
MarkdownAllocation naive_deterministic(const PriceLadder& ladder);

// Weight 1/k on each price.
PriceDistribution naive_randomized(const PriceLadder& ladder);

// Max-min optimal per-round price distribution for the stream model. Same
// numbers as robust_finite.
PriceDistribution robust_stream(const PriceLadder& ladder);

// min_i sum_{j >= i} w_j p_j / p_i: the stream-model competitive ratio of a
// per-round distribution (the worst case is a single valuation).
double stream_competitive_ratio(const PriceDistribution& dist,
                                const PriceLadder& ladder);

// Expected UDPM revenue when the horizon is cut into `rounds` equal phases
// and each phase price is drawn independently from `dist`.
double random_round_revenue(const PriceDistribution& dist,
                            const UdpmInstance& inst, std::size_t rounds);

// X_t = p_max exp(-t (1 + ln rho)) until 1 - 1/(1 + ln rho), then p_min.
class ContinuousRobustPolicy {
 public:
  ContinuousRobustPolicy(double p_min, double p_max);

  double p_min() const { return p_min_; }
  double p_max() const { return p_max_; }
  double price_at(double t) const;
  // Time at which the price reaches the floor p_min.
  double floor_onset() const;
  // 1 / (1 + ln(p_max / p_min)).
  double cr_guarantee() const;
  // Piecewise-constant version with `steps` pieces: steps - 1 equal pieces
  // on the decay segment sampled at their left ends, then the floor.
  PriceSchedule discretize(std::size_t steps = 512) const;

 private:
  double p_min_;
  double p_max_;
  double log_ratio_;
};

ContinuousRobustPolicy robust_continuous(double p_min, double p_max);

// {p_max (1 + eps)^{-i} : i = 0..K}, K = ceil(ln(p_max/p_min) / ln(1 + eps)).
PriceLadder epsilon_geometric_grid(double p_min, double p_max, double eps);

// All n customers value the product at ladder[atom].
struct DiracAdversary {
  PriceLadder ladder;
  std::size_t atom;
  double lambda;
  double n;

  UdpmInstance instance() const;
  // p_atom (1 - e^{-lambda}) n; the fixed price at the atom attains it.
  double opt() const;
};

// Minimum over the k Dirac adversaries of Rev(policy) / OPT. This is an
// upper bound on the policy's competitive ratio and, for small lambda, tight.
double worst_case_ratio(const NonAdaptivePolicy& policy,
                        const PriceLadder& ladder, double lambda,
                        double n = 1.0);

struct AdversarialCertificate {
  UdpmInstance instance;
  std::size_t atom;
  // Rev(policy, instance) / OPT(instance).
  double ratio;
};

// Geometric ladder with common ratio 1/a, a = (k-1)/(k - 1/(1/k + eps/2)),
// Dirac atom at argmin_i sum_{j>=i} (p_j/p_i) t_j of the policy's mean
// allocation, lambda = eps/(2k). The certified ratio is at most 1/k + eps.
AdversarialCertificate adversarial_instance(const NonAdaptivePolicy& policy,
                                            std::size_t k, double eps);

// Ladder used by adversarial_instance for a given (k, eps).
PriceLadder adversarial_ladder(std::size_t k, double eps);

}  // namespace poolprice
