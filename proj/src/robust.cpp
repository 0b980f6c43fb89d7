#include "poolprice/robust.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "poolprice/revenue.hpp"
#include "poolprice/tolerances.hpp"

namespace poolprice {

namespace {

void check_aligned(std::size_t size, const PriceLadder& ladder) {
  if (size != ladder.size()) {
    throw std::invalid_argument("policy and ladder differ in length");
  }
}

std::size_t policy_size(const NonAdaptivePolicy& policy) {
  return std::visit([](const auto& p) { return p.size(); }, policy);
}

// Weighted tail sum_{j >= i} w_j p_j / p_i.
double tail_ratio(std::span<const double> w, const PriceLadder& ladder,
                  std::size_t i) {
  double acc = 0.0;
  for (std::size_t j = i; j < w.size(); ++j) acc += w[j] * ladder[j];
  return acc / ladder[i];
}

}  // namespace

PriceDistribution::PriceDistribution(std::vector<double> weights)
    : w_(std::move(weights)) {
  if (w_.empty()) throw std::invalid_argument("distribution is empty");
  double sum = 0.0;
  for (double x : w_) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument("weights must be nonnegative");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > tol::kSimplexSum) {
    throw std::invalid_argument("weights must sum to 1");
  }
}

double policy_revenue(const NonAdaptivePolicy& policy,
                      const UdpmInstance& inst) {
  if (const auto* t = std::get_if<MarkdownAllocation>(&policy)) {
    return expected_revenue(*t, inst);
  }
  const auto& dist = std::get<PriceDistribution>(policy);
  if (dist.size() != inst.size()) {
    throw std::invalid_argument("distribution and instance differ in length");
  }
  // Committing to p_j sells to every type l <= j with prob 1 - e^{-lambda}.
  const double q = -std::expm1(-inst.lambda());
  double above = 0.0;
  double rev = 0.0;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    above += inst.count(j);
    rev += dist[j] * inst.ladder()[j] * above * q;
  }
  return rev;
}

MarkdownAllocation mean_allocation(const NonAdaptivePolicy& policy) {
  if (const auto* t = std::get_if<MarkdownAllocation>(&policy)) return *t;
  const auto& dist = std::get<PriceDistribution>(policy);
  return MarkdownAllocation({dist.weights().begin(), dist.weights().end()});
}

double cr_lower_bound(const PriceLadder& ladder) {
  double ratios = 0.0;
  for (std::size_t j = 0; j + 1 < ladder.size(); ++j) {
    ratios += ladder[j + 1] / ladder[j];
  }
  return 1.0 / (static_cast<double>(ladder.size()) - ratios);
}

MarkdownAllocation robust_finite(const PriceLadder& ladder) {
  const std::size_t k = ladder.size();
  const double last = cr_lower_bound(ladder);
  std::vector<double> t(k);
  for (std::size_t j = 0; j + 1 < k; ++j) {
    t[j] = (1.0 - ladder[j + 1] / ladder[j]) * last;
  }
  t[k - 1] = last;
  return MarkdownAllocation(std::move(t));
}

MarkdownAllocation naive_deterministic(const PriceLadder& ladder) {
  return MarkdownAllocation::Uniform(ladder.size());
}

PriceDistribution naive_randomized(const PriceLadder& ladder) {
  return PriceDistribution(std::vector<double>(
      ladder.size(), 1.0 / static_cast<double>(ladder.size())));
}

PriceDistribution robust_stream(const PriceLadder& ladder) {
  auto t = robust_finite(ladder);
  return PriceDistribution({t.fractions().begin(), t.fractions().end()});
}

double stream_competitive_ratio(const PriceDistribution& dist,
                                const PriceLadder& ladder) {
  check_aligned(dist.size(), ladder);
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    worst = std::min(worst, tail_ratio(dist.weights(), ladder, i));
  }
  return worst;
}

double random_round_revenue(const PriceDistribution& dist,
                            const UdpmInstance& inst, std::size_t rounds) {
  if (rounds == 0) throw std::invalid_argument("rounds must be positive");
  if (dist.size() != inst.size()) {
    throw std::invalid_argument("distribution and instance differ in length");
  }
  const double q =
      -std::expm1(-inst.lambda() / static_cast<double>(rounds));
  const auto& ladder = inst.ladder();
  // Per round a type-l survivor meets an acceptable price w.p. a_l and pays
  // b_l / a_l on average, so the geometric sum over rounds collapses.
  double a = 0.0;
  double b = 0.0;
  double rev = 0.0;
  for (std::size_t l = inst.size(); l-- > 0;) {
    a += dist[l];
    b += dist[l] * ladder[l];
    if (inst.count(l) == 0.0 || a <= 0.0) continue;
    const double miss = 1.0 - a * q;
    rev += inst.count(l) * b * (1.0 - std::pow(miss, static_cast<double>(rounds))) / a;
  }
  return rev;
}

ContinuousRobustPolicy::ContinuousRobustPolicy(double p_min, double p_max)
    : p_min_(p_min), p_max_(p_max) {
  if (!(p_min > 0.0) || !std::isfinite(p_max) || !(p_min <= p_max)) {
    throw std::invalid_argument("need 0 < p_min <= p_max");
  }
  log_ratio_ = std::log(p_max / p_min);
}

double ContinuousRobustPolicy::floor_onset() const {
  return 1.0 - 1.0 / (1.0 + log_ratio_);
}

double ContinuousRobustPolicy::cr_guarantee() const {
  return 1.0 / (1.0 + log_ratio_);
}

double ContinuousRobustPolicy::price_at(double t) const {
  if (t > floor_onset()) return p_min_;
  return std::max(p_min_, p_max_ * std::exp(-t * (1.0 + log_ratio_)));
}

PriceSchedule ContinuousRobustPolicy::discretize(std::size_t steps) const {
  const double onset = floor_onset();
  if (onset <= 0.0) return PriceSchedule::Constant(p_max_);
  if (steps < 2) throw std::invalid_argument("need at least two steps");
  const std::size_t decay_steps = steps - 1;
  std::vector<double> bp;
  std::vector<double> pr;
  for (std::size_t i = 0; i < decay_steps; ++i) {
    const double a = onset * static_cast<double>(i) /
                     static_cast<double>(decay_steps);
    bp.push_back(a);
    pr.push_back(price_at(a));
  }
  if (onset < 1.0) {
    bp.push_back(onset);
    pr.push_back(p_min_);
  }
  return PriceSchedule(std::move(bp), std::move(pr));
}

ContinuousRobustPolicy robust_continuous(double p_min, double p_max) {
  return ContinuousRobustPolicy(p_min, p_max);
}

PriceLadder epsilon_geometric_grid(double p_min, double p_max, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (!(p_min > 0.0) || !(p_min < p_max)) {
    throw std::invalid_argument("need 0 < p_min < p_max");
  }
  const auto top = static_cast<std::size_t>(
      std::ceil(std::log(p_max / p_min) / std::log1p(eps) - 1e-12));
  std::vector<double> p(top + 1);
  for (std::size_t i = 0; i <= top; ++i) {
    p[i] = p_max * std::pow(1.0 + eps, -static_cast<double>(i));
  }
  return PriceLadder(std::move(p));
}

UdpmInstance DiracAdversary::instance() const {
  std::vector<double> counts(ladder.size(), 0.0);
  counts.at(atom) = n;
  return UdpmInstance(lambda, ladder, std::move(counts));
}

double DiracAdversary::opt() const {
  return ladder[atom] * -std::expm1(-lambda) * n;
}

double worst_case_ratio(const NonAdaptivePolicy& policy,
                        const PriceLadder& ladder, double lambda, double n) {
  check_aligned(policy_size(policy), ladder);
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    DiracAdversary adv{ladder, i, lambda, n};
    worst = std::min(worst, policy_revenue(policy, adv.instance()) / adv.opt());
  }
  return worst;
}

PriceLadder adversarial_ladder(std::size_t k, double eps) {
  if (k == 0) throw std::invalid_argument("k must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (k == 1) return PriceLadder({1.0});
  const double kd = static_cast<double>(k);
  const double target = 1.0 / kd + eps / 2.0;
  // For target >= 1 every ratio is at most the bound anyway; any geometric
  // ladder will do.
  const double a = target < 1.0 ? (kd - 1.0) / (kd - 1.0 / target) : 2.0;
  return PriceLadder::Geometric(k, 1.0 / a);
}

AdversarialCertificate adversarial_instance(const NonAdaptivePolicy& policy,
                                            std::size_t k, double eps) {
  if (policy_size(policy) != k) {
    throw std::invalid_argument("policy length must equal k");
  }
  PriceLadder ladder = adversarial_ladder(k, eps);
  const MarkdownAllocation t = mean_allocation(policy);
  std::size_t atom = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    const double r = tail_ratio(t.fractions(), ladder, i);
    if (r < best) {
      best = r;
      atom = i;
    }
  }
  DiracAdversary adv{ladder, atom, eps / (2.0 * static_cast<double>(k)), 1.0};
  UdpmInstance inst = adv.instance();
  const double ratio = policy_revenue(policy, inst) / adv.opt();
  return {std::move(inst), atom, ratio};
}

}  // namespace poolprice
