#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "poolprice/core.hpp"
#include "poolprice/rng.hpp"
#include "poolprice/robust.hpp"
#include "poolprice/sim.hpp"
#include "poolprice/solver.hpp"

namespace poolprice {

// 1 - exp(-lambda s): chance that one customer interacts during s.
double q(double s, double lambda);

class ExplorationPlan {
 public:
  // Each s_j > 0 and the total strictly below 1.
  explicit ExplorationPlan(std::vector<double> s);

  std::size_t size() const { return s_.size(); }
  double operator[](std::size_t j) const { return s_[j]; }
  std::span<const double> lengths() const { return s_; }
  double total() const { return total_; }

 private:
  std::vector<double> s_;
  double total_;
};

struct PhaseObservations {
  std::vector<std::size_t> sales;
};

struct EstimateVector {
  // May be negative or exceed the population.
  std::vector<double> n_hat;
};

// n_hat_j = D_j / q(s_j) - sum_{i<j} (n_hat_i - D_i). No clipping.
// Throws std::invalid_argument on a length mismatch or q(s_j) == 0.
EstimateVector debiased_estimates(const PhaseObservations& obs,
                                  const ExplorationPlan& plan, double lambda);

// s_j = min(c / (lambda (k n)^{1/3}), 1/(2k)) for every j.
ExplorationPlan default_exploration(double lambda, std::size_t k, double n,
                                    double c = 1.0);

// Learn-then-earn: p_j for s_j in turn, then the optimal allocation of the
// clipped estimated instance over the remaining 1 - sum s.
class LteController : public Controller {
 public:
  LteController(double lambda, PriceLadder ladder, ExplorationPlan plan,
                GradientOptions solver = lte_solver_defaults());

  std::optional<Phase> next_phase(double now, std::size_t last_phase_sales,
                                  double last_phase_revenue) override;

  // Available once the learning phase is over.
  const std::optional<EstimateVector>& estimates() const { return estimates_; }
  const std::optional<MarkdownAllocation>& earning_allocation() const {
    return earning_;
  }

  // The objective is concave, so one start is enough.
  static GradientOptions lte_solver_defaults() {
    GradientOptions o;
    o.restarts = 0;
    return o;
  }

 private:
  void plan_earning(double now);

  double lambda_;
  PriceLadder ladder_;
  ExplorationPlan plan_;
  GradientOptions solver_;
  std::size_t step_ = 0;
  std::vector<std::size_t> sales_;
  std::optional<EstimateVector> estimates_;
  std::optional<MarkdownAllocation> earning_;
  std::vector<Phase> earning_phases_;
  std::size_t earning_next_ = 0;
};

ControllerFactory lte_factory(double lambda, const PriceLadder& ladder,
                              const ExplorationPlan& plan);

// Runs only the exploration phases on `inst` and returns the D_j.
PhaseObservations simulate_learning_phase(const UdpmInstance& inst,
                                          const ExplorationPlan& plan,
                                          std::uint64_t seed);

struct BanditParams {
  std::size_t rounds = 64;
  // Reward = phase revenue / normalizer, clipped to [0, 1].
  double normalizer = 1.0;
  // ETC only. 0 selects max(1, floor((T/k)^{2/3})).
  std::size_t explore_per_arm = 0;
  // EXP3 only. Nonpositive selects sqrt(2 ln k / (T k)).
  double learning_rate = 0.0;
};

// p_1 * max(1, n q(1/T)).
double bandit_normalizer(const PriceLadder& ladder, double n, double lambda,
                         std::size_t rounds);

std::size_t default_explore_per_arm(std::size_t k, std::size_t rounds);
double default_exp3_rate(std::size_t k, std::size_t rounds);

// Shared round bookkeeping: T phases of length 1/T, one arm per round.
class RoundController : public Controller {
 public:
  RoundController(PriceLadder ladder, BanditParams params);

  std::optional<Phase> next_phase(double now, std::size_t last_phase_sales,
                                  double last_phase_revenue) override;

  const std::vector<std::size_t>& arms_played() const { return history_; }

 protected:
  virtual std::size_t choose(std::size_t round) = 0;
  virtual void observe(std::size_t arm, double reward) = 0;

  const PriceLadder& ladder() const { return ladder_; }
  const BanditParams& params() const { return params_; }

 private:
  PriceLadder ladder_;
  BanditParams params_;
  std::vector<std::size_t> history_;
};

class EtcController : public RoundController {
 public:
  EtcController(PriceLadder ladder, BanditParams params);

 protected:
  std::size_t choose(std::size_t round) override;
  void observe(std::size_t arm, double reward) override;

 private:
  std::size_t per_arm_;
  std::vector<double> sum_;
  std::vector<std::size_t> pulls_;
  std::optional<std::size_t> committed_;
};

class UcbController : public RoundController {
 public:
  UcbController(PriceLadder ladder, BanditParams params);

 protected:
  std::size_t choose(std::size_t round) override;
  void observe(std::size_t arm, double reward) override;

 private:
  std::vector<double> sum_;
  std::vector<std::size_t> pulls_;
};

class Exp3Controller : public RoundController {
 public:
  Exp3Controller(PriceLadder ladder, BanditParams params, std::uint64_t seed);

  // Current sampling distribution.
  std::vector<double> probabilities() const;

 protected:
  std::size_t choose(std::size_t round) override;
  void observe(std::size_t arm, double reward) override;

 private:
  double rate_;
  std::vector<double> score_;
  std::vector<double> last_probs_;
  RandomStream rng_;
};

// Non-adaptive: an independent price from `dist` each round.
class RandomRoundController : public RoundController {
 public:
  RandomRoundController(PriceLadder ladder, PriceDistribution dist,
                        std::size_t rounds, std::uint64_t seed);

 protected:
  std::size_t choose(std::size_t round) override;
  void observe(std::size_t, double) override {}

 private:
  PriceDistribution dist_;
  RandomStream rng_;
};

ControllerFactory etc_factory(const PriceLadder& ladder, BanditParams params);
ControllerFactory ucb_factory(const PriceLadder& ladder, BanditParams params);
ControllerFactory exp3_factory(const PriceLadder& ladder, BanditParams params);
ControllerFactory random_round_factory(const PriceLadder& ladder,
                                       const PriceDistribution& dist,
                                       std::size_t rounds);

// OPT_NA(inst) - mean revenue, with OPT_NA from solve_gradient.
double regret(const UdpmInstance& inst, double policy_mean_revenue);

struct TailCheck {
  // Basis index m (prefix length); kUniform for the max over all m.
  std::size_t basis = 0;
  double tau = 0.0;
  double empirical = 0.0;
  double bound = 0.0;
  // 3 sqrt(p (1 - p) / reps) with p the bound clipped to [0, 1].
  double slack = 0.0;

  bool within() const { return empirical <= bound + slack; }
  static constexpr std::size_t kUniform = static_cast<std::size_t>(-1);
};

struct DiagnosticsOptions {
  // tau grid as multiples of sqrt(4 p_1^2 n sum_j 1/q(s_j)).
  std::vector<double> tau_multiples = {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5};
  std::size_t threads = 1;
};

struct DiagnosticsReport {
  std::size_t reps = 0;
  // n_hat_j - n_j.
  std::vector<Estimate> bias;
  // sum_{i<=j} (n_hat_i - n_i).
  std::vector<Estimate> running_sum;
  // |<p_1 phi_m, Delta>| > tau against 2 exp(-tau^2 / (4 p_1^2 sum_{j<=m}
  // sum_{i<=j} n_i / q(s_j))), m = 1..k.
  std::vector<TailCheck> pointwise;
  // max_m |<p_1 phi_m, Delta>| > tau against
  // 2 (k+1) exp(-tau^2 / (4 p_1^2 n sum_j 1/q(s_j))).
  std::vector<TailCheck> uniform;
};

DiagnosticsReport error_process_diagnostics(
    const UdpmInstance& inst, const ExplorationPlan& plan, std::size_t reps,
    std::uint64_t seed, const DiagnosticsOptions& options = {});

// Bernstein bound on P(|n_hat - n| > tau) for a single price, where
// n_hat = D / q and D ~ Binomial(n, q).
double bernstein_tail_bound(double n, double q_value, double tau);

}  // namespace poolprice
