#include "poolprice/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "poolprice/parallel.hpp"

namespace poolprice {

double q(double s, double lambda) { return -std::expm1(-lambda * s); }

ExplorationPlan::ExplorationPlan(std::vector<double> s) : s_(std::move(s)) {
  if (s_.empty()) throw std::invalid_argument("exploration plan is empty");
  total_ = 0.0;
  for (double x : s_) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument("exploration lengths must be positive");
    }
    total_ += x;
  }
  if (!(total_ < 1.0)) {
    throw std::invalid_argument("exploration must end before the horizon");
  }
}

EstimateVector debiased_estimates(const PhaseObservations& obs,
                                  const ExplorationPlan& plan, double lambda) {
  if (obs.sales.size() != plan.size()) {
    throw std::invalid_argument("observations and plan differ in length");
  }
  EstimateVector est;
  est.n_hat.resize(plan.size());
  // carried = sum_{i<j} (n_hat_i - D_i), the estimated survivors from
  // higher types still in the market at phase j.
  double carried = 0.0;
  for (std::size_t j = 0; j < plan.size(); ++j) {
    const double qj = q(plan[j], lambda);
    if (!(qj > 0.0)) {
      throw std::invalid_argument("zero purchase probability in a phase");
    }
    const auto d = static_cast<double>(obs.sales[j]);
    est.n_hat[j] = d / qj - carried;
    carried += est.n_hat[j] - d;
  }
  return est;
}

ExplorationPlan default_exploration(double lambda, std::size_t k, double n,
                                    double c) {
  if (!(c > 0.0) || !(lambda > 0.0) || !(n > 0.0) || k == 0) {
    throw std::invalid_argument("default_exploration needs positive inputs");
  }
  const double kd = static_cast<double>(k);
  const double s = std::min(c / (lambda * std::cbrt(kd * n)), 0.5 / kd);
  return ExplorationPlan(std::vector<double>(k, s));
}

LteController::LteController(double lambda, PriceLadder ladder,
                             ExplorationPlan plan, GradientOptions solver)
    : lambda_(lambda),
      ladder_(std::move(ladder)),
      plan_(std::move(plan)),
      solver_(solver) {
  if (plan_.size() != ladder_.size()) {
    throw std::invalid_argument("plan and ladder differ in length");
  }
}

void LteController::plan_earning(double now) {
  estimates_ = debiased_estimates({sales_}, plan_, lambda_);
  std::vector<double> clipped(estimates_->n_hat.size());
  bool any = false;
  for (std::size_t j = 0; j < clipped.size(); ++j) {
    clipped[j] = std::max(0.0, estimates_->n_hat[j]);
    any = any || clipped[j] > 0.0;
  }
  if (any) {
    UdpmInstance estimated(lambda_, ladder_, std::move(clipped));
    earning_ = solve_gradient(estimated, solver_).allocation;
  } else {
    earning_ = robust_finite(ladder_);
  }
  const double left = 1.0 - plan_.total();
  std::size_t last = 0;
  for (std::size_t j = 0; j < ladder_.size(); ++j) {
    if ((*earning_)[j] > 0.0) last = j;
  }
  double t = now;
  for (std::size_t j = 0; j <= last; ++j) {
    double d = left * (*earning_)[j];
    if (j == last) d = 1.0 - t;
    if (!(d > 0.0)) continue;
    earning_phases_.push_back({ladder_[j], d});
    t += d;
  }
}

std::optional<Phase> LteController::next_phase(double now,
                                               std::size_t last_phase_sales,
                                               double) {
  const std::size_t k = ladder_.size();
  if (step_ > 0 && step_ <= k) sales_.push_back(last_phase_sales);
  if (step_ < k) {
    const Phase p{ladder_[step_], plan_[step_]};
    ++step_;
    return p;
  }
  if (step_ == k) {
    plan_earning(now);
    ++step_;
  }
  if (earning_next_ < earning_phases_.size()) {
    return earning_phases_[earning_next_++];
  }
  return std::nullopt;
}

ControllerFactory lte_factory(double lambda, const PriceLadder& ladder,
                              const ExplorationPlan& plan) {
  return [=](std::uint64_t) {
    return std::make_unique<LteController>(lambda, ladder, plan);
  };
}

namespace {

class ExploreOnly : public Controller {
 public:
  ExploreOnly(const PriceLadder& ladder, const ExplorationPlan& plan)
      : ladder_(ladder), plan_(plan) {}

  std::optional<Phase> next_phase(double, std::size_t, double) override {
    if (step_ >= plan_.size()) return std::nullopt;
    const Phase p{ladder_[step_], plan_[step_]};
    ++step_;
    return p;
  }

 private:
  const PriceLadder& ladder_;
  const ExplorationPlan& plan_;
  std::size_t step_ = 0;
};

}  // namespace

PhaseObservations simulate_learning_phase(const UdpmInstance& inst,
                                          const ExplorationPlan& plan,
                                          std::uint64_t seed) {
  if (plan.size() != inst.size()) {
    throw std::invalid_argument("plan and instance differ in length");
  }
  ExploreOnly controller(inst.ladder(), plan);
  const auto out =
      simulate_pool(inst, DiscountMode::kUnitDemand, controller, seed);
  PhaseObservations obs;
  for (const auto& ph : out.phases) obs.sales.push_back(ph.sales);
  return obs;
}

double bandit_normalizer(const PriceLadder& ladder, double n, double lambda,
                         std::size_t rounds) {
  return ladder.highest() *
         std::max(1.0, n * q(1.0 / static_cast<double>(rounds), lambda));
}

std::size_t default_explore_per_arm(std::size_t k, std::size_t rounds) {
  const double m = std::floor(std::pow(
      static_cast<double>(rounds) / static_cast<double>(k), 2.0 / 3.0));
  return std::max<std::size_t>(1, static_cast<std::size_t>(m));
}

double default_exp3_rate(std::size_t k, std::size_t rounds) {
  const double kd = static_cast<double>(k);
  return std::sqrt(2.0 * std::log(kd) / (static_cast<double>(rounds) * kd));
}

RoundController::RoundController(PriceLadder ladder, BanditParams params)
    : ladder_(std::move(ladder)), params_(params) {
  if (params_.rounds == 0) throw std::invalid_argument("rounds must be positive");
  if (!(params_.normalizer > 0.0)) {
    throw std::invalid_argument("normalizer must be positive");
  }
}

std::optional<Phase> RoundController::next_phase(double, std::size_t,
                                                 double last_phase_revenue) {
  if (!history_.empty()) {
    const double reward =
        std::clamp(last_phase_revenue / params_.normalizer, 0.0, 1.0);
    observe(history_.back(), reward);
  }
  if (history_.size() >= params_.rounds) return std::nullopt;
  const std::size_t arm = choose(history_.size());
  history_.push_back(arm);
  return Phase{ladder_[arm], 1.0 / static_cast<double>(params_.rounds)};
}

EtcController::EtcController(PriceLadder ladder, BanditParams params)
    : RoundController(std::move(ladder), params),
      per_arm_(params.explore_per_arm > 0
                   ? params.explore_per_arm
                   : default_explore_per_arm(this->ladder().size(),
                                             params.rounds)),
      sum_(this->ladder().size(), 0.0),
      pulls_(this->ladder().size(), 0) {
  if (params.rounds < this->ladder().size()) {
    throw std::invalid_argument("ETC needs at least one round per price");
  }
}

std::size_t EtcController::choose(std::size_t round) {
  const std::size_t k = ladder().size();
  if (round < per_arm_ * k) return round % k;
  if (!committed_) {
    std::size_t best = 0;
    double best_mean = -1.0;
    for (std::size_t a = 0; a < k; ++a) {
      const double mean = sum_[a] / static_cast<double>(pulls_[a]);
      if (mean > best_mean) {
        best_mean = mean;
        best = a;
      }
    }
    committed_ = best;
  }
  return *committed_;
}

void EtcController::observe(std::size_t arm, double reward) {
  sum_[arm] += reward;
  pulls_[arm] += 1;
}

UcbController::UcbController(PriceLadder ladder, BanditParams params)
    : RoundController(std::move(ladder), params),
      sum_(this->ladder().size(), 0.0),
      pulls_(this->ladder().size(), 0) {
  if (params.rounds < this->ladder().size()) {
    throw std::invalid_argument("UCB needs at least one round per price");
  }
}

std::size_t UcbController::choose(std::size_t round) {
  const std::size_t k = ladder().size();
  if (round < k) return round;
  const double log_t = std::log(static_cast<double>(round));
  std::size_t best = 0;
  double best_index = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < k; ++a) {
    const auto m = static_cast<double>(pulls_[a]);
    const double index = sum_[a] / m + std::sqrt(2.0 * log_t / m);
    if (index > best_index) {
      best_index = index;
      best = a;
    }
  }
  return best;
}

void UcbController::observe(std::size_t arm, double reward) {
  sum_[arm] += reward;
  pulls_[arm] += 1;
}

Exp3Controller::Exp3Controller(PriceLadder ladder, BanditParams params,
                               std::uint64_t seed)
    : RoundController(std::move(ladder), params),
      rate_(params.learning_rate > 0.0
                ? params.learning_rate
                : default_exp3_rate(this->ladder().size(), params.rounds)),
      score_(this->ladder().size(), 0.0),
      rng_(seed) {}

std::vector<double> Exp3Controller::probabilities() const {
  const double top = *std::max_element(score_.begin(), score_.end());
  std::vector<double> p(score_.size());
  double sum = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    p[a] = std::exp(rate_ * (score_[a] - top));
    sum += p[a];
  }
  for (auto& x : p) x /= sum;
  return p;
}

std::size_t Exp3Controller::choose(std::size_t) {
  last_probs_ = probabilities();
  const double u = rng_.uniform();
  double acc = 0.0;
  for (std::size_t a = 0; a + 1 < last_probs_.size(); ++a) {
    acc += last_probs_[a];
    if (u < acc) return a;
  }
  return last_probs_.size() - 1;
}

void Exp3Controller::observe(std::size_t arm, double reward) {
  // Loss-based importance weighting keeps every estimate bounded above.
  for (std::size_t a = 0; a < score_.size(); ++a) {
    score_[a] += 1.0;
  }
  score_[arm] -= (1.0 - reward) / last_probs_[arm];
}

RandomRoundController::RandomRoundController(PriceLadder ladder,
                                             PriceDistribution dist,
                                             std::size_t rounds,
                                             std::uint64_t seed)
    : RoundController(std::move(ladder), BanditParams{rounds, 1.0, 0, 0.0}),
      dist_(std::move(dist)),
      rng_(seed) {
  if (dist_.size() != this->ladder().size()) {
    throw std::invalid_argument("distribution and ladder differ in length");
  }
}

std::size_t RandomRoundController::choose(std::size_t) {
  const double u = rng_.uniform();
  double acc = 0.0;
  for (std::size_t a = 0; a + 1 < dist_.size(); ++a) {
    acc += dist_[a];
    if (u < acc) return a;
  }
  return dist_.size() - 1;
}

ControllerFactory etc_factory(const PriceLadder& ladder, BanditParams params) {
  return [=](std::uint64_t) {
    return std::make_unique<EtcController>(ladder, params);
  };
}

ControllerFactory ucb_factory(const PriceLadder& ladder, BanditParams params) {
  return [=](std::uint64_t) {
    return std::make_unique<UcbController>(ladder, params);
  };
}

ControllerFactory exp3_factory(const PriceLadder& ladder, BanditParams params) {
  return [=](std::uint64_t seed) {
    return std::make_unique<Exp3Controller>(ladder, params, seed);
  };
}

ControllerFactory random_round_factory(const PriceLadder& ladder,
                                       const PriceDistribution& dist,
                                       std::size_t rounds) {
  return [=](std::uint64_t seed) {
    return std::make_unique<RandomRoundController>(ladder, dist, rounds, seed);
  };
}

double regret(const UdpmInstance& inst, double policy_mean_revenue) {
  return solve_gradient(inst).value - policy_mean_revenue;
}

double bernstein_tail_bound(double n, double q_value, double tau) {
  const double dev = q_value * tau;
  const double var = n * q_value * (1.0 - q_value);
  return std::min(1.0, 2.0 * std::exp(-0.5 * dev * dev / (var + dev / 3.0)));
}

DiagnosticsReport error_process_diagnostics(const UdpmInstance& inst,
                                            const ExplorationPlan& plan,
                                            std::size_t reps,
                                            std::uint64_t seed,
                                            const DiagnosticsOptions& options) {
  const std::size_t k = inst.size();
  if (plan.size() != k) {
    throw std::invalid_argument("plan and instance differ in length");
  }
  if (reps == 0) throw std::invalid_argument("reps must be positive");
  for (std::size_t j = 0; j < k; ++j) {
    if (!(q(plan[j], inst.lambda()) > 0.0)) {
      throw std::invalid_argument("zero purchase probability in a phase");
    }
  }

  // deltas[r * k + j] = n_hat_j - n_j.
  std::vector<double> deltas(reps * k);
  ReplicationPlan rp{reps, seed, options.threads};
  parallel_for(reps, options.threads, [&](std::size_t r) {
    const auto obs = simulate_learning_phase(inst, plan, rp.replication_seed(r));
    const auto est = debiased_estimates(obs, plan, inst.lambda());
    for (std::size_t j = 0; j < k; ++j) {
      deltas[r * k + j] = est.n_hat[j] - inst.count(j);
    }
  });

  DiagnosticsReport report;
  report.reps = reps;
  std::vector<double> column(reps), prefix(reps);
  std::vector<double> prefix_sums(reps * k);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t r = 0; r < reps; ++r) {
      column[r] = deltas[r * k + j];
      prefix[r] = (j == 0 ? 0.0 : prefix_sums[r * k + j - 1]) + column[r];
      prefix_sums[r * k + j] = prefix[r];
    }
    report.bias.push_back(summarize(column));
    report.running_sum.push_back(summarize(prefix));
  }
  const double p1 = inst.ladder().highest();
  double inv_q_sum = 0.0;
  std::vector<double> pointwise_var(k);  // sum_{j<=m} sum_{i<=j} n_i / q(s_j)
  double head = 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double qj = q(plan[j], inst.lambda());
    inv_q_sum += 1.0 / qj;
    head += inst.count(j);
    acc += head / qj;
    pointwise_var[j] = acc;
  }
  const double sigma_uniform =
      std::sqrt(4.0 * p1 * p1 * inst.total() * inv_q_sum);
  const auto reps_d = static_cast<double>(reps);
  auto slack_for = [&](double bound) {
    const double p = std::clamp(bound, 0.0, 1.0);
    return 3.0 * std::sqrt(p * (1.0 - p) / reps_d);
  };

  for (double mult : options.tau_multiples) {
    const double tau = mult * sigma_uniform;
    std::size_t uniform_hits = 0;
    std::vector<std::size_t> hits(k, 0);
    for (std::size_t r = 0; r < reps; ++r) {
      bool any = false;
      for (std::size_t m = 0; m < k; ++m) {
        if (std::abs(p1 * prefix_sums[r * k + m]) > tau) {
          ++hits[m];
          any = true;
        }
      }
      if (any) ++uniform_hits;
    }
    for (std::size_t m = 0; m < k; ++m) {
      const double bound =
          2.0 * std::exp(-tau * tau / (4.0 * p1 * p1 * pointwise_var[m]));
      report.pointwise.push_back({m + 1, tau,
                                  static_cast<double>(hits[m]) / reps_d, bound,
                                  slack_for(bound)});
    }
    const double ubound = 2.0 * static_cast<double>(k + 1) *
                          std::exp(-tau * tau / (sigma_uniform * sigma_uniform));
    report.uniform.push_back({TailCheck::kUniform, tau,
                              static_cast<double>(uniform_hits) / reps_d,
                              ubound, slack_for(ubound)});
  }
  return report;
}

}  // namespace poolprice
