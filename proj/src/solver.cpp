#include "poolprice/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "poolprice/revenue.hpp"
#include "poolprice/rng.hpp"

namespace poolprice {

namespace {

std::vector<double> project(std::span<const double> v) {
  const std::size_t k = v.size();
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    cumsum += u[j];
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> x(k);
  for (std::size_t j = 0; j < k; ++j) x[j] = std::max(v[j] - theta, 0.0);
  return x;
}

double norm2(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += (a[i] - b[i]) * (a[i] - b[i]);
  }
  return std::sqrt(acc);
}

struct AscentRun {
  std::vector<double> t;
  double value;
  std::size_t iterations;
  bool converged;
};

// Gradients are divided by lambda * n * p_1, the largest possible gradient
// entry, so the stationarity test and step sizes are scale free.
AscentRun ascend(const UdpmInstance& inst, std::vector<double> t,
                 const GradientOptions& opt, std::vector<double>* trace) {
  const std::size_t k = t.size();
  const double scale =
      inst.lambda() * inst.total() * inst.ladder().highest();
  double f = expected_revenue(t, inst);
  if (trace) trace->push_back(f);
  double step = 1.0;
  std::vector<double> g(k), trial(k), cand;
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    auto raw = revenue_gradient(t, inst);
    for (std::size_t j = 0; j < k; ++j) g[j] = raw[j] / scale;

    for (std::size_t j = 0; j < k; ++j) trial[j] = t[j] + g[j];
    const double stationarity = norm2(project(trial), t);
    if (stationarity < opt.tol) return {t, f, it, true};

    bool accepted = false;
    bool stationary = false;
    while (step > 1e-18) {
      for (std::size_t j = 0; j < k; ++j) trial[j] = t[j] + step * g[j];
      cand = project(trial);
      double gain = 0.0;
      for (std::size_t j = 0; j < k; ++j) gain += g[j] * (cand[j] - t[j]);
      if (gain <= 0.0) {
        stationary = true;
        break;
      }
      const double fc = expected_revenue(cand, inst);
      if (fc >= f + 1e-4 * scale * gain) {
        t = cand;
        f = fc;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    // A failed line search this close to stationarity is round-off in the
    // objective, not a real stall.
    if (!accepted) return {t, f, it, stationary || stationarity < 1e-6};
    if (trace) trace->push_back(f);
    step = std::min(step * 2.0, 1e6);
  }
  return {t, f, opt.max_iters, false};
}

}  // namespace

MarkdownAllocation project_simplex(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("cannot project an empty vector");
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("vector must be finite");
  }
  return MarkdownAllocation(project(v));
}

SolverResult solve_gradient(const UdpmInstance& inst,
                            const GradientOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const std::size_t k = inst.size();
  RandomStream rng(options.seed);

  AscentRun best = ascend(inst, std::vector<double>(k, 1.0 / k), options,
                          options.trace);
  std::size_t total_iters = best.iterations;
  for (std::size_t r = 0; r < options.restarts && k > 1; ++r) {
    std::vector<double> start(k);
    double sum = 0.0;
    for (auto& x : start) {
      x = rng.exponential(1.0);
      sum += x;
    }
    for (auto& x : start) x /= sum;
    AscentRun run = ascend(inst, project(start), options, nullptr);
    total_iters += run.iterations;
    if (run.value > best.value) best = std::move(run);
  }

  MarkdownAllocation alloc = project_simplex(best.t);
  SolverResult result{alloc, expected_revenue(alloc, inst),
                      SolverMethod::kGradient, total_iters,
                      best.converged, 0.0};
  result.model_value = result.value;
  return result;
}

DpValueTable::DpValueTable(std::size_t prices, std::size_t mass_points,
                           std::size_t time_points, double mass_max)
    : prices_(prices),
      mass_points_(mass_points),
      time_points_(time_points),
      mass_max_(mass_max),
      mass_step_(mass_max / static_cast<double>(mass_points - 1)),
      values_(prices * mass_points * time_points, 0.0) {}

double DpValueTable::mass(std::size_t i) const {
  return mass_step_ * static_cast<double>(i);
}

double DpValueTable::time(std::size_t i) const {
  return static_cast<double>(i) / static_cast<double>(time_points_ - 1);
}

double DpValueTable::interpolate(std::size_t j, double m,
                                 std::size_t time_index) const {
  if (m <= 0.0) return at(j, 0, time_index);
  if (m >= mass_max_) return at(j, mass_points_ - 1, time_index);
  const double pos = m / mass_step_;
  auto lo = static_cast<std::size_t>(pos);
  if (lo >= mass_points_ - 1) lo = mass_points_ - 2;
  const double frac = pos - static_cast<double>(lo);
  const double a = at(j, lo, time_index);
  const double b = at(j, lo + 1, time_index);
  return a + frac * (b - a);
}

namespace {

struct DpGrid {
  std::size_t intervals;       // number of time steps covering [0, 1]
  std::vector<double> decay;   // exp(-lambda * a / intervals)
};

DpGrid make_grid(const UdpmInstance& inst, const DpOptions& opt) {
  if (!(opt.eps_time > 0.0 && opt.eps_time <= 0.5)) {
    throw std::invalid_argument("eps_time must lie in (0, 0.5]");
  }
  if (opt.mass_grid_size < 2) {
    throw std::invalid_argument("mass_grid_size must be at least 2");
  }
  const double steps = 1.0 / opt.eps_time;
  const auto intervals = static_cast<std::size_t>(std::llround(steps));
  if (std::abs(static_cast<double>(intervals) * opt.eps_time - 1.0) > 1e-9) {
    throw std::invalid_argument(
        "eps_time does not tile the horizon; no feasible allocation on this "
        "grid");
  }
  DpGrid grid{intervals, std::vector<double>(intervals + 1)};
  for (std::size_t a = 0; a <= intervals; ++a) {
    grid.decay[a] = std::exp(-inst.lambda() * static_cast<double>(a) /
                             static_cast<double>(intervals));
  }
  return grid;
}

// Value of staying a time steps at price j with `active` buyers, then
// continuing optimally from j + 1 with `rest` time steps left.
inline double stage_value(const UdpmInstance& inst, const DpValueTable& table,
                          const DpGrid& grid, std::size_t j, double active,
                          std::size_t a, std::size_t rest) {
  const std::size_t k = inst.size();
  const double now = inst.ladder()[j] * active * (1.0 - grid.decay[a]);
  const double carried = active * grid.decay[a];
  if (j + 2 == k) {
    // Closed form of the base case avoids interpolation error on the last
    // stage.
    return now + inst.ladder()[k - 1] * (carried + inst.count(k - 1)) *
                     (1.0 - grid.decay[rest]);
  }
  return now + table.interpolate(j + 1, carried, rest);
}

}  // namespace

DpValueTable build_dp_table(const UdpmInstance& inst, const DpOptions& opt) {
  const DpGrid grid = make_grid(inst, opt);
  const std::size_t k = inst.size();
  const std::size_t tp = grid.intervals + 1;
  DpValueTable table(k, opt.mass_grid_size, tp, inst.total());

  const double p_last = inst.ladder()[k - 1];
  for (std::size_t mi = 0; mi < table.mass_points(); ++mi) {
    const double active = table.mass(mi) + inst.count(k - 1);
    for (std::size_t ti = 0; ti < tp; ++ti) {
      table.at(k - 1, mi, ti) = p_last * active * (1.0 - grid.decay[ti]);
    }
  }
  for (std::size_t j = k - 1; j-- > 0;) {
    for (std::size_t mi = 0; mi < table.mass_points(); ++mi) {
      const double active = table.mass(mi) + inst.count(j);
      for (std::size_t ti = 0; ti < tp; ++ti) {
        double best = -1.0;
        for (std::size_t a = 0; a <= ti; ++a) {
          best = std::max(best,
                          stage_value(inst, table, grid, j, active, a, ti - a));
        }
        table.at(j, mi, ti) = best;
      }
    }
  }
  return table;
}

SolverResult solve_dp(const UdpmInstance& inst, const DpOptions& opt) {
  const DpGrid grid = make_grid(inst, opt);
  const DpValueTable table = build_dp_table(inst, opt);
  const std::size_t k = inst.size();

  std::vector<double> dwell(k, 0.0);
  std::size_t remaining = grid.intervals;
  double mass = 0.0;
  for (std::size_t j = 0; j + 1 < k; ++j) {
    const double active = mass + inst.count(j);
    std::size_t best_a = 0;
    double best = -1.0;
    for (std::size_t a = 0; a <= remaining; ++a) {
      const double v =
          stage_value(inst, table, grid, j, active, a, remaining - a);
      if (v > best) {
        best = v;
        best_a = a;
      }
    }
    dwell[j] = static_cast<double>(best_a) / static_cast<double>(grid.intervals);
    mass = active * grid.decay[best_a];
    remaining -= best_a;
  }
  dwell[k - 1] =
      static_cast<double>(remaining) / static_cast<double>(grid.intervals);

  MarkdownAllocation alloc = project_simplex(dwell);
  SolverResult result{alloc, expected_revenue(alloc, inst), SolverMethod::kDp,
                      grid.intervals + 1, true,
                      table.interpolate(0, 0.0, grid.intervals)};
  return result;
}

}  // namespace poolprice
