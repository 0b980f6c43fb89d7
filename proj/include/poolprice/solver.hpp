#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "poolprice/core.hpp"

namespace poolprice {

enum class SolverMethod { kDp, kGradient };

struct SolverResult {
  MarkdownAllocation allocation;
  // expected_revenue(allocation, inst).
  double value = 0.0;
  SolverMethod method = SolverMethod::kGradient;
  // Iterations for the gradient method, time-grid size for the DP.
  std::size_t iterations = 0;
  // False when the gradient method hit max_iters before the stationarity
  // test passed. The best iterate is still returned.
  bool converged = true;
  // DP only: the table value Phi(1, 0, 1). Equals `value` for the gradient
  // method.
  double model_value = 0.0;
};

struct GradientOptions {
  double tol = 1e-8;
  std::size_t max_iters = 10'000;
  // Random restarts in addition to the uniform starting point.
  std::size_t restarts = 3;
  std::uint64_t seed = 0x5eed;
  // When set, objective values of accepted iterates of the first run are
  // appended here (used to check the ascent property).
  std::vector<double>* trace = nullptr;
};

// Projected gradient ascent on the simplex with backtracking line search.
SolverResult solve_gradient(const UdpmInstance& inst,
                            const GradientOptions& options = {});

// Euclidean projection onto {t >= 0, sum t = 1} (sort-and-threshold).
MarkdownAllocation project_simplex(std::span<const double> v);

struct DpOptions {
  double eps_time = 1e-3;
  std::size_t mass_grid_size = 200;
};

// Phi(j, m, t) on a (price index) x (survivor mass) x (remaining time) grid.
// Mass nodes are uniform over [0, n]; time nodes are multiples of eps_time.
class DpValueTable {
 public:
  DpValueTable(std::size_t prices, std::size_t mass_points,
               std::size_t time_points, double mass_max);

  std::size_t prices() const { return prices_; }
  std::size_t mass_points() const { return mass_points_; }
  std::size_t time_points() const { return time_points_; }
  double mass(std::size_t i) const;
  double time(std::size_t i) const;

  double at(std::size_t j, std::size_t mass_index, std::size_t time_index) const {
    return values_[index(j, mass_index, time_index)];
  }
  double& at(std::size_t j, std::size_t mass_index, std::size_t time_index) {
    return values_[index(j, mass_index, time_index)];
  }

  // Linear interpolation in the mass coordinate; mass is clamped to the grid.
  double interpolate(std::size_t j, double mass, std::size_t time_index) const;

 private:
  std::size_t index(std::size_t j, std::size_t m, std::size_t t) const {
    return (j * mass_points_ + m) * time_points_ + t;
  }

  std::size_t prices_;
  std::size_t mass_points_;
  std::size_t time_points_;
  double mass_max_;
  double mass_step_;
  std::vector<double> values_;
};

// Backward induction for Phi. Throws std::invalid_argument when the time
// step does not tile [0, 1] or the grids are too coarse.
DpValueTable build_dp_table(const UdpmInstance& inst,
                            const DpOptions& options = {});

// Phi(1, 0, 1) plus the dwell times recovered by forward replay.
SolverResult solve_dp(const UdpmInstance& inst, const DpOptions& options = {});

}  // namespace poolprice
