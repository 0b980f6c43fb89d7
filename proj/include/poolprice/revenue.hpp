#pragma once

#include <cstddef>
#include <vector>

#include "poolprice/core.hpp"

namespace poolprice {

// Dense row-major square matrix, just enough for Hessians.
class SquareMatrix {
 public:
  explicit SquareMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}
  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * n_ + j];
  }

 private:
  std::size_t n_;
  std::vector<double> data_;
};

// Expected revenue from a single type-`type` customer (0-based) under the
// markdown allocation t:
//   r_l(t) = sum_{j >= l} p_j exp(-lambda sum_{i=l}^{j-1} t_i)(1 - exp(-lambda t_j)).
double per_type_revenue(const MarkdownAllocation& t, const UdpmInstance& inst,
                        std::size_t type);

// (r_1(t), ..., r_k(t)). Non-increasing in the type index.
std::vector<double> per_type_revenues(const MarkdownAllocation& t,
                                      const UdpmInstance& inst);

// Rev(t, I) = sum_l n_l r_l(t).
double expected_revenue(const MarkdownAllocation& t, const UdpmInstance& inst);

// Same formula evaluated at an arbitrary point of R^k_{>=0}; the solvers
// probe points that are not normalized allocations.
double expected_revenue(std::span<const double> t, const UdpmInstance& inst);

// d Rev / d t_j = sum_{l <= j} n_l sum_{s >= j} lambda (p_s - p_{s+1})
//                 exp(-lambda sum_{u=l}^{s} t_u), with p_{k+1} = 0.
std::vector<double> revenue_gradient(std::span<const double> t,
                                     const UdpmInstance& inst);
std::vector<double> revenue_gradient(const MarkdownAllocation& t,
                                     const UdpmInstance& inst);

// Symmetric and negative semidefinite. Entry (i, j) equals
//   -lambda^2 sum_{l <= min(i,j)} n_l sum_{s >= max(i,j)} (p_s - p_{s+1})
//   exp(-lambda sum_{u=l}^{s} t_u).
SquareMatrix revenue_hessian(std::span<const double> t,
                             const UdpmInstance& inst);
SquareMatrix revenue_hessian(const MarkdownAllocation& t,
                             const UdpmInstance& inst);

// First-degree price discrimination bound: sum_j n_j p_j (1 - e^{-lambda}).
double upper_bound(const UdpmInstance& inst);

// Linear surrogates Rev'(t, I) = sum_l n_l sum_{j>=l} lambda p_j t_j and
// UB'(I) = sum_j n_j p_j lambda.
double linearized_revenue(const MarkdownAllocation& t,
                          const UdpmInstance& inst);
double linearized_upper_bound(const UdpmInstance& inst);

// Revenue gain B - A from swapping an adjacent (p_low, p_high) pair of
// eps-long phases into markdown order, where d_high (d_low) customers with
// valuation >= p_high (>= p_low) remain: d_high (p_high - p_low)(1-e^{-lambda eps})^2.
double swap_delta(double d_high, double d_low, double p_high, double p_low,
                  double lambda, double eps);

}  // namespace poolprice
