#include "poolprice/revenue.hpp"

#include <cmath>
#include <stdexcept>

namespace poolprice {

namespace {

void check_aligned(std::size_t t_size, const UdpmInstance& inst) {
  if (t_size != inst.size()) {
    throw std::invalid_argument("allocation and instance differ in length");
  }
}

double type_revenue(std::span<const double> t, const UdpmInstance& inst,
                    std::size_t type) {
  const auto& ladder = inst.ladder();
  const double lambda = inst.lambda();
  // survive = exp(-lambda * sum_{i=type}^{j-1} t_i), accumulated as we go.
  double survive = 1.0;
  double rev = 0.0;
  for (std::size_t j = type; j < t.size(); ++j) {
    rev += ladder[j] * survive * -std::expm1(-lambda * t[j]);
    survive *= std::exp(-lambda * t[j]);
  }
  return rev;
}

// tail[l][j] = sum_{s >= j} lambda (p_s - p_{s+1}) exp(-lambda sum_{u=l}^{s} t_u)
// for j >= l. Stored per type as a vector indexed by j - l.
std::vector<std::vector<double>> gradient_tails(std::span<const double> t,
                                                const UdpmInstance& inst) {
  const std::size_t k = inst.size();
  const auto& ladder = inst.ladder();
  const double lambda = inst.lambda();
  std::vector<std::vector<double>> tails(k);
  std::vector<double> decay(k);
  for (std::size_t l = 0; l < k; ++l) {
    double acc = 0.0;
    for (std::size_t s = l; s < k; ++s) {
      acc += t[s];
      decay[s] = std::exp(-lambda * acc);
    }
    auto& tail = tails[l];
    tail.assign(k - l, 0.0);
    double running = 0.0;
    for (std::size_t s = k; s-- > l;) {
      running += lambda * (ladder[s] - ladder.next(s)) * decay[s];
      tail[s - l] = running;
    }
  }
  return tails;
}

}  // namespace

double per_type_revenue(const MarkdownAllocation& t, const UdpmInstance& inst,
                        std::size_t type) {
  check_aligned(t.size(), inst);
  if (type >= inst.size()) throw std::out_of_range("type index out of range");
  return type_revenue(t.fractions(), inst, type);
}

std::vector<double> per_type_revenues(const MarkdownAllocation& t,
                                      const UdpmInstance& inst) {
  check_aligned(t.size(), inst);
  std::vector<double> r(inst.size());
  for (std::size_t l = 0; l < inst.size(); ++l) {
    r[l] = type_revenue(t.fractions(), inst, l);
  }
  return r;
}

double expected_revenue(std::span<const double> t, const UdpmInstance& inst) {
  check_aligned(t.size(), inst);
  double rev = 0.0;
  for (std::size_t l = 0; l < inst.size(); ++l) {
    if (inst.count(l) == 0.0) continue;
    rev += inst.count(l) * type_revenue(t, inst, l);
  }
  return rev;
}

double expected_revenue(const MarkdownAllocation& t, const UdpmInstance& inst) {
  return expected_revenue(t.fractions(), inst);
}

std::vector<double> revenue_gradient(std::span<const double> t,
                                     const UdpmInstance& inst) {
  check_aligned(t.size(), inst);
  const std::size_t k = inst.size();
  auto tails = gradient_tails(t, inst);
  std::vector<double> g(k, 0.0);
  for (std::size_t l = 0; l < k; ++l) {
    const double n = inst.count(l);
    if (n == 0.0) continue;
    for (std::size_t j = l; j < k; ++j) g[j] += n * tails[l][j - l];
  }
  return g;
}

std::vector<double> revenue_gradient(const MarkdownAllocation& t,
                                     const UdpmInstance& inst) {
  return revenue_gradient(t.fractions(), inst);
}

SquareMatrix revenue_hessian(std::span<const double> t,
                             const UdpmInstance& inst) {
  check_aligned(t.size(), inst);
  const std::size_t k = inst.size();
  const double lambda = inst.lambda();
  auto tails = gradient_tails(t, inst);
  SquareMatrix h(k);
  for (std::size_t l = 0; l < k; ++l) {
    const double n = inst.count(l);
    if (n == 0.0) continue;
    for (std::size_t i = l; i < k; ++i) {
      for (std::size_t j = l; j < k; ++j) {
        const std::size_t hi = i > j ? i : j;
        h(i, j) -= n * lambda * tails[l][hi - l];
      }
    }
  }
  return h;
}

SquareMatrix revenue_hessian(const MarkdownAllocation& t,
                             const UdpmInstance& inst) {
  return revenue_hessian(t.fractions(), inst);
}

double upper_bound(const UdpmInstance& inst) {
  double acc = 0.0;
  for (std::size_t j = 0; j < inst.size(); ++j) {
    acc += inst.count(j) * inst.ladder()[j];
  }
  return acc * -std::expm1(-inst.lambda());
}

double linearized_revenue(const MarkdownAllocation& t,
                          const UdpmInstance& inst) {
  check_aligned(t.size(), inst);
  const std::size_t k = inst.size();
  // suffix[l] = sum_{j >= l} p_j t_j
  double suffix = 0.0;
  double acc = 0.0;
  for (std::size_t l = k; l-- > 0;) {
    suffix += inst.ladder()[l] * t[l];
    acc += inst.count(l) * suffix;
  }
  return inst.lambda() * acc;
}

double linearized_upper_bound(const UdpmInstance& inst) {
  double acc = 0.0;
  for (std::size_t j = 0; j < inst.size(); ++j) {
    acc += inst.count(j) * inst.ladder()[j];
  }
  return inst.lambda() * acc;
}

double swap_delta(double d_high, double d_low, double p_high, double p_low,
                  double lambda, double eps) {
  if (!(p_high >= p_low) || !(d_low >= d_high) || d_high < 0.0 ||
      !(eps > 0.0) || !(lambda > 0.0)) {
    throw std::invalid_argument("swap_delta preconditions violated");
  }
  const double q = -std::expm1(-lambda * eps);
  return d_high * (p_high - p_low) * q * q;
}

}  // namespace poolprice
