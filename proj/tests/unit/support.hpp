#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "poolprice/core.hpp"

namespace testing_support {

// Random strictly decreasing ladder in (0.05, 1] with p_1 = 1.
inline poolprice::PriceLadder random_ladder(std::mt19937_64& gen,
                                            std::size_t k) {
  std::uniform_real_distribution<double> u(0.05, 0.999);
  std::vector<double> p{1.0};
  while (p.size() < k) {
    const double x = u(gen);
    if (std::find(p.begin(), p.end(), x) == p.end()) p.push_back(x);
  }
  std::sort(p.begin(), p.end(), std::greater<>());
  return poolprice::PriceLadder(p);
}

inline poolprice::UdpmInstance random_instance(std::mt19937_64& gen,
                                               std::size_t k, double lambda,
                                               bool integral = false,
                                               double max_count = 20.0) {
  std::uniform_real_distribution<double> u(0.0, max_count);
  std::vector<double> n(k);
  double total = 0.0;
  do {
    total = 0.0;
    for (auto& c : n) {
      c = integral ? std::floor(u(gen)) : u(gen);
      total += c;
    }
  } while (total <= 0.0);
  return poolprice::UdpmInstance(lambda, random_ladder(gen, k), n);
}

inline poolprice::MarkdownAllocation random_allocation(std::mt19937_64& gen,
                                                       std::size_t k) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> t(k);
  double s = 0.0;
  for (auto& x : t) {
    x = e(gen);
    s += x;
  }
  for (auto& x : t) x /= s;
  // Renormalize the rounding residue onto the largest entry.
  double sum = 0.0;
  for (double x : t) sum += x;
  *std::max_element(t.begin(), t.end()) += 1.0 - sum;
  return poolprice::MarkdownAllocation(t);
}

// Expected UnitDemand revenue of an arbitrary piecewise-constant schedule,
// written directly from the Poisson model: a customer with valuation v
// buys in the first interaction at which price <= v.
inline double schedule_revenue(const poolprice::PriceSchedule& s,
                               const poolprice::UdpmInstance& inst) {
  double total = 0.0;
  for (std::size_t type = 0; type < inst.size(); ++type) {
    const double v = inst.ladder()[type];
    double survive = 1.0;
    double rev = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.price(i) > v) continue;
      const double len = s.end(i) - s.start(i);
      const double buy = 1.0 - std::exp(-inst.lambda() * len);
      rev += survive * buy * s.price(i);
      survive *= 1.0 - buy;
    }
    total += inst.count(type) * rev;
  }
  return total;
}

}  // namespace testing_support
