#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace poolprice {

// Strictly decreasing, strictly positive price list p_1 > ... > p_k > 0.
// Index 0 is the highest price. next(j) returns the sentinel 0 past the end.
class PriceLadder {
 public:
  explicit PriceLadder(std::vector<double> prices);

  // {1 - (i-1)/k : i = 1..k}
  static PriceLadder Uniform(std::size_t k);
  // {first * ratio^i : i = 0..k-1}
  static PriceLadder Geometric(std::size_t k, double ratio = 0.5,
                               double first = 1.0);

  std::size_t size() const { return prices_.size(); }
  double operator[](std::size_t j) const { return prices_[j]; }
  double next(std::size_t j) const {
    return j + 1 < prices_.size() ? prices_[j + 1] : 0.0;
  }
  double highest() const { return prices_.front(); }
  double lowest() const { return prices_.back(); }
  std::span<const double> prices() const { return prices_; }

  friend bool operator==(const PriceLadder&, const PriceLadder&) = default;

 private:
  std::vector<double> prices_;
};

// UDPM(lambda, P, (n_j)). Counts are real-valued so estimated instances and
// DP states share the representation.
class UdpmInstance {
 public:
  UdpmInstance(double lambda, PriceLadder ladder, std::vector<double> counts);

  double lambda() const { return lambda_; }
  const PriceLadder& ladder() const { return ladder_; }
  std::span<const double> counts() const { return counts_; }
  double count(std::size_t j) const { return counts_[j]; }
  std::size_t size() const { return counts_.size(); }
  double total() const { return total_; }

  // Same ladder and rate, new counts (e.g. an estimated instance).
  UdpmInstance with_counts(std::vector<double> counts) const;

  // True when every count is a whole number, which simulation requires.
  bool has_integral_counts() const;

  friend bool operator==(const UdpmInstance&, const UdpmInstance&) = default;

 private:
  double lambda_;
  PriceLadder ladder_;
  std::vector<double> counts_;
  double total_;
};

UdpmInstance make_udpm(double lambda, std::vector<double> prices,
                       std::vector<double> counts);

// Non-adaptive markdown policy: dwell fraction t_j at p_j, sum 1.
class MarkdownAllocation {
 public:
  explicit MarkdownAllocation(std::vector<double> fractions);

  static MarkdownAllocation Uniform(std::size_t k);
  static MarkdownAllocation OneHot(std::size_t k, std::size_t j);

  std::size_t size() const { return t_.size(); }
  double operator[](std::size_t j) const { return t_[j]; }
  std::span<const double> fractions() const { return t_; }

  friend bool operator==(const MarkdownAllocation&,
                         const MarkdownAllocation&) = default;

 private:
  std::vector<double> t_;
};

// Piecewise-constant price on [0, 1]. Piece i covers [breakpoints[i],
// breakpoints[i+1]) and the last piece closes at 1.
class PriceSchedule {
 public:
  PriceSchedule(std::vector<double> breakpoints, std::vector<double> prices);

  // Markdown order, zero-length phases dropped.
  static PriceSchedule FromAllocation(const MarkdownAllocation& t,
                                      const PriceLadder& ladder);
  static PriceSchedule Constant(double price);

  std::size_t size() const { return prices_.size(); }
  double start(std::size_t i) const { return breakpoints_[i]; }
  double end(std::size_t i) const {
    return i + 1 < breakpoints_.size() ? breakpoints_[i + 1] : 1.0;
  }
  double price(std::size_t i) const { return prices_[i]; }
  double price_at(double t) const;

  std::span<const double> breakpoints() const { return breakpoints_; }
  std::span<const double> prices() const { return prices_; }

  friend bool operator==(const PriceSchedule&, const PriceSchedule&) = default;

 private:
  std::vector<double> breakpoints_;
  std::vector<double> prices_;
};

enum class DiscountMode {
  kConstantOne,  // psi(m) = 1: valuation never changes
  kUnitDemand,   // psi(m) = 1(m = 0): customer leaves after one purchase
};

// GvR(lambda_base, P, d): Poisson arrivals, each buys at p with prob d(p).
class StreamInstance {
 public:
  StreamInstance(double base_rate, PriceLadder ladder,
                 std::vector<double> demand);

  double base_rate() const { return base_rate_; }
  const PriceLadder& ladder() const { return ladder_; }
  std::span<const double> demand() const { return demand_; }

  // Purchase probability at an arbitrary price: d of the cheapest ladder
  // price that is >= `price`, or 0 above p_1.
  double demand_at(double price) const;

  friend bool operator==(const StreamInstance&,
                         const StreamInstance&) = default;

 private:
  double base_rate_;
  PriceLadder ladder_;
  std::vector<double> demand_;
};

// d_v(p_j) = (1/n) * #{i : v_i >= p_j}.
std::vector<double> demand_function(std::span<const double> valuations,
                                    const PriceLadder& ladder);

// Per-type counts of valuations that sit on the ladder.
std::vector<double> tally_valuations(std::span<const double> valuations,
                                     const PriceLadder& ladder);

}  // namespace poolprice
