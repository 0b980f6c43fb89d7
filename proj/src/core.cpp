#include "poolprice/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "poolprice/tolerances.hpp"

namespace poolprice {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

PriceLadder::PriceLadder(std::vector<double> prices)
    : prices_(std::move(prices)) {
  require(!prices_.empty(), "price ladder is empty");
  for (std::size_t j = 0; j < prices_.size(); ++j) {
    require(std::isfinite(prices_[j]) && prices_[j] > 0.0,
            "prices must be finite and positive");
    if (j > 0) {
      require(prices_[j] < prices_[j - 1], "prices not strictly decreasing");
    }
  }
}

PriceLadder PriceLadder::Uniform(std::size_t k) {
  require(k >= 1, "ladder needs at least one price");
  std::vector<double> p(k);
  for (std::size_t i = 0; i < k; ++i) {
    p[i] = 1.0 - static_cast<double>(i) / static_cast<double>(k);
  }
  return PriceLadder(std::move(p));
}

PriceLadder PriceLadder::Geometric(std::size_t k, double ratio, double first) {
  require(k >= 1, "ladder needs at least one price");
  require(ratio > 0.0 && ratio < 1.0, "geometric ratio must lie in (0, 1)");
  std::vector<double> p(k);
  double v = first;
  for (std::size_t i = 0; i < k; ++i) {
    p[i] = v;
    v *= ratio;
  }
  return PriceLadder(std::move(p));
}

UdpmInstance::UdpmInstance(double lambda, PriceLadder ladder,
                           std::vector<double> counts)
    : lambda_(lambda), ladder_(std::move(ladder)), counts_(std::move(counts)) {
  require(std::isfinite(lambda_), "lambda must be finite");
  require(lambda_ > 0.0 && lambda_ <= tol::kMaxLambda,
          "lambda must lie in (0, 1e6]");
  require(counts_.size() == ladder_.size(),
          "counts and prices differ in length");
  for (double c : counts_) {
    require(std::isfinite(c), "counts must be finite");
    require(c >= 0.0, "counts must be nonnegative");
  }
  total_ = std::accumulate(counts_.begin(), counts_.end(), 0.0);
  require(total_ > 0.0, "total customer count must be positive");
}

UdpmInstance UdpmInstance::with_counts(std::vector<double> counts) const {
  return UdpmInstance(lambda_, ladder_, std::move(counts));
}

bool UdpmInstance::has_integral_counts() const {
  return std::all_of(counts_.begin(), counts_.end(), [](double c) {
    return std::abs(c - std::round(c)) <= tol::kIntegralCount;
  });
}

UdpmInstance make_udpm(double lambda, std::vector<double> prices,
                       std::vector<double> counts) {
  return UdpmInstance(lambda, PriceLadder(std::move(prices)),
                      std::move(counts));
}

MarkdownAllocation::MarkdownAllocation(std::vector<double> fractions)
    : t_(std::move(fractions)) {
  require(!t_.empty(), "allocation is empty");
  double sum = 0.0;
  for (double x : t_) {
    require(std::isfinite(x) && x >= 0.0,
            "allocation entries must be nonnegative");
    sum += x;
  }
  require(std::abs(sum - 1.0) <= tol::kSimplexSum,
          "allocation must sum to 1");
}

MarkdownAllocation MarkdownAllocation::Uniform(std::size_t k) {
  require(k >= 1, "allocation needs at least one entry");
  return MarkdownAllocation(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

MarkdownAllocation MarkdownAllocation::OneHot(std::size_t k, std::size_t j) {
  require(j < k, "one-hot index out of range");
  std::vector<double> t(k, 0.0);
  t[j] = 1.0;
  return MarkdownAllocation(std::move(t));
}

PriceSchedule::PriceSchedule(std::vector<double> breakpoints,
                             std::vector<double> prices)
    : breakpoints_(std::move(breakpoints)), prices_(std::move(prices)) {
  require(!breakpoints_.empty(), "schedule has no pieces");
  require(breakpoints_.size() == prices_.size(),
          "breakpoints and prices differ in length");
  require(breakpoints_.front() == 0.0, "schedule must start at 0");
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    require(std::isfinite(breakpoints_[i]) && breakpoints_[i] < 1.0,
            "breakpoints must lie in [0, 1)");
    if (i > 0) {
      require(breakpoints_[i] > breakpoints_[i - 1],
              "breakpoints not strictly increasing");
    }
    require(std::isfinite(prices_[i]) && prices_[i] > 0.0,
            "schedule prices must be positive");
  }
}

PriceSchedule PriceSchedule::FromAllocation(const MarkdownAllocation& t,
                                            const PriceLadder& ladder) {
  require(t.size() == ladder.size(), "allocation and ladder differ in length");
  std::vector<double> bp;
  std::vector<double> pr;
  double clock = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (t[j] <= 0.0 || clock >= 1.0) continue;
    bp.push_back(clock);
    pr.push_back(ladder[j]);
    clock += t[j];
  }
  return PriceSchedule(std::move(bp), std::move(pr));
}

PriceSchedule PriceSchedule::Constant(double price) {
  return PriceSchedule({0.0}, {price});
}

double PriceSchedule::price_at(double t) const {
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  std::size_t i = it == breakpoints_.begin()
                      ? 0
                      : static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
  return prices_[i];
}

StreamInstance::StreamInstance(double base_rate, PriceLadder ladder,
                               std::vector<double> demand)
    : base_rate_(base_rate),
      ladder_(std::move(ladder)),
      demand_(std::move(demand)) {
  require(std::isfinite(base_rate_) && base_rate_ > 0.0,
          "base rate must be positive and finite");
  require(demand_.size() == ladder_.size(),
          "demand and prices differ in length");
  for (std::size_t j = 0; j < demand_.size(); ++j) {
    require(demand_[j] >= 0.0 && demand_[j] <= 1.0,
            "demand values must lie in [0, 1]");
    if (j > 0) {
      require(demand_[j] >= demand_[j - 1],
              "demand must not increase with price");
    }
  }
}

double StreamInstance::demand_at(double price) const {
  double d = 0.0;
  for (std::size_t j = 0; j < ladder_.size(); ++j) {
    if (ladder_[j] >= price) d = demand_[j];
  }
  return d;
}

std::vector<double> demand_function(std::span<const double> valuations,
                                    const PriceLadder& ladder) {
  require(!valuations.empty(), "valuation list is empty");
  std::vector<double> d(ladder.size(), 0.0);
  const double n = static_cast<double>(valuations.size());
  for (std::size_t j = 0; j < ladder.size(); ++j) {
    std::size_t above = 0;
    for (double v : valuations) above += v >= ladder[j] ? 1 : 0;
    d[j] = static_cast<double>(above) / n;
  }
  return d;
}

std::vector<double> tally_valuations(std::span<const double> valuations,
                                     const PriceLadder& ladder) {
  std::vector<double> counts(ladder.size(), 0.0);
  for (double v : valuations) {
    auto prices = ladder.prices();
    auto it = std::find(prices.begin(), prices.end(), v);
    require(it != prices.end(), "valuation is not a ladder price");
    counts[static_cast<std::size_t>(it - prices.begin())] += 1.0;
  }
  return counts;
}

}  // namespace poolprice
