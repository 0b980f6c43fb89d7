#pragma once

// Numeric tolerances shared across modules.
namespace poolprice::tol {

// Allowed deviation of an allocation's sum from 1.
inline constexpr double kSimplexSum = 1e-9;
// Allowed deviation of a count from the nearest integer when a simulation
// needs whole customers.
inline constexpr double kIntegralCount = 1e-9;
// Largest accepted interaction rate.
inline constexpr double kMaxLambda = 1e6;
// Slack on the ascent property of the gradient solver.
inline constexpr double kAscent = 1e-12;

}  // namespace poolprice::tol
