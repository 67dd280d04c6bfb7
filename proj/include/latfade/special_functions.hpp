#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace latfade {

/// Exponential integral E1(z) = integral from z to infinity of e^-t / t dt, z > 0.
/// Power series for z <= 1, modified Lentz continued fraction above.
inline double exp_integral_e1(double z) {
  if (!(z > 0.0)) throw std::domain_error("exp_integral_e1: z must be positive");
  constexpr double eps = 1e-16;
  if (z <= 1.0) {
    // -gamma - ln z + sum_{k>=1} (-1)^(k+1) z^k / (k k!)
    double sum = 0.0;
    double term = 1.0;  // (-1)^(k+1) z^k / k!
    for (int k = 1; k < 200; ++k) {
      term *= (k == 1 ? z : -z / k);
      const double contrib = term / k;
      sum += contrib;
      if (std::abs(contrib) < eps * std::abs(sum)) break;
    }
    return -std::numbers::egamma - std::log(z) + sum;
  }
  constexpr double tiny = std::numeric_limits<double>::min() / eps;
  double b = z + 1.0;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h * std::exp(-z);
  }
  throw std::runtime_error("exp_integral_e1: continued fraction did not converge");
}

/// Upper bound e^-z ln(1 + 1/z) on E1(z).
inline double e1_upper_bound(double z) {
  if (!(z > 0.0)) throw std::domain_error("e1_upper_bound: z must be positive");
  return std::exp(-z) * std::log1p(1.0 / z);
}

/// True when E1(z) < e^-z ln(1 + 1/z).
inline bool e1_bound_check(double z) { return exp_integral_e1(z) < e1_upper_bound(z); }

}  // namespace latfade
