#pragma once

#include <cmath>

namespace featbo {

inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kSqrt2Pi = 2.5066282746310002;

/// Standard normal density.
inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

/// Standard normal CDF.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

/// Inverse standard normal CDF (probit). Requires p in (0, 1).
double probit(double p);

/// Logistic sigmoid 1/(1+e^-t), saturating gracefully for large |t|.
inline double sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// Inverse of the logistic sigmoid. Requires p in (0, 1).
inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace featbo
