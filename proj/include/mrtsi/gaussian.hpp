#pragma once

// Log-space Gaussian densities and distribution functions.

#include <cmath>
#include <limits>

namespace mrtsi::gaussian {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// log of the standard normal density.
inline double log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

/// log Phi(x). Uses erfc above -8 and the asymptotic (Mills ratio)
/// expansion below, summed up to its smallest term.
double log_cdf(double x);

/// log(1 - Phi(x)) = log Phi(-x).
inline double log_sf(double x) { return log_cdf(-x); }

double cdf(double x);

/// log(Phi(b) - Phi(a)) for a <= b; either end may be infinite.
/// Returns -inf when a == b.
double log_cdf_diff(double a, double b);

/// Inverse of Phi on (0, 1).
double quantile(double p);

/// log(exp(a) - exp(b)) for a >= b.
inline double log_diff_exp(double a, double b) {
    if (b == -kInf) return a;
    return a + std::log1p(-std::exp(b - a));
}

}  // namespace mrtsi::gaussian
