#include "mrtsi/gaussian.hpp"

#include <boost/math/distributions/normal.hpp>

namespace mrtsi::gaussian {

namespace {

// Asymptotic expansion of log Phi(x) for x << 0:
// Phi(x) = phi(x)/|x| * sum_k (-1)^k (2k-1)!! / x^{2k}.
double log_cdf_lower_tail(double x) {
    const double inv_x2 = 1.0 / (x * x);
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        const double next = -term * (2.0 * k - 1.0) * inv_x2;
        if (std::abs(next) >= std::abs(term)) break;
        term = next;
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return log_pdf(x) - std::log(-x) + std::log(sum);
}

}  // namespace

double log_cdf(double x) {
    if (std::isnan(x)) return x;
    if (x == kInf) return 0.0;
    if (x == -kInf) return -kInf;
    if (x < -8.0) return log_cdf_lower_tail(x);
    if (x > 5.0) return std::log1p(-0.5 * std::erfc(x / std::sqrt(2.0)));
    return std::log(0.5 * std::erfc(-x / std::sqrt(2.0)));
}

double cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double log_cdf_diff(double a, double b) {
    if (!(a < b)) return -kInf;
    if (b == kInf) return log_sf(a);
    if (a == -kInf) return log_cdf(b);
    // Work in whichever tail keeps the larger probability representable.
    if (a > 0.0) return log_diff_exp(log_sf(a), log_sf(b));
    return log_diff_exp(log_cdf(b), log_cdf(a));
}

double quantile(double p) {
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, p);
}

}  // namespace mrtsi::gaussian
