#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mrtsi/common.hpp"
#include "mrtsi/estimation.hpp"

namespace testing {

// log of the line integral  int_{lo}^{hi} phi(L t + w; 0, Omega) dt  by
// adaptive Gauss-Kronrod, anchored at the integrand's maximum over [lo, hi].
inline double log_line_integral(const mrtsi::Mat& Omega, const mrtsi::Vec& L, const mrtsi::Vec& w, double lo,
                                double hi) {
    const Eigen::LLT<mrtsi::Mat> llt(Omega);
    const mrtsi::Mat chol = llt.matrixL();
    const double p = static_cast<double>(w.size());
    double log_det = 0.0;
    for (Eigen::Index k = 0; k < chol.rows(); ++k) log_det += 2.0 * std::log(chol(k, k));
    const auto log_density = [&](double t) {
        const mrtsi::Vec z = chol.triangularView<Eigen::Lower>().solve(L * t + w);
        return -0.5 * p * std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * z.squaredNorm();
    };
    const mrtsi::Vec a = chol.triangularView<Eigen::Lower>().solve(L);
    const mrtsi::Vec b = chol.triangularView<Eigen::Lower>().solve(w);
    const double peak_t = -a.dot(b) / a.squaredNorm();
    const double h = 1.0 / a.norm();
    const double anchor = std::clamp(peak_t, lo, hi);
    const double left = std::max(lo, anchor - 60.0 * h);
    const double right = std::min(hi, anchor + 60.0 * h);
    const double top = log_density(anchor);
    auto f = [&](double t) { return std::exp(log_density(t) - top); };
    double err = 0.0;
    const double mass = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, left, right, 20, 1e-15, &err);
    return top + std::log(mass);
}

// Unpenalized-free randomized lasso by enumeration of the 3^p sign patterns:
// returns the KKT-feasible solution (empty when none is found).
inline mrtsi::Vec brute_force_lasso(const mrtsi::GramStats& g, double lambda, const mrtsi::Vec& omega) {
    using namespace mrtsi;
    const int p = static_cast<int>(g.c.size());
    const double rn = std::sqrt(static_cast<double>(g.n));
    int patterns = 1;
    for (int j = 0; j < p; ++j) patterns *= 3;
    for (int code = 0; code < patterns; ++code) {
        Vec s(p);
        int c = code;
        IndexSet A;
        for (int j = 0; j < p; ++j, c /= 3) {
            s(j) = (c % 3) - 1.0;
            if (s(j) != 0.0) A.push_back(j);
        }
        Vec b = Vec::Zero(p);
        if (!A.empty()) {
            const Mat HAA = submatrix(g.H, A, A);
            const Vec rhs = subvector(g.c, A) + (subvector(omega, A) - lambda * subvector(s, A)) / rn;
            const Vec bA = HAA.fullPivLu().solve(rhs);
            bool ok = true;
            for (std::size_t k = 0; k < A.size(); ++k) {
                if (bA(k) * s(A[k]) <= 0.0) ok = false;
                b(A[k]) = bA(k);
            }
            if (!ok) continue;
        }
        const Vec grad = omega - rn * (g.H * b - g.c);
        bool feasible = true;
        for (int j = 0; j < p; ++j)
            if (s(j) == 0.0 && std::abs(grad(j)) > lambda) feasible = false;
        if (feasible) return b;
    }
    return Vec();
}

}  // namespace testing
