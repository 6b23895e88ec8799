#include "mrtsi/rand_lasso.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mrtsi/random.hpp"

namespace mrtsi {

Randomization Randomization::none(int p) {
    Randomization r;
    r.omega = Vec::Zero(p);
    return r;
}

Randomization draw_randomization(int p, double tau, std::uint64_t seed) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("randomization scale tau must be positive");
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Randomization r;
    r.tau = tau;
    r.seed = seed;
    r.omega.resize(p);
    for (int j = 0; j < p; ++j) r.omega(j) = tau * z(rng);
    r.Omega = (tau * tau) * Mat::Identity(p, p);
    return r;
}

IndexSet SelectionResult::penalized_active() const {
    IndexSet out;
    for (int j : E)
        if (penalized[j]) out.push_back(j);
    return out;
}

Vec SelectionResult::inactive_subgradient() const {
    return subvector(subgradient, complement(E, static_cast<int>(beta.size())));
}

double randomized_lasso_objective(const GramStats& gram, double lambda, const Vec& omega,
                                  const std::vector<bool>& penalized, const Vec& b) {
    const double rn = std::sqrt(static_cast<double>(gram.n));
    double l1 = 0.0;
    for (Eigen::Index j = 0; j < b.size(); ++j)
        if (penalized[j]) l1 += std::abs(b(j));
    return rn * (0.5 * b.dot(gram.H * b) - gram.c.dot(b)) + lambda * l1 - omega.dot(b);
}

namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

struct Kkt {
    Vec subgradient;
    double residual = 0.0;
    bool feasible = false;
};

// Subgradient implied by stationarity and the residual on E.
Kkt kkt_at(const GramStats& gram, double lambda, const Vec& omega,
           const std::vector<bool>& penalized, const Vec& b) {
    const double rn = std::sqrt(static_cast<double>(gram.n));
    const Vec r = omega - rn * (gram.H * b - gram.c);
    Kkt k;
    k.subgradient = Vec::Zero(b.size());
    k.feasible = true;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        if (!penalized[j]) {
            k.residual = std::max(k.residual, std::abs(r(j)));
        } else if (b(j) != 0.0) {
            const double s = b(j) > 0 ? 1.0 : -1.0;
            k.subgradient(j) = s;
            k.residual = std::max(k.residual, std::abs(r(j) - lambda * s));
        } else {
            k.subgradient(j) = r(j) / lambda;
            if (std::abs(k.subgradient(j)) > 1.0 + 1e-8) k.feasible = false;
        }
    }
    return k;
}

}  // namespace

SelectionResult solve_randomized_lasso(const StackedDesign& design, const GramStats& gram,
                                       double lambda, const Vec& omega,
                                       const IndexSet& unpenalized, const SolverOptions& opts) {
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    const int p = design.p();
    if (omega.size() != p) throw ConfigError("randomization dimension mismatch");
    std::vector<bool> penalized(p, true);
    for (int j : unpenalized) penalized.at(j) = false;

    const double rn = std::sqrt(static_cast<double>(gram.n));
    Vec b = Vec::Zero(p);
    Vec Hb = Vec::Zero(p);
    int sweep = 0;
    double max_change = 0.0;
    for (; sweep < opts.max_sweeps; ++sweep) {
        max_change = 0.0;
        for (int j = 0; j < p; ++j) {
            const double hjj = gram.H(j, j);
            const double thr = penalized[j] ? lambda : 0.0;
            if (hjj <= 0.0) {
                if (std::abs(omega(j) + rn * gram.c(j)) > thr)
                    throw NumericError("randomized lasso unbounded along zero column " + std::to_string(j));
                continue;
            }
            const double z = rn * (gram.c(j) - Hb(j) + hjj * b(j)) + omega(j);
            const double next = soft_threshold(z, thr) / (rn * hjj);
            const double delta = next - b(j);
            if (delta != 0.0) {
                Hb += delta * gram.H.col(j);
                b(j) = next;
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        if (max_change < opts.tol) break;
    }
    if (sweep == opts.max_sweeps) {
        const Kkt k = kkt_at(gram, lambda, omega, penalized, b);
        throw NumericError("randomized lasso did not converge; last KKT residual " +
                           std::to_string(k.residual) + ", last change " + std::to_string(max_change));
    }

    // Polish on the active set: solve the stationarity equations exactly
    // and keep the result when it reproduces the same selection event.
    IndexSet E;
    for (int j = 0; j < p; ++j)
        if (!penalized[j] || b(j) != 0.0) E.push_back(j);
    if (!E.empty()) {
        const int q = static_cast<int>(E.size());
        Vec rhs(q);
        for (int k = 0; k < q; ++k) {
            const int j = E[k];
            const double s = penalized[j] ? (b(j) > 0 ? 1.0 : -1.0) : 0.0;
            rhs(k) = gram.c(j) + (omega(j) - lambda * s) / rn;
        }
        const Mat HEE = submatrix(gram.H, E, E);
        Eigen::LDLT<Mat> ldlt(HEE);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            const Vec bE = ldlt.solve(rhs);
            Vec polished = Vec::Zero(p);
            bool same_signs = bE.allFinite();
            for (int k = 0; k < q && same_signs; ++k) {
                const int j = E[k];
                polished(j) = bE(k);
                if (penalized[j] && (bE(k) == 0.0 || (bE(k) > 0) != (b(j) > 0))) same_signs = false;
            }
            if (same_signs) {
                const Kkt before = kkt_at(gram, lambda, omega, penalized, b);
                const Kkt after = kkt_at(gram, lambda, omega, penalized, polished);
                if (after.feasible && after.residual <= before.residual) b = polished;
            }
        }
    }

    SelectionResult res;
    res.beta = b;
    res.E = E;
    res.penalized = penalized;
    res.lambda = lambda;
    res.omega = omega;
    res.sweeps = sweep + 1;
    const Kkt k = kkt_at(gram, lambda, omega, penalized, b);
    res.subgradient = k.subgradient;
    res.kkt_residual = k.residual;
    res.signs_E.resize(static_cast<Eigen::Index>(E.size()));
    for (std::size_t a = 0; a < E.size(); ++a)
        res.signs_E(static_cast<Eigen::Index>(a)) = penalized[E[a]] ? k.subgradient(E[a]) : 0.0;
    return res;
}

SelectionResult solve_randomized_lasso(const StackedDesign& design, double lambda,
                                       const Randomization& rand) {
    return solve_randomized_lasso(design, gram_stats(design), lambda, rand.omega, design.unpenalized);
}

bool selection_event_check(const SelectionResult& result) {
    const auto p = result.beta.size();
    for (std::size_t a = 0; a < result.E.size(); ++a) {
        const int j = result.E[a];
        if (!result.penalized[j]) continue;
        const double b = result.beta(j);
        const double s = result.signs_E(static_cast<Eigen::Index>(a));
        if (b == 0.0 || (b > 0 ? 1.0 : -1.0) != s) return false;
    }
    const IndexSet Ec = complement(result.E, static_cast<int>(p));
    for (int j : Ec) {
        if (result.beta(j) != 0.0) return false;
        if (std::abs(result.subgradient(j)) > 1.0) return false;
    }
    return true;
}

namespace {

Vec fitted_residuals(const StackedDesign& design, const GramStats& gram) {
    const int p = design.p();
    IndexSet cols;
    if (design.X.rows() > 2 * p) {
        cols.resize(p);
        std::iota(cols.begin(), cols.end(), 0);
    } else {
        cols = design.unpenalized;
    }
    Vec beta = Vec::Zero(p);
    if (!cols.empty()) {
        const Mat HEE = submatrix(gram.H, cols, cols);
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(HEE);
        const Vec bE = cod.solve(subvector(gram.c, cols));
        for (std::size_t k = 0; k < cols.size(); ++k) beta(cols[k]) = bE(static_cast<Eigen::Index>(k));
    }
    return design.Y - design.X * beta;
}

}  // namespace

double lambda_from_rule(const StackedDesign& design, const GramStats& gram, const LambdaRule& rule,
                        double tau, std::uint64_t seed) {
    if (rule.draws < 1 || !(rule.kappa > 0.0)) throw ConfigError("invalid lambda rule");
    const int p = design.p();
    std::vector<bool> penalized(p, true);
    for (int j : design.unpenalized) penalized[j] = false;
    const Vec resid = fitted_residuals(design, gram);
    const double rn = std::sqrt(static_cast<double>(design.n()));

    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<int> perm(resid.size());
    std::iota(perm.begin(), perm.end(), 0);
    Mat eps(resid.size(), rule.draws);
    for (int d = 0; d < rule.draws; ++d) {
        std::shuffle(perm.begin(), perm.end(), rng);
        for (Eigen::Index r = 0; r < resid.size(); ++r) eps(r, d) = resid(perm[r]);
    }
    Mat scores = design.X.transpose() * eps / rn;
    std::vector<double> stats;
    stats.reserve(rule.draws);
    for (int d = 0; d < rule.draws; ++d) {
        if (tau > 0.0)
            for (int j = 0; j < p; ++j) scores(j, d) += tau * z(rng);
        double m = 0.0;
        for (int j = 0; j < p; ++j)
            if (penalized[j]) m = std::max(m, std::abs(scores(j, d)));
        stats.push_back(m);
    }
    std::sort(stats.begin(), stats.end());
    const std::size_t k = stats.size();
    const double median = k % 2 ? stats[k / 2] : 0.5 * (stats[k / 2 - 1] + stats[k / 2]);
    return rule.kappa * median;
}

double default_tau(const StackedDesign& design, const GramStats& gram, double scale) {
    const int p = design.p();
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(gram.H);
    const Vec beta = cod.solve(gram.c);
    const Mat K = score_covariance(design, beta);
    const double avg = K.diagonal().sum() / p;
    if (!(avg > 0.0)) throw NumericError("score covariance has zero trace; cannot set tau");
    return scale * std::sqrt(avg);
}

}  // namespace mrtsi
