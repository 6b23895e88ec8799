#pragma once

#include <cstdint>

#include "mrtsi/common.hpp"
#include "mrtsi/estimation.hpp"
#include "mrtsi/mrt_data.hpp"

namespace mrtsi {

/// Gaussian tilt added to the lasso objective. `omega` is the realized
/// sqrt(n)*omega_n ~ N(0, Omega) with Omega = tau^2 I.
struct Randomization {
    Vec omega;
    Mat Omega;
    double tau = 0.0;
    std::uint64_t seed = 0;

    /// No tilt (plain lasso); Omega is left empty.
    static Randomization none(int p);
};

Randomization draw_randomization(int p, double tau, std::uint64_t seed);

struct SelectionResult {
    Vec beta;          // lasso solution, length p
    IndexSet E;        // unpenalized columns plus nonzero penalized ones, sorted
    Vec signs_E;       // sign(beta_E) on penalized members, 0 on unpenalized
    Vec subgradient;   // full l1 subgradient S (0 on unpenalized columns)
    Vec omega;
    double lambda = 0.0;
    double kkt_residual = 0.0;
    int sweeps = 0;
    std::vector<bool> penalized;  // per column

    int q() const { return static_cast<int>(E.size()); }
    /// Members of E that carry the l1 penalty.
    IndexSet penalized_active() const;
    /// Inactive subgradient S_{E'} in complement order.
    Vec inactive_subgradient() const;
};

struct SolverOptions {
    double tol = 1e-10;
    int max_sweeps = 10000;
};

/// Minimizes (1/sqrt n) sum_i psi(X_i b; Y_i) + lambda ||b_pen||_1 - omega'b
/// with psi the halved squared error, by cyclic coordinate descent on the
/// Gram matrix, then polishes the solution on its active set.
SelectionResult solve_randomized_lasso(const StackedDesign& design, const GramStats& gram,
                                       double lambda, const Vec& omega,
                                       const IndexSet& unpenalized,
                                       const SolverOptions& opts = {});
SelectionResult solve_randomized_lasso(const StackedDesign& design, double lambda,
                                       const Randomization& rand);

/// Sign consistency on penalized active columns and ||S_E'||_inf <= 1.
bool selection_event_check(const SelectionResult& result);

/// Objective value of the randomized lasso at `b`.
double randomized_lasso_objective(const GramStats& gram, double lambda, const Vec& omega,
                                  const std::vector<bool>& penalized, const Vec& b);

struct LambdaRule {
    double kappa = 1.0;
    int draws = 50;
};

/// kappa * median over draws of ||(1/sqrt n) sum_i X_i' eps*_i + omega*||_inf
/// on penalized columns, with eps* a permutation of the fitted residuals and
/// omega* ~ N(0, tau^2 I) (omitted when tau == 0).
double lambda_from_rule(const StackedDesign& design, const GramStats& gram, const LambdaRule& rule,
                        double tau, std::uint64_t seed);

/// tau such that tau^2 equals the average diagonal of the score covariance
/// at the full least-squares fit.
double default_tau(const StackedDesign& design, const GramStats& gram, double scale = 1.0);

}  // namespace mrtsi
