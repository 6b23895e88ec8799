#pragma once

// Conditional inference after the randomized lasso.
//
// All vectors and matrices below live in "selected-first" coordinates: the
// columns of E (in increasing order) followed by those of E'. `order` maps
// a position in that layout back to the design column.

#include <cmath>
#include <optional>

#include "mrtsi/common.hpp"
#include "mrtsi/estimation.hpp"
#include "mrtsi/rand_lasso.hpp"

namespace mrtsi {

struct MasterStats {
    IndexSet E;
    IndexSet order;  // E then E'
    int target = -1; // design column of the target
    int j = -1;      // position of the target within E
    int n = 0;

    Vec bhatE;       // refit on E
    double bhat_j = 0.0;
    Vec ghat;        // p - 1, unscaled
    double sigma = 0.0;  // sigma^{E.j}
    Vec Sigma_Ej;    // column j of Sigma_EE

    RowVec M1;       // 1 x p
    Mat M2;          // (p-1) x p
    Mat Sigma_big;   // M2 M2'
    Vec P1;          // p
    Mat P2;          // p x (p-1)

    // H and K permuted to selected-first layout.
    Mat H;
    Mat K;

    int p() const { return static_cast<int>(order.size()); }
    int q() const { return static_cast<int>(E.size()); }
    double x_obs() const { return std::sqrt(static_cast<double>(n)) * bhat_j; }
    Vec y_obs() const { return std::sqrt(static_cast<double>(n)) * ghat; }
};

/// Master statistics for the target column `target` (a member of E).
MasterStats master_statistics(const StackedDesign& design, const GramStats& gram,
                              const SandwichMatrices& sandwich, const Vec& bhatE,
                              const IndexSet& E, int target);

struct ConditioningGeometry {
    Vec signs;       // q; penalized signs, +1 on unpenalized members
    std::vector<bool> constrained;  // q; sign constraint applies
    Mat B;           // H_{.,E} Diag(signs), p x q
    Mat Lambda;      // (B' Omega^{-1} B)^{-1}
    Vec eta;
    Vec Qvec;
    Vec opt;         // sqrt(n) Diag(signs) beta_E
    double U = 0.0;
    Vec V;
    double I_minus = 0.0;
    double I_plus = 0.0;
    Vec Lvec;        // B Q
    Vec Tvec;        // B V + lambda S
    Vec lambda_S;    // lambda times the full subgradient, p
    Vec omega;       // realized randomization, permuted
};

/// Throws NumericError when every entry of Q vanishes.
ConditioningGeometry truncation(const SelectionResult& selection, const MasterStats& stats,
                                const Mat& Omega);

/// P1 x + P2 y + H_{.,E} sqrt(n) beta_E + lambda S, which for the quadratic
/// loss equals the realized randomization exactly.
Vec kkt_reconstruction(const MasterStats& stats, const ConditioningGeometry& geo);

/// Change-of-variables map L u + B v + lambda S + P1 x + P2 y evaluated at
/// a given (u, v) and the conditioning subgradient.
Vec cov_map(const MasterStats& stats, const ConditioningGeometry& geo, double u, const Vec& v,
            double x, const Vec& y);

struct PivotOptions {
    int quadrature_order = 4096;
    double alpha = 0.1;
    double tolerance = 1e-8;   // pivot units
    int max_doublings = 60;
    bool audit = false;
    int audit_points = 50;
};

/// Everything the pivot needs; immutable once built.
class PivotContext {
public:
    /// Components of F and the Gaussian law of the target statistic.
    PivotContext(Mat Omega, Vec L, Vec P1, Mat P2, Vec T, double I_minus, double I_plus,
                 double sigma, int n, double x_obs, Vec y_obs);
    static PivotContext from(const MasterStats& stats, const ConditioningGeometry& geo,
                             const Mat& Omega);

    /// log F(x, y) evaluated in closed form.
    double log_adjustment_F(double x, const Vec& y) const;

    /// Pivot at parameter value `beta` (unscaled) for the observed data.
    double pivot(double beta, int quadrature_order = 4096) const;

    const Mat& Omega() const { return Omega_; }
    const Mat& Theta() const { return Theta_; }
    const Vec& L() const { return L_; }
    const Vec& P1() const { return P1_; }
    const Mat& P2() const { return P2_; }
    const Vec& T() const { return T_; }
    double I_minus() const { return I_minus_; }
    double I_plus() const { return I_plus_; }
    double sigma() const { return sigma_; }
    int n() const { return n_; }
    double x_obs() const { return x_obs_; }
    const Vec& y_obs() const { return y_obs_; }
    double estimate() const { return x_obs_ / std::sqrt(static_cast<double>(n_)); }

private:
    double log_mass(double a, double b, double mu, int order, double peak) const;
    double log_integrand(double x, double mu) const;
    double dlog_integrand(double x, double mu) const;

    Mat Omega_;
    Mat Omega_inv_;
    double log_det_Omega_ = 0.0;
    Vec L_, P1_, T_;
    Mat P2_;
    double I_minus_, I_plus_;
    double sigma_;
    int n_;
    double x_obs_;
    Vec y_obs_;
    Mat Theta_;
    double s_ = 0.0;  // sqrt(L' Omega^{-1} L)
    // The pivot integrand for the observed y as a function of x:
    // -(a x^2 + 2 b x)/2 + log dPhi(s (I + l0 + l1 x)).
    double quad_a_ = 0.0, quad_b_ = 0.0, ell0_ = 0.0, ell1_ = 0.0;
};

struct SelectiveInterval {
    int target = -1;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double pivot_lower = 0.0;  // pivot at lower, target 1 - alpha/2
    double pivot_upper = 0.0;  // pivot at upper, target alpha/2
    double sigma = 0.0;
    bool audited = false;
    bool monotone = true;
    double max_audit_increase = 0.0;
    int evaluations = 0;
};

/// Inverts the pivot by bracket doubling from +-2 sigma/sqrt(n) around the
/// estimate, then a bracketed TOMS 748 search. Throws NumericError when no
/// bracket is found.
SelectiveInterval invert_interval(const PivotContext& ctx, const PivotOptions& opts);

/// Identity checks recorded for every inferred target.
struct GeometryDiagnostics {
    double decomposition_error = 0.0;  // |sqrt(n) D beta_E - (V + Q U)|_inf
    bool inside_truncation = true;     // I_- <= U <= I_+
    double kkt_error = 0.0;            // |reconstruction - omega|_inf
    double omega_norm = 0.0;           // |omega|_inf
};

GeometryDiagnostics diagnose(const MasterStats& stats, const ConditioningGeometry& geo);

}  // namespace mrtsi
