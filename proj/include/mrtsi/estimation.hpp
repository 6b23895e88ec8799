#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrtsi/common.hpp"
#include "mrtsi/mrt_data.hpp"

namespace mrtsi {

/// History features g_t(H_it): intercept, S_it, A_{i,t-1}, Y_{i,t-1}, then
/// any extra history columns. Lagged terms are 0 at the first decision time.
Vec history_features(const Participant& person, std::size_t t_index);
int history_feature_dim(const MrtDataset& data);

/// Least-squares working model for E[Y | H] fitted on a participant fold.
class NuisanceModel {
public:
    NuisanceModel() = default;
    NuisanceModel(Vec coefficients, std::vector<std::string> fit_ids, bool rank_deficient);

    double predict(const Participant& person, std::size_t t_index) const;

    const Vec& coefficients() const { return coef_; }
    const std::vector<std::string>& fit_ids() const { return fit_ids_; }
    bool rank_deficient() const { return rank_deficient_; }
    std::string description() const;

private:
    Vec coef_;
    std::vector<std::string> fit_ids_;
    bool rank_deficient_ = false;
};

/// OLS of Y on history features over all rows of `data`. A rank-deficient
/// feature matrix falls back to the minimum-norm solution and sets the flag.
NuisanceModel fit_nuisance_ols(const MrtDataset& data);

struct NuisanceSplit {
    NuisanceModel model;
    MrtDataset analysis;
    std::vector<int> nuisance_positions;
    std::vector<int> analysis_positions;
};

/// Random participant-level split: round(fraction * n) participants fit
/// the nuisance model, the rest are returned for analysis.
NuisanceSplit fit_nuisance(const MrtDataset& data, double split_fraction, std::uint64_t seed);

/// Sufficient statistics of the stacked quadratic loss:
/// H = (1/n) sum X_i'X_i, c = (1/n) sum X_i'Y_i.
struct GramStats {
    Mat H;
    Vec c;
    int n = 0;
};
GramStats gram_stats(const StackedDesign& design);

/// WCLS refit on the columns in E. Throws SingularMatrixError naming the
/// offending columns when sum X_E'X_E is singular.
Vec wcls_refit(const StackedDesign& design, const IndexSet& E);
Vec wcls_refit(const GramStats& gram, const IndexSet& E);

struct SandwichMatrices {
    Mat H;        // p x p
    Mat K;        // p x p, participant-level score covariance
    IndexSet E;
    Mat SigmaEE;  // H_EE^{-1} K_EE H_EE^{-1}
    Vec sigma;    // sqrt(diag(SigmaEE))
    bool ridge_lifted = false;
};

/// Sandwich matrices at the refit `bhatE` for E. Scores are aggregated over
/// times within a participant before the outer product and centred across
/// participants. A numerically singular K_EE is lifted by eps * I.
SandwichMatrices sandwich(const StackedDesign& design, const IndexSet& E, const Vec& bhatE);

/// Participant-level centred score covariance at the full coefficient
/// vector `beta` (length p).
Mat score_covariance(const StackedDesign& design, const Vec& beta);

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// are clamped to zero.
Mat sym_sqrt(const Mat& A);

}  // namespace mrtsi
