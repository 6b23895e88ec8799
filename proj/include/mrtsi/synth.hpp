#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "mrtsi/common.hpp"
#include "mrtsi/mrt_data.hpp"

namespace mrtsi {

enum class ErrorRegime { gaussian, laplace, exponential };

std::string regime_name(ErrorRegime r);
ErrorRegime parse_regime(const std::string& name);

struct SimConfig {
    int n = 120;
    int T = 30;
    int p = 50;
    int active_size = 5;
    double c = 2.4;
    double rho = 0.5;
    Vec theta1;              // empty means 0.8 * 1
    double theta2 = 0.5;
    double sigma_e = 1.5;
    Mat Gamma0;              // empty means 0.3 * I
    Vec Gamma1;              // empty means 0
    ErrorRegime regime = ErrorRegime::gaussian;
    double action_s1 = 0.2;  // logit coefficient on S_1
    double action_s2 = -0.1; // logit coefficient on S_2
    double prob_min = 0.2;
    double prob_max = 0.8;
    double effect_offset = -0.2;
    double additive_scale = 1.5;  // Laplace scale / exponential mean
    int burn_in = 50;
    std::uint64_t seed = 1;

    /// Fills defaults for empty members and checks the invariants.
    SimConfig resolved() const;
    /// Stable text of every field that changes the data law, seed excluded.
    std::string fingerprint() const;
};

struct GroundTruth {
    Vec beta_star;      // p; c/|E| on the first active_size moderators
    IndexSet active_set;
};

GroundTruth ground_truth(const SimConfig& config);

/// Draws n participants from the VAR / logistic / AR-error model.
std::pair<MrtDataset, GroundTruth> generate(const SimConfig& config);

/// Stationary Gaussian AR(1) with unit innovations plus the regime's
/// additive noise.
Vec error_process(int T, double rho, ErrorRegime regime, std::uint64_t seed, double additive_scale = 1.5);

/// Population moments of the stacked design: M = E[f f'], r = E[f tau]
/// with tau the conditional treatment effect. The constant weight
/// p~(1 - p~) is common to both and dropped.
struct TruthMoments {
    Mat M;
    Vec r;
    long rows = 0;
};

/// Plug-in estimate from `rows` simulated decision times. Cached per
/// (config fingerprint, feature map description, rows).
TruthMoments truth_moments(const SimConfig& config, const FeatureMap& fmap, long rows = 1000000,
                           std::uint64_t seed = 20240917);

/// Projection of the treatment effect onto the columns in E.
Vec projected_truth(const TruthMoments& m, const IndexSet& E);

/// Cross-sectional design with one row per participant and no intercept:
/// Y = X beta* + N(0, noise_sd^2). X is fixed by design_seed.
struct FixedDesignConfig {
    int n = 300;
    int p = 30;
    int active_size = 5;
    double signal = 0.25;
    double noise_sd = 1.0;
    std::uint64_t design_seed = 11;
};

struct FixedDesign {
    Mat X;
    Vec beta_star;
    double noise_sd = 1.0;

    StackedDesign draw(std::uint64_t seed) const;
    /// (X_E'X_E)^{-1} X_E' X beta*.
    Vec projected_truth(const IndexSet& E) const;
};

FixedDesign make_fixed_design(const FixedDesignConfig& config);

}  // namespace mrtsi
