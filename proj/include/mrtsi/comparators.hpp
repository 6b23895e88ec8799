#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrtsi/common.hpp"
#include "mrtsi/mrt_data.hpp"
#include "mrtsi/rand_lasso.hpp"
#include "mrtsi/selective.hpp"

namespace mrtsi {

enum class Method { si, polyhedral, splitting, naive };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct TargetInterval {
    int column = -1;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double sigma = 0.0;  // sandwich sd of sqrt(n) bhat_j
    bool finite = true;

    // Pivot at the endpoints (si / polyhedral); NaN otherwise.
    double pivot_lower = 0.0;
    double pivot_upper = 0.0;

    // si only.
    double decomposition_error = 0.0;
    double kkt_error = 0.0;
    double omega_norm = 0.0;
    bool inside_truncation = true;
    bool audited = false;
    bool monotone = true;
    int evaluations = 0;

    // polyhedral only: truncation limits crossed, fell back to no truncation.
    bool fallback = false;
};

struct IntervalReport {
    Method method = Method::si;
    IndexSet E;                 // full selected set (includes unpenalized columns)
    std::vector<TargetInterval> intervals;
    double alpha = 0.1;
    double lambda = 0.0;
    double tau = 0.0;
    int n_inference = 0;        // participants used for inference
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<std::string> warnings;

    bool empty() const { return intervals.empty(); }
};

struct InferenceOptions {
    double alpha = 0.1;
    LambdaRule rule;
    double lambda = 0.0;        // > 0 overrides the rule
    double tau = 0.0;           // > 0 overrides the default scale
    double tau_scale = 1.0;     // multiplies the default tau
    double select_fraction = 0.7;
    bool infer_unpenalized = false;
    // Polyhedral event: sign constraints on bhat_E only, or also the
    // inactive subgradient bounds.
    bool polyhedral_inactive = true;
    PivotOptions pivot;
    SolverOptions solver;
};

/// Randomized lasso selection, then inversion of the conditional pivot for
/// every selected penalized column.
IntervalReport si_intervals(const StackedDesign& design, const InferenceOptions& opts, std::uint64_t seed);

/// Plain lasso, truncated-normal inference conditional on the active set
/// and signs.
IntervalReport polyhedral_intervals(const StackedDesign& design, const InferenceOptions& opts,
                                    std::uint64_t seed);

/// Plain lasso on a participant fold, Wald intervals on the other.
IntervalReport splitting_intervals(const StackedDesign& design, const InferenceOptions& opts,
                                   std::uint64_t seed);

/// Plain lasso and Wald intervals on the same data.
IntervalReport naive_intervals(const StackedDesign& design, const InferenceOptions& opts,
                               std::uint64_t seed);

IntervalReport run_method(Method m, const StackedDesign& design, const InferenceOptions& opts,
                          std::uint64_t seed);

/// Selection-event truncation limits for the polyhedral method, in the
/// sqrt(n) bhat_j scale. Exposed for testing.
struct PolyhedralTruncation {
    double x = 0.0;       // sqrt(n) bhat_j
    double sigma = 0.0;
    double lower = 0.0;   // V-
    double upper = 0.0;   // V+
    bool crossed = false;
};
PolyhedralTruncation polyhedral_truncation(const GramStats& gram, const SandwichMatrices& sw,
                                           const SelectionResult& sel, const Vec& bhatE, int position,
                                           bool include_inactive);

/// Truncated-normal CDF of x with mean mu and sd sigma restricted to [a, b].
double truncated_normal_cdf(double x, double mu, double sigma, double a, double b);

}  // namespace mrtsi
