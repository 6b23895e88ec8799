#pragma once

#include <optional>

#include "mrtsi/comparators.hpp"
#include "mrtsi/estimation.hpp"
#include "mrtsi/rand_lasso.hpp"
#include "mrtsi/selective.hpp"
#include "support.hpp"

namespace testing {

// One randomized-lasso solve with everything the pivot needs.
struct SolvedInstance {
    mrtsi::StackedDesign design;
    mrtsi::GramStats gram;
    mrtsi::Randomization rand;
    mrtsi::SelectionResult sel;
    mrtsi::Vec bhatE;
    mrtsi::SandwichMatrices sw;

    mrtsi::IndexSet targets() const { return sel.penalized_active(); }
    mrtsi::MasterStats stats(int target) const {
        return mrtsi::master_statistics(design, gram, sw, bhatE, sel.E, target);
    }
};

// Random longitudinal design with an unpenalized intercept column 0 and a
// few signal columns. Returns nothing when no penalized column is selected.
inline std::optional<SolvedInstance> solve_instance(std::uint64_t seed, int n = 80, int T = 3, int p = 8,
                                                    double tau = 0.0, double lambda = 0.0) {
    using namespace mrtsi;
    Vec beta = Vec::Zero(p);
    beta(0) = -0.2;
    for (int k = 1; k < std::min(p, 4); ++k) beta(k) = 0.25;
    SolvedInstance s;
    s.design = random_design(n, T, p, seed, beta, 1.0);
    s.design.unpenalized = {0};
    s.gram = gram_stats(s.design);
    const double t = tau > 0.0 ? tau : default_tau(s.design, s.gram);
    const double lam = lambda > 0.0 ? lambda
                                    : lambda_from_rule(s.design, s.gram, LambdaRule{}, t,
                                                       derive_seed(seed, Stream::LambdaRule));
    s.rand = draw_randomization(p, t, derive_seed(seed, Stream::Randomization));
    s.sel = solve_randomized_lasso(s.design, s.gram, lam, s.rand.omega, s.design.unpenalized);
    if (s.sel.penalized_active().empty()) return std::nullopt;
    s.bhatE = wcls_refit(s.gram, s.sel.E);
    s.sw = sandwich(s.design, s.sel.E, s.bhatE);
    return s;
}

}  // namespace testing
