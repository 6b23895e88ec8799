#include "doctest.h"
#include "mrtsi/rand_lasso.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mrtsi;

namespace {

std::vector<bool> all_penalized(int p) { return std::vector<bool>(p, true); }

}  // namespace

TEST_CASE("randomization draws") {
    CHECK_THROWS_AS(draw_randomization(3, 0.0, 1), ConfigError);
    const Randomization a = draw_randomization(4, 1.7, 9);
    const Randomization b = draw_randomization(4, 1.7, 9);
    CHECK((a.omega.array() == b.omega.array()).all());
    CHECK(testing::max_abs(a.Omega - 1.7 * 1.7 * Mat::Identity(4, 4)) == 0.0);

    const int N = 100000;
    const double tau = 1.7;
    double s = 0.0, s2 = 0.0;
    for (int k = 0; k < N; ++k) {
        const double w = draw_randomization(1, tau, derive_seed(3, {static_cast<std::uint64_t>(k)})).omega(0);
        s += w;
        s2 += w * w;
    }
    const double var = s2 / N - (s / N) * (s / N);
    const double t2 = tau * tau;
    CHECK(std::abs(var - t2) < 3.0 * t2 * std::sqrt(2.0 / N));
}

TEST_CASE("p = 2 solver matches sign enumeration") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const StackedDesign d = testing::random_design(30, 2, 2, seed, Vec::Constant(2, 0.3));
        const GramStats g = gram_stats(d);
        Rng rng(seed + 1000);
        std::normal_distribution<double> z(0.0, 1.0);
        Vec omega(2);
        omega << z(rng), z(rng);
        const double lambda = 0.5 + std::abs(z(rng));
        const SelectionResult res = solve_randomized_lasso(d, g, lambda, omega, {});
        const Vec oracle = testing::brute_force_lasso(g, lambda, omega);
        REQUIRE(oracle.size() == 2);
        CHECK(testing::max_abs(res.beta - oracle) <= 1e-8);
    }
}

TEST_CASE("solution satisfies the selection characterization") {
    const StackedDesign d = testing::random_design(60, 3, 10, 21, Vec::LinSpaced(10, 1.0, -1.0));
    const GramStats g = gram_stats(d);
    const Randomization rand = draw_randomization(10, 1.0, 5);
    const SelectionResult res = solve_randomized_lasso(d, g, 4.0, rand.omega, {0});
    CHECK(selection_event_check(res));
    CHECK(res.kkt_residual <= 1e-8 * (1.0 + rand.omega.cwiseAbs().maxCoeff()));
    CHECK(std::find(res.E.begin(), res.E.end(), 0) != res.E.end());
    CHECK(res.inactive_subgradient().cwiseAbs().maxCoeff() <= 1.0 + 1e-8);
    for (int j = 1; j < 10; ++j)
        CHECK((res.beta(j) != 0.0) == (std::find(res.E.begin(), res.E.end(), j) != res.E.end()));

    // KKT identity: score + lambda S = omega.
    const double rn = std::sqrt(static_cast<double>(g.n));
    const Vec lhs = rn * (g.H * res.beta - g.c) + 4.0 * res.subgradient;
    CHECK(testing::max_abs(lhs - rand.omega) <= 1e-8 * (1.0 + rand.omega.cwiseAbs().maxCoeff()));

    SelectionResult flipped = res;
    for (Eigen::Index k = 0; k < flipped.signs_E.size(); ++k)
        if (flipped.signs_E(k) != 0.0) {
            flipped.signs_E(k) = -flipped.signs_E(k);
            break;
        }
    if (flipped.penalized_active().size() > 0) CHECK_FALSE(selection_event_check(flipped));
    SelectionResult loose = res;
    const IndexSet Ec = complement(res.E, 10);
    REQUIRE(!Ec.empty());
    loose.subgradient(Ec[0]) = 1.5;
    CHECK_FALSE(selection_event_check(loose));
}

TEST_CASE("objective spot checks") {
    const StackedDesign d = testing::random_design(40, 2, 6, 22, Vec::Ones(6));
    const GramStats g = gram_stats(d);
    const Randomization rand = draw_randomization(6, 0.8, 6);
    const double lambda = 3.0;
    const SelectionResult res = solve_randomized_lasso(d, g, lambda, rand.omega, {});
    const auto pen = all_penalized(6);
    const double at_sol = randomized_lasso_objective(g, lambda, rand.omega, pen, res.beta);
    CHECK(at_sol <= randomized_lasso_objective(g, lambda, rand.omega, pen, Vec::Zero(6)));
    const Vec ols = g.H.ldlt().solve(g.c);
    CHECK(at_sol <= randomized_lasso_objective(g, lambda, rand.omega, pen, ols));
}

TEST_CASE("huge penalty keeps only unpenalized columns") {
    const StackedDesign d = testing::random_design(40, 2, 5, 23, Vec::Ones(5));
    const GramStats g = gram_stats(d);
    const double rn = std::sqrt(static_cast<double>(g.n));
    const double score0 = (rn * g.c).cwiseAbs().maxCoeff();
    const Vec omega = 1e-6 * Vec::Ones(5);
    const SelectionResult res = solve_randomized_lasso(d, g, 1e6 * score0, omega, {0});
    CHECK(res.E == IndexSet{0});
}

TEST_CASE("vanishing penalty gives least squares") {
    const StackedDesign d = testing::random_design(40, 2, 5, 24, Vec::Ones(5));
    const GramStats g = gram_stats(d);
    const SelectionResult res = solve_randomized_lasso(d, g, 1e-8, Vec::Zero(5), {});
    const Vec ols = g.H.ldlt().solve(g.c);
    CHECK(testing::max_abs(res.beta - ols) < 1e-4);
}

TEST_CASE("scaling lambda, omega and the loss together leaves the minimizer") {
    StackedDesign d = testing::random_design(50, 2, 8, 25, Vec::LinSpaced(8, 0.5, -0.5));
    const Randomization rand = draw_randomization(8, 1.0, 7);
    const double lambda = 2.0;
    const SelectionResult a = solve_randomized_lasso(d, gram_stats(d), lambda, rand.omega, {});
    const double k = 3.7;
    d.X *= std::sqrt(k);
    d.Y *= std::sqrt(k);
    const SelectionResult b = solve_randomized_lasso(d, gram_stats(d), k * lambda, k * rand.omega, {});
    CHECK(a.E == b.E);
    CHECK(testing::max_abs(a.beta - b.beta) < 1e-8);
}

TEST_CASE("lambda rule and default tau") {
    StackedDesign d = testing::random_design(60, 3, 8, 26);
    d.unpenalized = {0};
    const GramStats g = gram_stats(d);
    LambdaRule rule;
    const double l1 = lambda_from_rule(d, g, rule, 1.0, 5);
    CHECK(l1 > 0.0);
    CHECK(l1 == lambda_from_rule(d, g, rule, 1.0, 5));
    rule.kappa = 2.0;
    CHECK(lambda_from_rule(d, g, rule, 1.0, 5) == doctest::Approx(2.0 * l1).epsilon(1e-14));
    rule.draws = 0;
    CHECK_THROWS_AS(lambda_from_rule(d, g, rule, 1.0, 5), ConfigError);
    const double tau = default_tau(d, g);
    CHECK(tau > 0.0);
    CHECK(default_tau(d, g, 2.0) == doctest::Approx(2.0 * tau));
    CHECK_THROWS_AS(solve_randomized_lasso(d, g, 0.0, Vec::Zero(8), {}), ConfigError);
}
