#include <numeric>

#include "doctest.h"
#include "instances.hpp"
#include "mrtsi/gaussian.hpp"

using namespace mrtsi;

namespace {

StackedDesign signal_design(int n, std::uint64_t seed, double signal = 0.25, int p = 8) {
    Vec beta = Vec::Zero(p);
    beta(0) = -0.2;
    for (int k = 1; k < std::min(p, 4); ++k) beta(k) = signal;
    StackedDesign d = testing::random_design(n, 3, p, seed, beta, 1.0);
    d.unpenalized = {0};
    return d;
}

}  // namespace

TEST_CASE("truncated normal cdf") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(truncated_normal_cdf(0.3, 0.1, 2.0, -inf, inf) == doctest::Approx(gaussian::cdf(0.1)).epsilon(1e-14));
    CHECK(truncated_normal_cdf(-1.0, 0.0, 1.0, 0.0, 1.0) == 0.0);
    CHECK(truncated_normal_cdf(2.0, 0.0, 1.0, 0.0, 1.0) == 1.0);
    const double v = truncated_normal_cdf(0.5, 0.0, 1.0, 0.0, 1.0);
    CHECK(v == doctest::Approx((gaussian::cdf(0.5) - 0.5) / (gaussian::cdf(1.0) - 0.5)).epsilon(1e-12));
    // Far tail stays finite.
    // Conditional on Z > 40 the excess is roughly Exp(40).
    const double tail = truncated_normal_cdf(40.02, 0.0, 1.0, 40.0, inf);
    CHECK(tail == doctest::Approx(1.0 - std::exp(-0.8)).epsilon(2e-3));
}

TEST_CASE("untruncated polyhedral equals Wald") {
    StackedDesign d = signal_design(60, 1, 0.25, 4);
    d.unpenalized = {0, 1, 2, 3};
    InferenceOptions opts;
    opts.infer_unpenalized = true;
    opts.lambda = 1.0;
    const IntervalReport poly = polyhedral_intervals(d, opts, 7);
    const IntervalReport wald = naive_intervals(d, opts, 7);
    REQUIRE(poly.intervals.size() == 4);
    REQUIRE(wald.intervals.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(poly.intervals[k].lower == doctest::Approx(wald.intervals[k].lower).epsilon(1e-6));
        CHECK(poly.intervals[k].upper == doctest::Approx(wald.intervals[k].upper).epsilon(1e-6));
        CHECK(poly.intervals[k].finite);
    }
}

TEST_CASE("polyhedral endpoints solve the truncated-normal equations") {
    int checked = 0;
    for (std::uint64_t seed = 1; seed < 40 && checked < 10; ++seed) {
        const StackedDesign d = signal_design(100, seed, 0.6);
        InferenceOptions opts;
        const IntervalReport rep = polyhedral_intervals(d, opts, seed);
        const GramStats g = gram_stats(d);
        const SelectionResult sel = solve_randomized_lasso(d, g, rep.lambda, Vec::Zero(d.p()), d.unpenalized);
        REQUIRE(sel.E == rep.E);
        if (rep.empty()) continue;
        const Vec bhatE = wcls_refit(g, sel.E);
        const SandwichMatrices sw = sandwich(d, sel.E, bhatE);
        const double rn = std::sqrt(double(d.n()));
        for (const auto& iv : rep.intervals) {
            CHECK(iv.lower <= iv.upper);
            CHECK(iv.finite == (std::isfinite(iv.lower) && std::isfinite(iv.upper)));
            if (!iv.finite) continue;
            const int k = static_cast<int>(std::find(sel.E.begin(), sel.E.end(), iv.column) - sel.E.begin());
            const PolyhedralTruncation tr = polyhedral_truncation(g, sw, sel, bhatE, k, true);
            CHECK_FALSE(tr.crossed);
            CHECK(tr.lower <= tr.x);
            CHECK(tr.x <= tr.upper);
            const double at_lower = truncated_normal_cdf(tr.x, rn * iv.lower, tr.sigma, tr.lower, tr.upper);
            const double at_upper = truncated_normal_cdf(tr.x, rn * iv.upper, tr.sigma, tr.lower, tr.upper);
            CHECK(std::abs(at_lower - 0.95) <= 1e-6);
            CHECK(std::abs(at_upper - 0.05) <= 1e-6);
            ++checked;
        }
    }
    CHECK(checked >= 10);
}

TEST_CASE("polyhedral event: sign constraints only") {
    const StackedDesign d = signal_design(100, 3, 0.6);
    InferenceOptions opts;
    const GramStats g = gram_stats(d);
    const IntervalReport rep = polyhedral_intervals(d, opts, 3);
    REQUIRE(!rep.empty());
    const SelectionResult sel = solve_randomized_lasso(d, g, rep.lambda, Vec::Zero(d.p()), d.unpenalized);
    const Vec bhatE = wcls_refit(g, sel.E);
    const SandwichMatrices sw = sandwich(d, sel.E, bhatE);
    const int k = static_cast<int>(std::find(sel.E.begin(), sel.E.end(), rep.intervals[0].column) - sel.E.begin());
    const PolyhedralTruncation full = polyhedral_truncation(g, sw, sel, bhatE, k, true);
    const PolyhedralTruncation signs = polyhedral_truncation(g, sw, sel, bhatE, k, false);
    // Fewer constraints give a wider truncation region.
    CHECK(signs.lower <= full.lower);
    CHECK(signs.upper >= full.upper);
    CHECK(signs.x == full.x);
}

TEST_CASE("splitting uses disjoint participant folds") {
    const StackedDesign d = signal_design(120, 4, 0.6);
    InferenceOptions opts;
    const IntervalReport rep = splitting_intervals(d, opts, 11);
    CHECK(rep.n_inference == 36);

    // Reconstruct the folds and perturb the selection fold only.
    std::vector<int> order(120);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(11, Stream::FoldSplit));
    std::shuffle(order.begin(), order.end(), rng);
    StackedDesign moved = d;
    for (int k = 0; k < 84; ++k) {
        const int i = order[k];
        moved.Y.segment(moved.offsets[i], moved.rows(i)).array() += 1e-7 * (k % 3 - 1.0);
    }
    const IntervalReport again = splitting_intervals(moved, opts, 11);
    REQUIRE(again.E == rep.E);
    REQUIRE(again.intervals.size() == rep.intervals.size());
    for (std::size_t k = 0; k < rep.intervals.size(); ++k) {
        CHECK(again.intervals[k].lower == rep.intervals[k].lower);
        CHECK(again.intervals[k].upper == rep.intervals[k].upper);
    }
    opts.select_fraction = 0.99;
    CHECK_THROWS_AS(splitting_intervals(d, opts, 11), ConfigError);
}

TEST_CASE("splitting width scales with the inference fold size") {
    double wide = 0.0, narrow = 0.0;
    int count_wide = 0, count_narrow = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        const StackedDesign d = signal_design(240, 1000 + seed, 0.8, 5);
        InferenceOptions opts;
        opts.select_fraction = 0.7;  // 72 for inference
        for (const auto& iv : splitting_intervals(d, opts, seed).intervals) {
            wide += iv.upper - iv.lower;
            ++count_wide;
        }
        opts.select_fraction = 0.4;  // 144 for inference
        for (const auto& iv : splitting_intervals(d, opts, seed).intervals) {
            narrow += iv.upper - iv.lower;
            ++count_narrow;
        }
    }
    const double ratio = (wide / count_wide) / (narrow / count_narrow);
    CHECK(std::abs(ratio / std::sqrt(2.0) - 1.0) < 0.10);
}

TEST_CASE("naive width and fixed-set coverage") {
    const StackedDesign d = signal_design(100, 5, 0.6);
    InferenceOptions opts;
    const IntervalReport rep = naive_intervals(d, opts, 5);
    const double z = gaussian::quantile(0.95);
    for (const auto& iv : rep.intervals)
        CHECK(iv.upper - iv.lower == doctest::Approx(2.0 * z * iv.sigma / std::sqrt(100.0)).epsilon(1e-12));

    // E fixed a priori: Wald intervals cover at the nominal rate.
    int covered = 0, total = 0;
    Vec beta(3);
    beta << 0.5, -0.3, 0.2;
    for (std::uint64_t seed = 1; seed <= 400; ++seed) {
        StackedDesign fixed = testing::random_design(60, 3, 3, 5000 + seed, beta, 1.0);
        fixed.unpenalized = {0, 1, 2};
        InferenceOptions o;
        o.infer_unpenalized = true;
        o.lambda = 1.0;
        for (const auto& iv : naive_intervals(fixed, o, seed).intervals) {
            covered += iv.lower <= beta(iv.column) && beta(iv.column) <= iv.upper;
            ++total;
        }
    }
    CHECK(std::abs(double(covered) / total - 0.9) < 0.03);
}

TEST_CASE("si report carries the geometry diagnostics") {
    const StackedDesign d = signal_design(80, 6, 0.5);
    InferenceOptions opts;
    opts.pivot.audit = true;
    const IntervalReport rep = si_intervals(d, opts, 6);
    for (const auto& iv : rep.intervals) {
        CHECK(iv.finite);
        CHECK(iv.lower < iv.estimate);
        CHECK(iv.estimate < iv.upper);
        CHECK(iv.decomposition_error <= 1e-10);
        CHECK(iv.inside_truncation);
        CHECK(iv.kkt_error <= 1e-6 * (1.0 + iv.omega_norm));
        CHECK(iv.monotone);
    }
    CHECK(parse_method("polyhedral") == Method::polyhedral);
    CHECK(method_name(Method::splitting) == "splitting");
    CHECK_THROWS_AS(parse_method("bogus"), ConfigError);
}
