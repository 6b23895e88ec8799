#include "mrtsi/comparators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/tools/toms748_solve.hpp>

#include "mrtsi/gaussian.hpp"
#include "mrtsi/random.hpp"

namespace mrtsi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

IndexSet inference_targets(const SelectionResult& sel, bool include_unpenalized) {
    IndexSet out;
    for (int j : sel.E)
        if (sel.penalized[j] || include_unpenalized) out.push_back(j);
    return out;
}

int position_in(const IndexSet& E, int column) {
    return static_cast<int>(std::find(E.begin(), E.end(), column) - E.begin());
}

IntervalReport wald_report(Method m, const StackedDesign& design, const IndexSet& E,
                           const IndexSet& targets, double alpha) {
    IntervalReport rep;
    rep.method = m;
    rep.E = E;
    rep.alpha = alpha;
    rep.n_inference = design.n();
    if (targets.empty()) return rep;
    const GramStats gram = gram_stats(design);
    const Vec bhatE = wcls_refit(gram, E);
    const SandwichMatrices sw = sandwich(design, E, bhatE);
    if (sw.ridge_lifted) rep.warnings.push_back("K_EE ridge lifted");
    const double z = gaussian::quantile(1.0 - alpha / 2.0);
    const double rn = std::sqrt(static_cast<double>(design.n()));
    for (int col : targets) {
        const int k = position_in(E, col);
        TargetInterval t;
        t.column = col;
        t.estimate = bhatE(k);
        t.sigma = sw.sigma(k);
        t.lower = t.estimate - z * t.sigma / rn;
        t.upper = t.estimate + z * t.sigma / rn;
        t.pivot_lower = t.pivot_upper = kNaN;
        rep.intervals.push_back(t);
    }
    return rep;
}

double lambda_for(const StackedDesign& design, const GramStats& gram, const InferenceOptions& opts,
                  double tau, std::uint64_t seed) {
    if (opts.lambda > 0.0) return opts.lambda;
    return lambda_from_rule(design, gram, opts.rule, tau, derive_seed(seed, Stream::LambdaRule));
}

SelectionResult plain_lasso(const StackedDesign& design, const GramStats& gram, double lambda,
                            const SolverOptions& solver) {
    return solve_randomized_lasso(design, gram, lambda, Vec::Zero(design.p()), design.unpenalized, solver);
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::si: return "si";
        case Method::polyhedral: return "polyhedral";
        case Method::splitting: return "splitting";
        case Method::naive: return "naive";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    if (name == "si") return Method::si;
    if (name == "polyhedral") return Method::polyhedral;
    if (name == "splitting") return Method::splitting;
    if (name == "naive") return Method::naive;
    throw ConfigError("unknown method '" + name + "'");
}

IntervalReport si_intervals(const StackedDesign& design, const InferenceOptions& opts, std::uint64_t seed) {
    const GramStats gram = gram_stats(design);
    const int p = design.p();
    const double tau = opts.tau > 0.0 ? opts.tau : opts.tau_scale * default_tau(design, gram);
    const double lambda = lambda_for(design, gram, opts, tau, seed);
    const Randomization rand = draw_randomization(p, tau, derive_seed(seed, Stream::Randomization));
    const SelectionResult sel = solve_randomized_lasso(design, gram, lambda, rand.omega, design.unpenalized,
                                                       opts.solver);
    IntervalReport rep;
    rep.method = Method::si;
    rep.E = sel.E;
    rep.alpha = opts.alpha;
    rep.lambda = lambda;
    rep.tau = tau;
    rep.seed = seed;
    rep.n_inference = design.n();
    const IndexSet targets = inference_targets(sel, opts.infer_unpenalized);
    if (targets.empty()) return rep;

    const Vec bhatE = wcls_refit(gram, sel.E);
    const SandwichMatrices sw = sandwich(design, sel.E, bhatE);
    if (sw.ridge_lifted) rep.warnings.push_back("K_EE ridge lifted");
    PivotOptions popts = opts.pivot;
    popts.alpha = opts.alpha;
    for (int col : targets) {
        const MasterStats stats = master_statistics(design, gram, sw, bhatE, sel.E, col);
        const ConditioningGeometry geo = truncation(sel, stats, rand.Omega);
        const GeometryDiagnostics diag = diagnose(stats, geo);
        const PivotContext ctx = PivotContext::from(stats, geo, rand.Omega);
        const SelectiveInterval iv = invert_interval(ctx, popts);
        TargetInterval t;
        t.column = col;
        t.estimate = iv.estimate;
        t.lower = iv.lower;
        t.upper = iv.upper;
        t.sigma = iv.sigma;
        t.pivot_lower = iv.pivot_lower;
        t.pivot_upper = iv.pivot_upper;
        t.decomposition_error = diag.decomposition_error;
        t.kkt_error = diag.kkt_error;
        t.omega_norm = diag.omega_norm;
        t.inside_truncation = diag.inside_truncation;
        t.audited = iv.audited;
        t.monotone = iv.monotone;
        t.evaluations = iv.evaluations;
        rep.intervals.push_back(t);
    }
    return rep;
}

double truncated_normal_cdf(double x, double mu, double sigma, double a, double b) {
    if (x <= a) return 0.0;
    if (x >= b) return 1.0;
    const double za = (a - mu) / sigma;
    const double zb = (b - mu) / sigma;
    const double zx = (x - mu) / sigma;
    const double num = gaussian::log_cdf_diff(za, zx);
    const double den = gaussian::log_cdf_diff(za, zb);
    if (den == -kInf) return 0.5;
    return std::clamp(std::exp(num - den), 0.0, 1.0);
}

PolyhedralTruncation polyhedral_truncation(const GramStats& gram, const SandwichMatrices& sw,
                                           const SelectionResult& sel, const Vec& bhatE, int position,
                                           bool include_inactive) {
    const int p = static_cast<int>(gram.c.size());
    const IndexSet& E = sel.E;
    const int q = static_cast<int>(E.size());
    const IndexSet Ec = complement(E, p);
    const int qc = p - q;
    const double rn = std::sqrt(static_cast<double>(gram.n));
    IndexSet order = E;
    order.insert(order.end(), Ec.begin(), Ec.end());

    const Mat H = submatrix(gram.H, order, order);
    const Mat K = submatrix(sw.K, order, order);
    const Mat HEE = H.topLeftCorner(q, q);
    const Mat HcE = H.bottomLeftCorner(qc, q);
    const Mat Hinv = HEE.ldlt().solve(Mat::Identity(q, q));

    // Z = sqrt(n) (bhat_E, r_E') with r_E' the inactive score at the refit.
    Mat A = Mat::Zero(p, p);
    A.topLeftCorner(q, q) = Hinv;
    A.bottomLeftCorner(qc, q) = HcE * Hinv;
    A.bottomRightCorner(qc, qc) = -Mat::Identity(qc, qc);
    const Mat SigmaZ = A * K * A.transpose();
    Vec Z(p);
    Z.head(q) = rn * bhatE;
    Z.tail(qc) = rn * (HcE * bhatE - subvector(gram.c, Ec));

    Vec stilde = Vec::Zero(q);
    for (int k = 0; k < q; ++k)
        if (sel.penalized[E[k]]) stilde(k) = sel.signs_E(k);
    const Vec shift_E = sel.lambda * (Hinv * stilde);
    const Vec shift_c = sel.lambda * (HcE * (Hinv * stilde));

    PolyhedralTruncation out;
    out.sigma = std::sqrt(SigmaZ(position, position));
    out.x = Z(position);
    const Vec cvec = SigmaZ.col(position) / (out.sigma * out.sigma);
    const Vec zperp = Z - cvec * out.x;
    out.lower = -kInf;
    out.upper = kInf;
    // a'Z <= b  =>  (a'c) x <= b - a'zperp
    auto add = [&](int idx, double coef, double bound) {
        const double ac = coef * cvec(idx);
        const double rest = bound - coef * zperp(idx);
        if (ac > 0) out.upper = std::min(out.upper, rest / ac);
        else if (ac < 0) out.lower = std::max(out.lower, rest / ac);
    };
    for (int k = 0; k < q; ++k) {
        if (stilde(k) == 0.0) continue;
        add(k, -stilde(k), -stilde(k) * shift_E(k));
    }
    for (int l = 0; l < qc && include_inactive; ++l) {
        add(q + l, 1.0, sel.lambda + shift_c(l));
        add(q + l, -1.0, sel.lambda - shift_c(l));
    }
    if (out.lower > out.upper) out.crossed = true;
    return out;
}

IntervalReport polyhedral_intervals(const StackedDesign& design, const InferenceOptions& opts,
                                    std::uint64_t seed) {
    const GramStats gram = gram_stats(design);
    const double lambda = lambda_for(design, gram, opts, 0.0, seed);
    const SelectionResult sel = plain_lasso(design, gram, lambda, opts.solver);
    IntervalReport rep;
    rep.method = Method::polyhedral;
    rep.E = sel.E;
    rep.alpha = opts.alpha;
    rep.lambda = lambda;
    rep.seed = seed;
    rep.n_inference = design.n();
    const IndexSet targets = inference_targets(sel, opts.infer_unpenalized);
    if (targets.empty()) return rep;

    const Vec bhatE = wcls_refit(gram, sel.E);
    const SandwichMatrices sw = sandwich(design, sel.E, bhatE);
    if (sw.ridge_lifted) rep.warnings.push_back("K_EE ridge lifted");
    const double rn = std::sqrt(static_cast<double>(design.n()));
    const double hi_level = 1.0 - opts.alpha / 2.0;
    const double lo_level = opts.alpha / 2.0;

    for (int col : targets) {
        const int k = position_in(sel.E, col);
        PolyhedralTruncation tr = polyhedral_truncation(gram, sw, sel, bhatE, k, opts.polyhedral_inactive);
        TargetInterval t;
        t.column = col;
        t.estimate = bhatE(k);
        t.sigma = tr.sigma;
        if (tr.crossed) {
            t.fallback = true;
            rep.warnings.push_back("truncation limits crossed for column " + std::to_string(col));
            tr.lower = -kInf;
            tr.upper = kInf;
        }
        const double x = tr.x;
        const double s = tr.sigma;
        auto cdf_at = [&](double mu) { return truncated_normal_cdf(x, mu, s, tr.lower, tr.upper); };
        // Grid range in the sqrt(n) scale; endpoints outside it are reported
        // as unbounded.
        const double mu_lo = x - 100.0 * s;
        const double mu_hi = x + 100.0 * s;
        auto solve = [&](double level, double a, double b, double& pivot) {
            auto f = [&](double mu) { return cdf_at(mu) - level; };
            double fa = f(a), fb = f(b);
            if (fa == 0.0) { pivot = level; return a; }
            if (fb == 0.0) { pivot = level; return b; }
            double best = a, gap = kInf;
            auto g = [&](double mu) {
                const double v = f(mu);
                if (std::abs(v) < gap) { gap = std::abs(v); best = mu; }
                return v;
            };
            auto done = [&](double l, double h) { return gap <= 1e-10 || h - l <= 1e-14 * std::max(1.0, std::abs(h)); };
            std::uintmax_t it = 300;
            boost::math::tools::toms748_solve(g, a, b, fa, fb, done, it);
            pivot = cdf_at(best);
            return best;
        };
        // lower endpoint: cdf = 1 - alpha/2. Roots past the far end of the
        // grid are clamped to it.
        const double at_lo = cdf_at(mu_lo);
        const double at_hi = cdf_at(mu_hi);
        if (at_lo < hi_level) {
            t.lower = -kInf;
            t.pivot_lower = kNaN;
        } else if (at_hi >= hi_level) {
            t.lower = mu_hi / rn;
            t.pivot_lower = at_hi;
        } else {
            t.lower = solve(hi_level, mu_lo, mu_hi, t.pivot_lower) / rn;
        }
        if (at_hi > lo_level) {
            t.upper = kInf;
            t.pivot_upper = kNaN;
        } else if (at_lo <= lo_level) {
            t.upper = mu_lo / rn;
            t.pivot_upper = at_lo;
        } else {
            t.upper = solve(lo_level, mu_lo, mu_hi, t.pivot_upper) / rn;
        }
        t.finite = std::isfinite(t.lower) && std::isfinite(t.upper);
        rep.intervals.push_back(t);
    }
    return rep;
}

IntervalReport splitting_intervals(const StackedDesign& design, const InferenceOptions& opts,
                                   std::uint64_t seed) {
    if (!(opts.select_fraction > 0.0 && opts.select_fraction < 1.0))
        throw ConfigError("select fraction must lie in (0,1)");
    const int n = design.n();
    const int n1 = static_cast<int>(std::lround(opts.select_fraction * n));
    if (n1 < 2 || n - n1 < 2) throw ConfigError("splitting needs at least 2 participants per fold");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, Stream::FoldSplit));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> first(order.begin(), order.begin() + n1);
    std::vector<int> second(order.begin() + n1, order.end());
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    const StackedDesign d1 = design.subset(first);
    const StackedDesign d2 = design.subset(second);

    const GramStats g1 = gram_stats(d1);
    const double lambda = lambda_for(d1, g1, opts, 0.0, seed);
    const SelectionResult sel = plain_lasso(d1, g1, lambda, opts.solver);
    IntervalReport rep = wald_report(Method::splitting, d2, sel.E,
                                     inference_targets(sel, opts.infer_unpenalized), opts.alpha);
    rep.lambda = lambda;
    rep.seed = seed;
    return rep;
}

IntervalReport naive_intervals(const StackedDesign& design, const InferenceOptions& opts,
                               std::uint64_t seed) {
    const GramStats gram = gram_stats(design);
    const double lambda = lambda_for(design, gram, opts, 0.0, seed);
    const SelectionResult sel = plain_lasso(design, gram, lambda, opts.solver);
    IntervalReport rep = wald_report(Method::naive, design, sel.E,
                                     inference_targets(sel, opts.infer_unpenalized), opts.alpha);
    rep.lambda = lambda;
    rep.seed = seed;
    return rep;
}

IntervalReport run_method(Method m, const StackedDesign& design, const InferenceOptions& opts,
                          std::uint64_t seed) {
    switch (m) {
        case Method::si: return si_intervals(design, opts, seed);
        case Method::polyhedral: return polyhedral_intervals(design, opts, seed);
        case Method::splitting: return splitting_intervals(design, opts, seed);
        case Method::naive: return naive_intervals(design, opts, seed);
    }
    throw ConfigError("unknown method");
}

}  // namespace mrtsi
