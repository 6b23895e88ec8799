#include "mrtsi/selective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/tools/toms748_solve.hpp>

#include "mrtsi/gaussian.hpp"
#include "mrtsi/quadrature.hpp"

namespace mrtsi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Mat permute(const Mat& A, const IndexSet& order) { return submatrix(A, order, order); }

IndexSet selected_first(const IndexSet& E, int p) {
    IndexSet order = E;
    const IndexSet Ec = complement(E, p);
    order.insert(order.end(), Ec.begin(), Ec.end());
    return order;
}

Mat inverse_spd(const Mat& A, const char* what) {
    Eigen::LDLT<Mat> ldlt(A);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericError(std::string(what) + " is not positive definite");
    return ldlt.solve(Mat::Identity(A.rows(), A.cols()));
}

}  // namespace

MasterStats master_statistics(const StackedDesign& design, const GramStats& gram,
                              const SandwichMatrices& sandwich, const Vec& bhatE,
                              const IndexSet& E, int target) {
    const auto pos = std::find(E.begin(), E.end(), target);
    if (pos == E.end()) throw ConfigError("inference target is not in the selected set");
    MasterStats st;
    const int p = design.p();
    const int q = static_cast<int>(E.size());
    const int qc = p - q;
    st.E = E;
    st.order = selected_first(E, p);
    st.target = target;
    st.j = static_cast<int>(pos - E.begin());
    st.n = design.n();
    st.bhatE = bhatE;
    st.bhat_j = bhatE(st.j);
    st.H = permute(sandwich.H, st.order);
    st.K = permute(sandwich.K, st.order);

    const Mat HEE = st.H.topLeftCorner(q, q);
    const Mat KEE = st.K.topLeftCorner(q, q);
    const Mat HcE = st.H.bottomLeftCorner(qc, q);
    const Mat KcE = st.K.bottomLeftCorner(qc, q);
    const Mat Hinv = inverse_spd(HEE, "H_EE");
    const Mat KEE_inv = inverse_spd(KEE, "K_EE");
    const Mat SigmaEE = Hinv * KEE * Hinv;
    const int j = st.j;
    st.Sigma_Ej = SigmaEE.col(j);
    const double var = SigmaEE(j, j);
    if (!(var > 0.0)) throw NumericError("sigma^{E.j} is not positive");
    st.sigma = std::sqrt(var);

    // Rows of E other than j.
    IndexSet rest;
    for (int k = 0; k < q; ++k)
        if (k != j) rest.push_back(k);
    auto take_rows = [&](const Mat& A) {
        Mat out(rest.size(), A.cols());
        for (std::size_t r = 0; r < rest.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = A.row(rest[r]);
        return out;
    };

    // ghat: residualized refit coordinates, then the E' score adjustment.
    const Vec resid_coef = bhatE - st.Sigma_Ej * (st.bhat_j / var);
    st.ghat.resize(p - 1);
    for (std::size_t r = 0; r < rest.size(); ++r) st.ghat(static_cast<Eigen::Index>(r)) = resid_coef(rest[r]);
    const Vec cp = subvector(gram.c, st.order);
    const Vec score_c = HcE * bhatE - cp.tail(qc);  // (1/n) sum X_E'^T (X_E b - Y)
    const Mat KKH = KcE * KEE_inv * HEE;
    st.ghat.tail(qc) = score_c - (HcE - KKH) * bhatE;

    // P1, P2.
    Vec ej = Vec::Zero(q);
    ej(j) = 1.0;
    st.P1 = -(st.K.leftCols(q) * (Hinv * ej)) / var;
    st.P2 = Mat::Zero(p, p - 1);
    Mat HEE_rest(q, q - 1);
    for (std::size_t r = 0; r < rest.size(); ++r) HEE_rest.col(static_cast<Eigen::Index>(r)) = HEE.col(rest[r]);
    st.P2.topLeftCorner(q, q - 1) = -HEE_rest;
    st.P2.bottomLeftCorner(qc, q - 1) = -KcE * KEE_inv * HEE_rest;
    st.P2.bottomRightCorner(qc, qc) = Mat::Identity(qc, qc);

    // M1, M2 and the nuisance covariance.
    const Mat Kroot = sym_sqrt(st.K);
    RowVec m1 = RowVec::Zero(p);
    m1.head(q) = -Hinv.row(j);
    st.M1 = m1 * Kroot;
    Mat M2raw = Mat::Zero(p - 1, p);
    const Mat first = st.Sigma_Ej * Hinv.row(j) / var - Hinv;
    M2raw.topLeftCorner(q - 1, q) = take_rows(first);
    M2raw.bottomLeftCorner(qc, q) = -KcE * KEE_inv;
    M2raw.bottomRightCorner(qc, qc) = Mat::Identity(qc, qc);
    st.M2 = M2raw * Kroot;
    st.Sigma_big = st.M2 * st.M2.transpose();
    return st;
}

ConditioningGeometry truncation(const SelectionResult& selection, const MasterStats& stats,
                                const Mat& Omega) {
    const int p = stats.p();
    const int q = stats.q();
    const double rn = std::sqrt(static_cast<double>(stats.n));
    ConditioningGeometry g;
    g.signs.resize(q);
    g.constrained.resize(q);
    g.opt.resize(q);
    for (int k = 0; k < q; ++k) {
        const int col = stats.E[k];
        const bool pen = selection.penalized[col];
        g.constrained[k] = pen;
        g.signs(k) = pen ? (selection.beta(col) > 0 ? 1.0 : -1.0) : 1.0;
        g.opt(k) = rn * g.signs(k) * selection.beta(col);
    }
    g.B = stats.H.leftCols(q) * g.signs.asDiagonal();
    const Mat Op = permute(Omega, stats.order);
    const Mat Oinv = inverse_spd(Op, "Omega");
    g.Lambda = inverse_spd(g.B.transpose() * Oinv * g.B, "B' Omega^{-1} B");
    g.eta = g.B.transpose() * (Oinv * stats.P1);
    const double denom = g.eta.dot(g.Lambda * g.eta);
    if (!(denom > 0.0) || !std::isfinite(denom))
        throw NumericError("degenerate conditioning direction: Q vanishes");
    g.Qvec = g.Lambda * g.eta / denom;
    if (g.Qvec.cwiseAbs().maxCoeff() == 0.0) throw NumericError("degenerate conditioning direction: Q vanishes");
    g.U = g.eta.dot(g.opt);
    g.V = g.opt - g.Qvec * g.U;

    g.I_minus = -kInf;
    g.I_plus = kInf;
    for (int k = 0; k < q; ++k) {
        if (!g.constrained[k]) continue;
        const double Qk = g.Qvec(k);
        if (Qk > 0) g.I_minus = std::max(g.I_minus, -g.V(k) / Qk);
        else if (Qk < 0) g.I_plus = std::min(g.I_plus, -g.V(k) / Qk);
    }

    g.lambda_S = selection.lambda * subvector(selection.subgradient, stats.order);
    g.omega = subvector(selection.omega, stats.order);
    g.Lvec = g.B * g.Qvec;
    g.Tvec = g.B * g.V + g.lambda_S;
    (void)p;
    return g;
}

Vec kkt_reconstruction(const MasterStats& stats, const ConditioningGeometry& geo) {
    return stats.P1 * stats.x_obs() + stats.P2 * stats.y_obs() + geo.B * geo.opt + geo.lambda_S;
}

Vec cov_map(const MasterStats& stats, const ConditioningGeometry& geo, double u, const Vec& v,
            double x, const Vec& y) {
    return geo.Lvec * u + geo.B * v + geo.lambda_S + stats.P1 * x + stats.P2 * y;
}

GeometryDiagnostics diagnose(const MasterStats& stats, const ConditioningGeometry& geo) {
    GeometryDiagnostics d;
    d.decomposition_error = (geo.opt - (geo.V + geo.Qvec * geo.U)).cwiseAbs().maxCoeff();
    d.inside_truncation = geo.I_minus <= geo.U && geo.U <= geo.I_plus;
    d.kkt_error = (kkt_reconstruction(stats, geo) - geo.omega).cwiseAbs().maxCoeff();
    d.omega_norm = geo.omega.size() ? geo.omega.cwiseAbs().maxCoeff() : 0.0;
    return d;
}

// ---------------------------------------------------------------------------
// Pivot

PivotContext::PivotContext(Mat Omega, Vec L, Vec P1, Mat P2, Vec T, double I_minus,
                           double I_plus, double sigma, int n, double x_obs, Vec y_obs)
    : Omega_(std::move(Omega)),
      L_(std::move(L)),
      P1_(std::move(P1)),
      T_(std::move(T)),
      P2_(std::move(P2)),
      I_minus_(I_minus),
      I_plus_(I_plus),
      sigma_(sigma),
      n_(n),
      x_obs_(x_obs),
      y_obs_(std::move(y_obs)) {
    if (!(I_minus_ <= I_plus_)) throw NumericError("truncation interval is empty");
    if (!(sigma_ > 0.0)) throw NumericError("pivot requires a positive standard error");
    Eigen::LDLT<Mat> ldlt(Omega_);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericError("Omega is not positive definite");
    Omega_inv_ = ldlt.solve(Mat::Identity(Omega_.rows(), Omega_.cols()));
    log_det_Omega_ = ldlt.vectorD().array().log().sum();
    const Vec OiL = Omega_inv_ * L_;
    const double s2 = L_.dot(OiL);
    if (!(s2 > 0.0)) throw NumericError("L' Omega^{-1} L must be positive");
    s_ = std::sqrt(s2);
    Theta_ = Omega_inv_ - OiL * OiL.transpose() / s2;

    const Vec w0 = P2_ * y_obs_ + T_;
    quad_a_ = P1_.dot(Theta_ * P1_);
    quad_b_ = P1_.dot(Theta_ * w0);
    ell0_ = OiL.dot(w0) / s2;
    ell1_ = OiL.dot(P1_) / s2;
}

PivotContext PivotContext::from(const MasterStats& stats, const ConditioningGeometry& geo,
                                const Mat& Omega) {
    return PivotContext(permute(Omega, stats.order), geo.Lvec, stats.P1, stats.P2, geo.Tvec,
                        geo.I_minus, geo.I_plus, stats.sigma, stats.n, stats.x_obs(), stats.y_obs());
}

double PivotContext::log_adjustment_F(double x, const Vec& y) const {
    const Vec w = P1_ * x + P2_ * y + T_;
    const double p = static_cast<double>(w.size());
    const double ell = L_.dot(Omega_inv_ * w) / (s_ * s_);
    const double quad = w.dot(Theta_ * w);
    return -0.5 * (p - 1.0) * std::log(2.0 * std::numbers::pi) - 0.5 * log_det_Omega_ -
           std::log(s_) - 0.5 * quad +
           gaussian::log_cdf_diff(s_ * (I_minus_ + ell), s_ * (I_plus_ + ell));
}

double PivotContext::log_integrand(double x, double mu) const {
    const double z = (x - mu) / sigma_;
    const double ell = ell0_ + ell1_ * x;
    return -0.5 * z * z - 0.5 * (quad_a_ * x * x + 2.0 * quad_b_ * x) +
           gaussian::log_cdf_diff(s_ * (I_minus_ + ell), s_ * (I_plus_ + ell));
}

double PivotContext::dlog_integrand(double x, double mu) const {
    double d = -(x - mu) / (sigma_ * sigma_) - (quad_a_ * x + quad_b_);
    if (ell1_ == 0.0) return d;
    const double ell = ell0_ + ell1_ * x;
    const double lo = s_ * (I_minus_ + ell);
    const double hi = s_ * (I_plus_ + ell);
    const double ldiff = gaussian::log_cdf_diff(lo, hi);
    const double phi_hi = std::isfinite(hi) ? std::exp(gaussian::log_pdf(hi) - ldiff) : 0.0;
    const double phi_lo = std::isfinite(lo) ? std::exp(gaussian::log_pdf(lo) - ldiff) : 0.0;
    return d + s_ * ell1_ * (phi_hi - phi_lo);
}

double PivotContext::log_mass(double a, double b, double mu, int order, double peak) const {
    if (!(b > a)) return -kInf;
    const GaussLegendre& rule = GaussLegendre::get(order);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    // `peak` bounds the log integrand, so the scaled terms cannot overflow.
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        sum += rule.weights[i] * std::exp(log_integrand(mid + half * rule.nodes[i], mu) - peak);
    return sum > 0.0 ? peak + std::log(sum * half) : -kInf;
}

double PivotContext::pivot(double beta, int order) const {
    const double mu = std::sqrt(static_cast<double>(n_)) * beta;
    // The integrand is log-concave with curvature at least
    // 1/sigma^2 + a, so its mass sits around the mode within a few widths.
    const double prec = 1.0 / (sigma_ * sigma_) + quad_a_;
    const double width = 1.0 / std::sqrt(prec);
    const double m = (mu / (sigma_ * sigma_) - quad_b_) / prec;

    double lo = m, hi = m;
    if (dlog_integrand(m, mu) > 0.0) {
        double step = width;
        hi = m + step;
        int guard = 0;
        while (dlog_integrand(hi, mu) > 0.0 && guard++ < 200) {
            lo = hi;
            step *= 2.0;
            hi = m + step;
        }
    } else {
        double step = width;
        lo = m - step;
        int guard = 0;
        while (dlog_integrand(lo, mu) < 0.0 && guard++ < 200) {
            hi = lo;
            step *= 2.0;
            lo = m - step;
        }
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * width; ++it) {
        const double mid = 0.5 * (lo + hi);
        (dlog_integrand(mid, mu) > 0.0 ? lo : hi) = mid;
    }
    const double mode = 0.5 * (lo + hi);
    const double peak = log_integrand(mode, mu);
    if (!std::isfinite(peak))
        throw NumericError("pivot integrand vanishes at its mode (beta = " + std::to_string(beta) + ")");

    // Local width from the curvature at the mode, then widen each side until
    // the integrand has dropped by e^-50.
    const double h = 1e-4 * width;
    const double curv = std::max(prec, -(dlog_integrand(mode + h, mu) - dlog_integrand(mode - h, mu)) / (2 * h));
    const double local = 1.0 / std::sqrt(curv);
    double left = mode - 12.0 * local;
    double right = mode + 12.0 * local;
    for (int k = 0; k < 60 && log_integrand(left, mu) > peak - 50.0; ++k) left = mode - 2.0 * (mode - left);
    for (int k = 0; k < 60 && log_integrand(right, mu) > peak - 50.0; ++k) right = mode + 2.0 * (right - mode);

    if (x_obs_ <= left) return 0.0;
    if (x_obs_ >= right) return 1.0;
    const double below = log_mass(left, x_obs_, mu, order, peak);
    const double above = log_mass(x_obs_, right, mu, order, peak);
    if (!std::isfinite(below) && !std::isfinite(above))
        throw NumericError("pivot denominator underflow at beta = " + std::to_string(beta));
    if (below == -kInf) return 0.0;
    if (above == -kInf) return 1.0;
    return 1.0 / (1.0 + std::exp(above - below));
}

// ---------------------------------------------------------------------------
// Interval inversion

namespace {

struct Endpoint {
    double beta;
    double value;
};

// Solves pivot(beta) = level for a non-increasing pivot: doubling to a
// bracket, then TOMS 748 inside it until the pivot equation holds.
Endpoint solve_level(const PivotContext& ctx, double level, const PivotOptions& opts, int& evals) {
    const double center = ctx.estimate();
    const double scale = ctx.sigma() / std::sqrt(static_cast<double>(ctx.n()));
    Endpoint best{center, std::numeric_limits<double>::quiet_NaN()};
    double best_gap = kInf;
    auto f = [&](double b) {
        ++evals;
        const double v = ctx.pivot(b, opts.quadrature_order);
        if (std::abs(v - level) < best_gap) {
            best_gap = std::abs(v - level);
            best = {b, v};
        }
        return v - level;
    };
    double a = center;
    double fa = f(center);
    if (std::abs(fa) <= opts.tolerance) return best;
    const double dir = fa > 0 ? 1.0 : -1.0;  // pivot decreases in beta
    double step = 2.0 * scale;
    double b = center + dir * step;
    double fb = f(b);
    int doublings = 0;
    while (fb != 0.0 && (fb > 0) == (fa > 0)) {
        if (++doublings > opts.max_doublings)
            throw NumericError("could not bracket the interval endpoint for level " + std::to_string(level));
        a = b;
        fa = fb;
        step *= 2.0;
        b = center + dir * step;
        fb = f(b);
    }
    if (std::abs(fb) <= opts.tolerance) return best;
    if (a > b) {
        std::swap(a, b);
        std::swap(fa, fb);
    }
    auto done = [&](double lo, double hi) {
        return best_gap <= opts.tolerance || hi - lo <= 4 * std::numeric_limits<double>::epsilon() * std::abs(hi);
    };
    std::uintmax_t iters = 200;
    boost::math::tools::toms748_solve(f, a, b, fa, fb, done, iters);
    return best;
}

}  // namespace

SelectiveInterval invert_interval(const PivotContext& ctx, const PivotOptions& opts) {
    if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    SelectiveInterval out;
    out.estimate = ctx.estimate();
    out.sigma = ctx.sigma();
    const Endpoint lo = solve_level(ctx, 1.0 - opts.alpha / 2.0, opts, out.evaluations);
    const Endpoint hi = solve_level(ctx, opts.alpha / 2.0, opts, out.evaluations);
    out.lower = lo.beta;
    out.upper = hi.beta;
    out.pivot_lower = lo.value;
    out.pivot_upper = hi.value;
    if (!(out.lower < out.upper)) throw NumericError("inverted interval is empty");

    if (opts.audit) {
        out.audited = true;
        const double pad = 0.5 * (out.upper - out.lower);
        const double a = out.lower - pad;
        const double b = out.upper + pad;
        double prev = kInf;
        for (int k = 0; k < opts.audit_points; ++k) {
            const double beta = a + (b - a) * k / (opts.audit_points - 1);
            const double v = ctx.pivot(beta, opts.quadrature_order);
            ++out.evaluations;
            if (v > prev) out.max_audit_increase = std::max(out.max_audit_increase, v - prev);
            prev = v;
        }
        out.monotone = out.max_audit_increase <= 1e-10;
    }
    return out;
}

}  // namespace mrtsi
