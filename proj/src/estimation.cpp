#include "mrtsi/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mrtsi/random.hpp"

namespace mrtsi {

Vec history_features(const Participant& person, std::size_t t_index) {
    const Record& r = person.records.at(t_index);
    const Eigen::Index p = r.covariates.size();
    const Eigen::Index h = r.history.size();
    Vec g(1 + p + 2 + h);
    g(0) = 1.0;
    g.segment(1, p) = r.covariates;
    if (t_index > 0) {
        const Record& prev = person.records[t_index - 1];
        g(1 + p) = prev.action;
        g(2 + p) = prev.response;
    } else {
        g(1 + p) = 0.0;
        g(2 + p) = 0.0;
    }
    g.tail(h) = r.history;
    return g;
}

int history_feature_dim(const MrtDataset& data) {
    return 3 + data.num_moderators() + data.num_history();
}

NuisanceModel::NuisanceModel(Vec coefficients, std::vector<std::string> fit_ids,
                             bool rank_deficient)
    : coef_(std::move(coefficients)), fit_ids_(std::move(fit_ids)), rank_deficient_(rank_deficient) {}

double NuisanceModel::predict(const Participant& person, std::size_t t_index) const {
    if (coef_.size() == 0) return 0.0;
    return history_features(person, t_index).dot(coef_);
}

std::string NuisanceModel::description() const {
    std::ostringstream os;
    os << "OLS on [1, S_t, A_{t-1}, Y_{t-1}, history] fitted on " << fit_ids_.size()
       << " participants" << (rank_deficient_ ? " (rank deficient, minimum-norm fit)" : "");
    return os.str();
}

NuisanceModel fit_nuisance_ols(const MrtDataset& data) {
    const int d = history_feature_dim(data);
    const auto rows = static_cast<Eigen::Index>(data.num_rows());
    Mat G(rows, d);
    Vec y(rows);
    Eigen::Index r = 0;
    std::vector<std::string> ids;
    for (const auto& person : data.participants()) {
        ids.push_back(person.id);
        for (std::size_t t = 0; t < person.records.size(); ++t, ++r) {
            G.row(r) = history_features(person, t).transpose();
            y(r) = person.records[t].response;
        }
    }
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(G);
    cod.setThreshold(1e-10);
    const bool deficient = cod.rank() < d;
    return NuisanceModel(cod.solve(y), std::move(ids), deficient);
}

NuisanceSplit fit_nuisance(const MrtDataset& data, double split_fraction, std::uint64_t seed) {
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        throw ConfigError("nuisance split fraction must lie in (0,1)");
    const int n = data.n();
    const int n_fit = static_cast<int>(std::lround(split_fraction * n));
    if (n_fit < 2 || n - n_fit < 2)
        throw ConfigError("nuisance split needs at least 2 participants per part");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    NuisanceSplit out;
    out.nuisance_positions.assign(order.begin(), order.begin() + n_fit);
    out.analysis_positions.assign(order.begin() + n_fit, order.end());
    std::sort(out.nuisance_positions.begin(), out.nuisance_positions.end());
    std::sort(out.analysis_positions.begin(), out.analysis_positions.end());
    out.model = fit_nuisance_ols(data.subset(out.nuisance_positions));
    out.analysis = data.subset(out.analysis_positions);
    return out;
}

GramStats gram_stats(const StackedDesign& design) {
    GramStats g;
    g.n = design.n();
    g.H = (design.X.transpose() * design.X) / g.n;
    g.c = (design.X.transpose() * design.Y) / g.n;
    return g;
}

namespace {

void check_nonsingular(const Mat& HEE, const IndexSet& E) {
    Eigen::ColPivHouseholderQR<Mat> qr(HEE);
    qr.setThreshold(1e-10);
    if (qr.rank() == HEE.cols()) return;
    IndexSet offending;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < HEE.cols(); ++k) offending.push_back(E[perm(k)]);
    std::sort(offending.begin(), offending.end());
    throw SingularMatrixError("singular Gram matrix; dependent columns " + format_index_set(offending),
                              offending);
}

}  // namespace

Vec wcls_refit(const GramStats& gram, const IndexSet& E) {
    if (E.empty()) return Vec();
    const Mat HEE = submatrix(gram.H, E, E);
    check_nonsingular(HEE, E);
    return HEE.ldlt().solve(subvector(gram.c, E));
}

Vec wcls_refit(const StackedDesign& design, const IndexSet& E) {
    return wcls_refit(gram_stats(design), E);
}

Mat score_covariance(const StackedDesign& design, const Vec& beta) {
    const int n = design.n();
    const int p = design.p();
    Mat S(n, p);
    const Vec resid = design.X * beta - design.Y;
    for (int i = 0; i < n; ++i)
        S.row(i) = (design.Xi(i).transpose() * resid.segment(design.offsets[i], design.rows(i))).transpose();
    const RowVec mean = S.colwise().mean();
    S.rowwise() -= mean;
    return (S.transpose() * S) / n;
}

SandwichMatrices sandwich(const StackedDesign& design, const IndexSet& E, const Vec& bhatE) {
    SandwichMatrices out;
    const int p = design.p();
    const int q = static_cast<int>(E.size());
    out.E = E;
    out.H = (design.X.transpose() * design.X) / design.n();
    Vec beta = Vec::Zero(p);
    for (int k = 0; k < q; ++k) beta(E[k]) = bhatE(k);
    out.K = score_covariance(design, beta);
    out.K = 0.5 * (out.K + out.K.transpose());

    if (q > 0) {
        Mat KEE = submatrix(out.K, E, E);
        Eigen::SelfAdjointEigenSolver<Mat> es(KEE, Eigen::EigenvaluesOnly);
        const double tr = KEE.trace();
        if (es.eigenvalues().minCoeff() <= 1e-12 * std::max(tr, 1e-300)) {
            const double eps = 1e-8 * tr / q;
            for (int k : E) out.K(k, k) += eps;
            out.ridge_lifted = true;
        }
        const Mat HEE = submatrix(out.H, E, E);
        check_nonsingular(HEE, E);
        const Mat Hinv = HEE.ldlt().solve(Mat::Identity(q, q));
        out.SigmaEE = Hinv * submatrix(out.K, E, E) * Hinv;
        out.SigmaEE = 0.5 * (out.SigmaEE + out.SigmaEE.transpose());
        out.sigma = out.SigmaEE.diagonal().cwiseMax(0.0).cwiseSqrt();
    }
    return out;
}

Mat sym_sqrt(const Mat& A) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()));
    const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace mrtsi
