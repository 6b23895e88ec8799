#include <set>

#include "doctest.h"
#include "mrtsi/estimation.hpp"
#include "mrtsi/synth.hpp"
#include "support.hpp"

using namespace mrtsi;

namespace {

MrtDataset sim(int n, std::uint64_t seed, int p = 4) {
    SimConfig c;
    c.n = n;
    c.T = 10;
    c.p = p;
    c.active_size = 2;
    c.seed = seed;
    return generate(c).first;
}

}  // namespace

TEST_CASE("nuisance split sizes and disjointness") {
    const MrtDataset data = sim(120, 1);
    const NuisanceSplit split = fit_nuisance(data, 1.0 / 3.0, 42);
    CHECK(split.nuisance_positions.size() == 40);
    CHECK(split.analysis_positions.size() == 80);
    CHECK(split.analysis.n() == 80);
    std::set<std::string> fit(split.model.fit_ids().begin(), split.model.fit_ids().end());
    CHECK(fit.size() == 40);
    for (const auto& person : split.analysis.participants()) CHECK(fit.count(person.id) == 0);
    CHECK_THROWS_AS(fit_nuisance(data, 1.0, 1), ConfigError);
    CHECK_THROWS_AS(fit_nuisance(sim(3, 2), 0.5, 1), ConfigError);
}

TEST_CASE("nuisance fit interpolates an exactly linear response") {
    MrtDataset data = sim(30, 2);
    const int d = history_feature_dim(data);
    Vec coef(d);
    for (int k = 0; k < d; ++k) coef(k) = 0.1 * (k + 1);
    coef(d - 1) = 0.0;  // Y_{t-1} coefficient would make the truth recursive
    std::vector<Participant> people = data.participants();
    for (auto& person : people)
        for (std::size_t t = 0; t < person.records.size(); ++t)
            person.records[t].response = history_features(person, t).dot(coef);
    const MrtDataset exact(people, data.moderator_names());
    const NuisanceModel m = fit_nuisance_ols(exact);
    double worst = 0.0;
    for (const auto& person : exact.participants())
        for (std::size_t t = 0; t < person.records.size(); ++t)
            worst = std::max(worst, std::abs(m.predict(person, t) - person.records[t].response));
    CHECK(worst < 1e-10);
}

TEST_CASE("intercept-only nuisance predicts the mean") {
    Rng rng(3);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<Participant> people;
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < 5; ++i) {
        Participant person{"p" + std::to_string(i), {}};
        Record r;
        r.covariates = Vec();
        r.history = Vec();
        r.response = z(rng);
        sum += r.response;
        ++count;
        person.records.push_back(r);
        people.push_back(person);
    }
    // One record each: the lag features are constant zero, the design is
    // the intercept plus two zero columns; the minimum-norm fit is the mean.
    const MrtDataset data(people, {});
    const NuisanceModel m = fit_nuisance_ols(data);
    CHECK(m.rank_deficient());
    CHECK(m.predict(data.participant(0), 0) == doctest::Approx(sum / count).epsilon(1e-12));
}

TEST_CASE("refit on an orthonormal design is X'Y") {
    Rng rng(4);
    const Mat G = testing::gaussian_matrix(60, 5, rng);
    Eigen::HouseholderQR<Mat> qr(G);
    StackedDesign d = testing::random_design(60, 1, 5, 5);
    d.X = qr.householderQ() * Mat::Identity(60, 5);
    // H = X'X / n, c = X'Y / n so the refit is X'Y.
    const Vec b = wcls_refit(d, {0, 1, 2, 3, 4});
    CHECK(testing::max_abs(b - d.X.transpose() * d.Y) < 1e-12);
}

TEST_CASE("noiseless recovery and the QR oracle") {
    Vec beta(3);
    beta << 1.5, -0.7, 0.2;
    StackedDesign d = testing::random_design(20, 2, 3, 6, beta, 0.0);
    CHECK(testing::max_abs(wcls_refit(d, {0, 1, 2}) - beta) < 1e-10);

    const StackedDesign noisy = testing::random_design(40, 1, 5, 7, Vec::Ones(5), 1.0);
    const IndexSet E{0, 2, 4};
    Mat XE(40, 3);
    for (int k = 0; k < 3; ++k) XE.col(k) = noisy.X.col(E[k]);
    const Vec oracle = XE.colPivHouseholderQr().solve(noisy.Y);
    CHECK(testing::max_abs(wcls_refit(noisy, E) - oracle) < 1e-10);
    // Normal equations.
    const Vec b = wcls_refit(noisy, E);
    CHECK(testing::max_abs(XE.transpose() * (noisy.Y - XE * b)) < 1e-8 * (1.0 + noisy.Y.norm()));
}

TEST_CASE("singular Gram matrix names the dependent columns") {
    StackedDesign d = testing::random_design(30, 1, 4, 8);
    d.X.col(3) = 2.0 * d.X.col(1);
    try {
        wcls_refit(d, {0, 1, 3});
        FAIL("expected singular matrix error");
    } catch (const SingularMatrixError& e) {
        REQUIRE(e.columns().size() == 1);
        CHECK((e.columns()[0] == 1 || e.columns()[0] == 3));
        CHECK(std::string(e.what()).find("dependent columns") != std::string::npos);
    }
}

TEST_CASE("single-time sandwich is the heteroskedastic meat") {
    const StackedDesign d = testing::random_design(50, 1, 3, 9, Vec::Ones(3));
    const IndexSet E{0, 1, 2};
    const Vec b = wcls_refit(d, E);
    const SandwichMatrices sw = sandwich(d, E, b);
    const Vec r = d.Y - d.X * b;
    Mat meat = Mat::Zero(3, 3);
    Vec mean = Vec::Zero(3);
    for (int i = 0; i < 50; ++i) mean += d.X.row(i).transpose() * r(i);
    mean /= 50.0;  // zero up to rounding at the refit
    for (int i = 0; i < 50; ++i) {
        const Vec s = d.X.row(i).transpose() * r(i) - mean;
        meat += s * s.transpose();
    }
    meat /= 50.0;
    CHECK(mean.norm() < 1e-12);
    CHECK(testing::max_abs(sw.K - meat) < 1e-12);
    const Mat Hinv = sw.H.inverse();
    CHECK(testing::max_abs(sw.SigmaEE - Hinv * meat * Hinv) < 1e-10);
}

TEST_CASE("score aggregates within participant before the outer product") {
    const StackedDesign d = testing::random_design(25, 4, 3, 10);
    const IndexSet E{0, 1};
    const Vec b = wcls_refit(d, E);
    const SandwichMatrices sw = sandwich(d, E, b);
    Vec beta = Vec::Zero(3);
    beta.head(2) = b;
    Mat S(25, 3);
    for (int i = 0; i < 25; ++i) {
        Vec s = Vec::Zero(3);
        for (int t = 0; t < 4; ++t) {
            const int row = 4 * i + t;
            s += d.X.row(row).transpose() * (d.X.row(row).dot(beta) - d.Y(row));
        }
        S.row(i) = s.transpose();
    }
    const RowVec m = S.colwise().mean();
    const Mat K = (S.rowwise() - m).transpose() * (S.rowwise() - m) / 25.0;
    CHECK(testing::max_abs(sw.K - K) < 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat> es(sw.K);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * sw.K.trace());
    CHECK(testing::max_abs(sw.H - sw.H.transpose()) == 0.0);
}

TEST_CASE("homoskedastic sandwich matches the model-based variance") {
    const StackedDesign d = testing::random_design(2000, 1, 3, 11, Vec::Ones(3), 1.3);
    const IndexSet E{0, 1, 2};
    const Vec b = wcls_refit(d, E);
    const SandwichMatrices sw = sandwich(d, E, b);
    const double s2 = (d.Y - d.X * b).squaredNorm() / 2000.0;
    const Mat model = s2 * sw.H.inverse();
    for (int k = 0; k < 3; ++k) CHECK(sw.SigmaEE(k, k) == doctest::Approx(model(k, k)).epsilon(0.10));
}

TEST_CASE("duplicating participants leaves H and K unchanged") {
    const StackedDesign d = testing::random_design(30, 3, 3, 12);
    std::vector<int> twice;
    for (int i = 0; i < 30; ++i) {
        twice.push_back(i);
        twice.push_back(i);
    }
    const StackedDesign dd = d.subset(twice);
    const IndexSet E{0, 2};
    const Vec b = wcls_refit(d, E);
    const SandwichMatrices a = sandwich(d, E, b);
    const SandwichMatrices c = sandwich(dd, E, wcls_refit(dd, E));
    CHECK(testing::max_abs(a.H - c.H) < 1e-12);
    CHECK(testing::max_abs(a.K - c.K) < 1e-12);
}

TEST_CASE("quadratic-loss H does not depend on the coefficients") {
    const StackedDesign d = testing::random_design(30, 3, 4, 13);
    const IndexSet E{1, 3};
    const SandwichMatrices a = sandwich(d, E, wcls_refit(d, E));
    const SandwichMatrices b = sandwich(d, E, Vec::Constant(2, 5.0));
    CHECK(testing::max_abs(a.H - b.H) == 0.0);
}

TEST_CASE("refit is invariant to participant order") {
    const StackedDesign d = testing::random_design(40, 3, 4, 14, Vec::Ones(4));
    std::vector<int> perm(40);
    for (int i = 0; i < 40; ++i) perm[i] = (i * 17) % 40;
    const IndexSet E{0, 1, 3};
    CHECK(testing::max_abs(wcls_refit(d, E) - wcls_refit(d.subset(perm), E)) < 1e-8);
}

TEST_CASE("symmetric square root") {
    Rng rng(15);
    const Mat G = testing::gaussian_matrix(5, 5, rng);
    const Mat A = G * G.transpose();
    const Mat R = sym_sqrt(A);
    CHECK(testing::max_abs(R * R - A) < 1e-10);
    CHECK(testing::max_abs(R - R.transpose()) < 1e-12);
}
