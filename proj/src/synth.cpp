#include "mrtsi/synth.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "mrtsi/random.hpp"

namespace mrtsi {

std::string regime_name(ErrorRegime r) {
    switch (r) {
        case ErrorRegime::gaussian: return "gaussian";
        case ErrorRegime::laplace: return "laplace";
        case ErrorRegime::exponential: return "exponential";
    }
    return "?";
}

ErrorRegime parse_regime(const std::string& name) {
    if (name == "gaussian") return ErrorRegime::gaussian;
    if (name == "laplace" || name == "gaussian+laplace") return ErrorRegime::laplace;
    if (name == "exponential" || name == "gaussian+exponential") return ErrorRegime::exponential;
    throw ConfigError("unknown error regime '" + name + "'");
}

SimConfig SimConfig::resolved() const {
    SimConfig c = *this;
    if (c.n < 1 || c.T < 1 || c.p < 1) throw ConfigError("n, T and p must be positive");
    if (c.active_size < 0 || c.active_size > c.p) throw ConfigError("active_size must lie in [0, p]");
    if (!(std::abs(c.rho) < 1.0)) throw ConfigError("|rho| must be < 1");
    if (!(c.c >= 0.0)) throw ConfigError("signal c must be nonnegative");
    if (!(c.sigma_e > 0.0)) throw ConfigError("sigma_e must be positive");
    if (!(c.prob_min > 0.0 && c.prob_min <= c.prob_max && c.prob_max < 1.0))
        throw ConfigError("action probability clip must lie inside (0,1)");
    if (c.theta1.size() == 0) c.theta1 = Vec::Constant(c.p, 0.8);
    if (c.Gamma0.size() == 0) c.Gamma0 = 0.3 * Mat::Identity(c.p, c.p);
    if (c.Gamma1.size() == 0) c.Gamma1 = Vec::Zero(c.p);
    if (c.theta1.size() != c.p || c.Gamma1.size() != c.p || c.Gamma0.rows() != c.p || c.Gamma0.cols() != c.p)
        throw ConfigError("theta1, Gamma0, Gamma1 must match p");
    if (c.p < 2 && (c.action_s2 != 0.0)) throw ConfigError("action model uses S_2 but p < 2");
    Eigen::EigenSolver<Mat> es(c.Gamma0, false);
    const double radius = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(radius < 1.0)) throw ConfigError("Gamma0 is not stable (spectral radius " + std::to_string(radius) + ")");
    return c;
}

std::string SimConfig::fingerprint() const {
    const SimConfig c = resolved();
    std::ostringstream os;
    os.precision(17);
    os << "T=" << c.T << ";p=" << c.p << ";k=" << c.active_size << ";c=" << c.c << ";th2=" << c.theta2
       << ";se=" << c.sigma_e << ";a1=" << c.action_s1 << ";a2=" << c.action_s2 << ";clip=" << c.prob_min
       << "," << c.prob_max << ";off=" << c.effect_offset << ";burn=" << c.burn_in << ";th1=";
    for (Eigen::Index k = 0; k < c.theta1.size(); ++k) os << c.theta1(k) << ",";
    os << ";G0=";
    for (Eigen::Index k = 0; k < c.Gamma0.size(); ++k) os << c.Gamma0.data()[k] << ",";
    os << ";G1=";
    for (Eigen::Index k = 0; k < c.Gamma1.size(); ++k) os << c.Gamma1(k) << ",";
    return os.str();
}

GroundTruth ground_truth(const SimConfig& config) {
    GroundTruth g;
    g.beta_star = Vec::Zero(config.p);
    for (int k = 0; k < config.active_size; ++k) {
        g.beta_star(k) = config.c / 5.0;
        g.active_set.push_back(k);
    }
    return g;
}

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double action_probability(const SimConfig& c, const Vec& s) {
    double z = c.action_s1 * s(0);
    if (s.size() > 1) z += c.action_s2 * s(1);
    return std::clamp(logistic(z), c.prob_min, c.prob_max);
}

double additive_noise(ErrorRegime regime, double scale, Rng& rng) {
    switch (regime) {
        case ErrorRegime::gaussian: return 0.0;
        case ErrorRegime::laplace: {
            std::uniform_real_distribution<double> u(-0.5, 0.5);
            const double v = u(rng);
            const double sgn = v < 0 ? -1.0 : 1.0;
            return -scale * sgn * std::log1p(-2.0 * std::abs(v));
        }
        case ErrorRegime::exponential: {
            std::exponential_distribution<double> e(1.0 / scale);
            return e(rng);
        }
    }
    return 0.0;
}

// Moderator chain of one participant: innovations, states, actions and
// probabilities, starting after the burn-in.
struct Chain {
    Mat e;      // T x p innovations
    Mat S;      // T x p states
    std::vector<int> A;
    std::vector<double> prob;
};

Chain run_chain(const SimConfig& c, Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Chain ch;
    ch.e.resize(c.T, c.p);
    ch.S.resize(c.T, c.p);
    ch.A.resize(c.T);
    ch.prob.resize(c.T);
    const bool diagonal = c.Gamma0.isDiagonal(0.0);
    const Vec g0 = c.Gamma0.diagonal();
    Vec s = Vec::Zero(c.p);
    Vec e(c.p);
    int a_prev = 0;
    int start = -c.burn_in;
    // Diagonal VAR without action feedback: start in the stationary law.
    if (diagonal && c.Gamma1.isZero(0.0)) {
        for (int k = 0; k < c.p; ++k) s(k) = c.sigma_e / std::sqrt(1.0 - g0(k) * g0(k)) * z(rng);
        start = 0;
    }
    for (int t = start; t < c.T; ++t) {
        for (int k = 0; k < c.p; ++k) e(k) = c.sigma_e * z(rng);
        if (diagonal) s = g0.cwiseProduct(s) + a_prev * c.Gamma1 + e;
        else s = c.Gamma0 * s + a_prev * c.Gamma1 + e;
        const double pr = action_probability(c, s);
        const int a = u(rng) < pr ? 1 : 0;
        if (t >= 0) {
            ch.e.row(t) = e.transpose();
            ch.S.row(t) = s.transpose();
            ch.A[t] = a;
            ch.prob[t] = pr;
        }
        a_prev = a;
    }
    return ch;
}

}  // namespace

Vec error_process(int T, double rho, ErrorRegime regime, std::uint64_t seed, double additive_scale) {
    if (!(std::abs(rho) < 1.0)) throw ConfigError("|rho| must be < 1");
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Vec eps(T);
    double prev = 0.0;
    for (int t = 0; t < T; ++t) {
        const double g = t == 0 ? z(rng) / std::sqrt(1.0 - rho * rho) : rho * prev + z(rng);
        prev = g;
        eps(t) = g + additive_noise(regime, additive_scale, rng);
    }
    return eps;
}

std::pair<MrtDataset, GroundTruth> generate(const SimConfig& config) {
    const SimConfig c = config.resolved();
    const GroundTruth truth = ground_truth(c);
    const Vec beta_active = truth.beta_star.head(c.active_size);
    std::vector<Participant> people;
    people.reserve(c.n);
    for (int i = 0; i < c.n; ++i) {
        Rng rng(derive_seed(c.seed, Stream::Data, static_cast<std::uint64_t>(i)));
        const Chain ch = run_chain(c, rng);
        const Vec eps = error_process(c.T, c.rho, c.regime, rng(), c.additive_scale);
        Participant person;
        person.id = "p" + std::to_string(i + 1);
        person.records.resize(c.T);
        for (int t = 0; t < c.T; ++t) {
            const Vec e = ch.e.row(t).transpose();
            const double effect = beta_active.dot(e.head(c.active_size)) + c.effect_offset;
            double y = c.theta1.dot(e) + (ch.A[t] - ch.prob[t]) * effect + eps(t);
            if (t > 0) y += c.theta2 * (ch.A[t - 1] - ch.prob[t - 1]);
            Record& r = person.records[t];
            r.t = t + 1;
            r.covariates = ch.S.row(t).transpose();
            r.action = ch.A[t];
            r.prob = ch.prob[t];
            r.response = y;
        }
        people.push_back(std::move(person));
    }
    std::vector<std::string> names;
    for (int k = 0; k < c.p; ++k) names.push_back("S" + std::to_string(k + 1));
    return {MrtDataset(std::move(people), std::move(names)), truth};
}

TruthMoments truth_moments(const SimConfig& config, const FeatureMap& fmap, long rows, std::uint64_t seed) {
    static std::mutex mu;
    static std::map<std::string, TruthMoments> cache;
    const SimConfig c = config.resolved();
    std::ostringstream key;
    key << c.fingerprint() << "|" << fmap.description << "|" << fmap.dim << "|" << rows << "|" << seed;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key.str());
        if (it != cache.end()) return it->second;
    }

    const Vec beta_active = ground_truth(c).beta_star.head(c.active_size);
    const int d = fmap.dim;
    Mat M = Mat::Zero(d, d);
    Vec r = Vec::Zero(d);
    const long chains = std::max(1L, (rows + c.T - 1) / c.T);
    const long batch = std::max(1L, 2048L / c.T);
    Mat F(batch * c.T, d);
    Vec tau(batch * c.T);
    for (long i0 = 0; i0 < chains; i0 += batch) {
        const long nb = std::min(batch, chains - i0);
        for (long b = 0; b < nb; ++b) {
            Rng rng(derive_seed(seed, Stream::Truth, static_cast<std::uint64_t>(i0 + b)));
            const Chain ch = run_chain(c, rng);
            for (int t = 0; t < c.T; ++t) {
                const Eigen::Index row = b * c.T + t;
                F.row(row) = fmap(t + 1, ch.S.row(t).transpose()).transpose();
                tau(row) = beta_active.dot(ch.e.row(t).head(c.active_size)) + c.effect_offset;
            }
        }
        const auto Fb = F.topRows(nb * c.T);
        M.selfadjointView<Eigen::Lower>().rankUpdate(Fb.transpose());
        r.noalias() += Fb.transpose() * tau.head(nb * c.T);
    }
    M = M.selfadjointView<Eigen::Lower>();
    const double total = static_cast<double>(chains * c.T);
    TruthMoments out{M / total, r / total, chains * c.T};
    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(key.str(), out);
    return out;
}

Vec projected_truth(const TruthMoments& m, const IndexSet& E) {
    if (E.empty()) return Vec();
    return submatrix(m.M, E, E).ldlt().solve(subvector(m.r, E));
}

FixedDesign make_fixed_design(const FixedDesignConfig& config) {
    if (config.n < 2 || config.p < 1 || config.active_size > config.p)
        throw ConfigError("invalid fixed design dimensions");
    if (!(config.noise_sd > 0.0)) throw ConfigError("noise_sd must be positive");
    FixedDesign fd;
    Rng rng(config.design_seed);
    std::normal_distribution<double> z(0.0, 1.0);
    fd.X.resize(config.n, config.p);
    for (int i = 0; i < config.n; ++i)
        for (int j = 0; j < config.p; ++j) fd.X(i, j) = z(rng);
    fd.beta_star = Vec::Zero(config.p);
    for (int k = 0; k < config.active_size; ++k) fd.beta_star(k) = config.signal;
    fd.noise_sd = config.noise_sd;
    return fd;
}

StackedDesign FixedDesign::draw(std::uint64_t seed) const {
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, noise_sd);
    StackedDesign d;
    const int n = static_cast<int>(X.rows());
    d.X = X;
    d.Y = X * beta_star;
    for (int i = 0; i < n; ++i) d.Y(i) += z(rng);
    d.offsets.resize(n + 1);
    for (int i = 0; i <= n; ++i) d.offsets[i] = i;
    for (int i = 0; i < n; ++i) d.ids.push_back("u" + std::to_string(i + 1));
    for (int j = 0; j < X.cols(); ++j) d.column_names.push_back("X" + std::to_string(j + 1));
    return d;
}

Vec FixedDesign::projected_truth(const IndexSet& E) const {
    if (E.empty()) return Vec();
    Mat XE(X.rows(), static_cast<Eigen::Index>(E.size()));
    for (std::size_t k = 0; k < E.size(); ++k) XE.col(static_cast<Eigen::Index>(k)) = X.col(E[k]);
    return (XE.transpose() * XE).ldlt().solve(XE.transpose() * (X * beta_star));
}

}  // namespace mrtsi
