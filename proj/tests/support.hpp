#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mrtsi/common.hpp"
#include "mrtsi/mrt_data.hpp"
#include "mrtsi/random.hpp"

namespace testing {

using mrtsi::Mat;
using mrtsi::Vec;

// Asymptotic Kolmogorov p-value with Stephens' small-sample correction.
inline double ks_pvalue(std::vector<double> x, const std::function<double(double)>& cdf) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    const double en = std::sqrt(n);
    const double lam = (en + 0.12 + 0.11 / en) * d;
    if (lam < 1e-3) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lam * lam);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline Mat gaussian_matrix(int rows, int cols, mrtsi::Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    Mat m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = z(rng);
    return m;
}

// Random stacked design with T rows per participant and y = X beta + noise.
inline mrtsi::StackedDesign random_design(int n, int T, int p, std::uint64_t seed, const Vec& beta = Vec(),
                                          double noise = 1.0) {
    mrtsi::Rng rng(seed);
    mrtsi::StackedDesign d;
    d.X = gaussian_matrix(n * T, p, rng);
    const Vec b = beta.size() ? beta : Vec::Zero(p);
    d.Y = d.X * b + noise * gaussian_matrix(n * T, 1, rng).col(0);
    for (int i = 0; i <= n; ++i) d.offsets.push_back(i * T);
    for (int i = 0; i < n; ++i) d.ids.push_back("u" + std::to_string(i));
    for (int j = 0; j < p; ++j) d.column_names.push_back("x" + std::to_string(j));
    return d;
}

inline std::string temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "mrtsi_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

inline double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace testing
