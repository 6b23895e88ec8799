#pragma once

#include <span>
#include <vector>

namespace mrtsi {

/// Gauss–Legendre rule on [-1, 1].
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    /// Rules are computed once per order and cached (thread safe).
    static const GaussLegendre& get(int order);
};

/// Nodes and log-weights mapped to [a, b], appended to the outputs.
void map_rule(const GaussLegendre& rule, double a, double b, std::vector<double>& x,
              std::vector<double>& log_w);

/// log(sum_i exp(v_i)), stable under large magnitudes.
double log_sum_exp(std::span<const double> v);

}  // namespace mrtsi
