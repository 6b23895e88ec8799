#include <numeric>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mrtsi/harness.hpp"

namespace py = pybind11;
using namespace mrtsi;

namespace {

// Rows of each participant must be contiguous in `groups`.
StackedDesign make_design(const Mat& X, const Vec& Y, const std::vector<long>& groups,
                          const std::vector<int>& unpenalized) {
    if (X.rows() != Y.size()) throw ValidationError("X and y have different row counts");
    if (static_cast<Eigen::Index>(groups.size()) != X.rows())
        throw ValidationError("groups must have one entry per row");
    StackedDesign d;
    d.X = X;
    d.Y = Y;
    d.offsets.push_back(0);
    for (std::size_t r = 0; r < groups.size(); ++r) {
        if (r > 0 && groups[r] != groups[r - 1]) d.offsets.push_back(static_cast<int>(r));
        if (d.ids.empty() || (r > 0 && groups[r] != groups[r - 1])) {
            const std::string id = std::to_string(groups[r]);
            for (const auto& seen : d.ids)
                if (seen == id) throw ValidationError("rows of participant " + id + " are not contiguous");
            d.ids.push_back(id);
        }
    }
    d.offsets.push_back(static_cast<int>(groups.size()));
    for (int j = 0; j < d.p(); ++j) d.column_names.push_back("x" + std::to_string(j));
    for (int j : unpenalized)
        if (j < 0 || j >= d.p()) throw ValidationError("unpenalized column out of range");
    d.unpenalized = IndexSet(unpenalized.begin(), unpenalized.end());
    std::sort(d.unpenalized.begin(), d.unpenalized.end());
    return d;
}

py::dict report_dict(const IntervalReport& rep, const std::vector<std::string>& names) {
    py::list rows;
    for (const auto& iv : rep.intervals) {
        py::dict r;
        r["column"] = iv.column;
        if (iv.column >= 0 && iv.column < static_cast<int>(names.size())) r["name"] = names[iv.column];
        r["estimate"] = iv.estimate;
        r["lower"] = iv.lower;
        r["upper"] = iv.upper;
        r["sigma"] = iv.sigma;
        r["finite"] = iv.finite;
        r["pivot_lower"] = iv.pivot_lower;
        r["pivot_upper"] = iv.pivot_upper;
        rows.append(r);
    }
    py::dict out;
    out["method"] = method_name(rep.method);
    out["selected"] = std::vector<int>(rep.E.begin(), rep.E.end());
    out["intervals"] = rows;
    out["alpha"] = rep.alpha;
    out["lambda"] = rep.lambda;
    out["tau"] = rep.tau;
    out["n_inference"] = rep.n_inference;
    out["warnings"] = rep.warnings;
    return out;
}

py::dict metrics_dict(const MetricsRow& m) {
    py::dict r;
    r["method"] = m.method;
    r["setting"] = m.setting;
    r["coverage"] = m.coverage;
    r["fcr"] = m.fcr;
    r["avg_length_finite"] = m.avg_length_finite;
    r["pct_finite"] = m.pct_finite;
    r["n_sel"] = m.n_sel;
    r["n_failed"] = m.n_failed;
    return r;
}

InferenceOptions options(double alpha, double lambda, double tau, bool audit) {
    InferenceOptions o;
    o.alpha = alpha;
    o.lambda = lambda;
    o.tau = tau;
    o.pivot.audit = audit;
    return o;
}

}  // namespace

PYBIND11_MODULE(_mrtsi, m) {
    m.doc() = "Selective inference for moderators in micro-randomized trials";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def(
        "intervals",
        [](const Mat& X, const Vec& y, const std::vector<long>& groups, const std::string& method,
           const std::vector<int>& unpenalized, double alpha, double lambda, double tau, std::uint64_t seed,
           bool audit) {
            const StackedDesign d = make_design(X, y, groups, unpenalized);
            IntervalReport rep;
            {
                py::gil_scoped_release release;
                rep = run_method(parse_method(method), d, options(alpha, lambda, tau, audit), seed);
            }
            return report_dict(rep, d.column_names);
        },
        py::arg("X"), py::arg("y"), py::arg("groups"), py::arg("method") = "si",
        py::arg("unpenalized") = std::vector<int>{}, py::arg("alpha") = 0.1, py::arg("lambda_") = 0.0,
        py::arg("tau") = 0.0, py::arg("seed") = 1, py::arg("audit") = false,
        "Intervals for the selected columns of a stacked design. `groups` labels the participant of each "
        "row. lambda_ and tau of 0 use the data-driven defaults.");

    m.def(
        "randomized_lasso",
        [](const Mat& X, const Vec& y, const std::vector<long>& groups, double lambda, const Vec& omega,
           const std::vector<int>& unpenalized) {
            const StackedDesign d = make_design(X, y, groups, unpenalized);
            if (omega.size() != d.p()) throw ValidationError("omega must have one entry per column");
            const SelectionResult s = solve_randomized_lasso(d, gram_stats(d), lambda, omega, d.unpenalized);
            py::dict out;
            out["beta"] = s.beta;
            out["selected"] = std::vector<int>(s.E.begin(), s.E.end());
            out["subgradient"] = s.subgradient;
            out["kkt_residual"] = s.kkt_residual;
            return out;
        },
        py::arg("X"), py::arg("y"), py::arg("groups"), py::arg("lambda_"), py::arg("omega"),
        py::arg("unpenalized") = std::vector<int>{});

    m.def(
        "simulate",
        [](int n, int T, int p, double c, const std::string& regime, std::uint64_t seed, int replication) {
            ExperimentConfig cfg;
            cfg.sim.n = n;
            cfg.sim.T = T;
            cfg.sim.p = p;
            cfg.sim.c = c;
            cfg.sim.regime = parse_regime(regime);
            cfg.seed = seed;
            cfg.truth_rows = 200000;
            cfg.validate();
            const ReplicationData data = replication_data(cfg, replication);
            std::vector<long> groups;
            for (int i = 0; i < data.design.n(); ++i)
                groups.insert(groups.end(), data.design.rows(i), static_cast<long>(i));
            const IndexSet all = [&] {
                IndexSet e(data.design.p());
                std::iota(e.begin(), e.end(), 0);
                return e;
            }();
            py::dict out;
            out["X"] = data.design.X;
            out["y"] = data.design.Y;
            out["groups"] = groups;
            out["columns"] = data.design.column_names;
            out["unpenalized"] = std::vector<int>(data.design.unpenalized.begin(), data.design.unpenalized.end());
            out["projected_truth_full"] = data.truth(all);
            out["beta_star"] = ground_truth(cfg.sim.resolved()).beta_star;
            return out;
        },
        py::arg("n") = 120, py::arg("T") = 30, py::arg("p") = 50, py::arg("c") = 2.4,
        py::arg("regime") = "gaussian", py::arg("seed") = 1, py::arg("replication") = 0,
        "One simulated trial, already split for the nuisance fit and stacked.");

    m.def(
        "run_config",
        [](const std::string& path) {
            const ExperimentConfig cfg = load_config(path);
            std::vector<MetricsRow> rows;
            {
                py::gil_scoped_release release;
                for (const auto& cell : expand_grid(cfg)) {
                    const ExperimentResult res = run_experiment(cell);
                    rows.insert(rows.end(), res.rows.begin(), res.rows.end());
                }
            }
            py::list out;
            for (const auto& r : rows) out.append(metrics_dict(r));
            return out;
        },
        py::arg("path"), "Runs every grid cell of an INI config and returns the metrics rows.");

    m.def(
        "analyze_csv",
        [](const std::string& path, const std::vector<std::string>& methods, double alpha, std::uint64_t seed) {
            ExperimentConfig cfg;
            cfg.methods.clear();
            for (const auto& name : methods) cfg.methods.push_back(parse_method(name));
            cfg.inference.alpha = alpha;
            cfg.seed = seed;
            cfg.validate();
            const IngestResult in = ingest_csv(path, cfg.schema);
            std::vector<std::string> names;
            const auto reports = analyze_dataset(in.data, cfg, &names);
            py::list out;
            for (const auto& rep : reports) out.append(report_dict(rep, names));
            return out;
        },
        py::arg("path"), py::arg("methods") = std::vector<std::string>{"si"}, py::arg("alpha") = 0.1,
        py::arg("seed") = 1, "Reads a long-format trial CSV and returns intervals per method.");
}
