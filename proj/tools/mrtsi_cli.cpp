#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mrtsi/harness.hpp"

using namespace mrtsi;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out;
};

ExperimentConfig resolve(const Globals& g) {
    ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.sim.seed = *g.seed;
    }
    if (g.threads) cfg.threads = *g.threads;
    cfg.validate();
    return cfg;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

void print_rows(const std::vector<MetricsRow>& rows) {
    std::printf("%-12s %-28s %9s %9s %12s %9s %6s\n", "method", "setting", "coverage", "fcr", "avg_length",
                "finite", "n_sel");
    for (const auto& r : rows)
        std::printf("%-12s %-28s %9s %9s %12s %9s %6d\n", r.method.c_str(), r.setting.c_str(), fmt(r.coverage).c_str(),
                    fmt(r.fcr).c_str(), fmt(r.avg_length_finite).c_str(), fmt(r.pct_finite).c_str(), r.n_sel);
}

int cmd_simulate(const Globals& g) {
    ExperimentConfig cfg = resolve(g);
    SimConfig sim = cfg.sim;
    if (g.seed) sim.seed = *g.seed;
    const std::string out = g.out.empty() ? "simulated.csv" : g.out;
    auto [data, truth] = generate(sim);
    write_csv(data, out);
    std::printf("wrote %d participants x %d times, %d moderators to %s\n", data.n(), sim.T, data.num_moderators(),
                out.c_str());
    return 0;
}

int cmd_analyze(const Globals& g, const std::string& data_path) {
    ExperimentConfig cfg = resolve(g);
    const std::string path = data_path.empty() ? cfg.data_path : data_path;
    if (path.empty()) throw ConfigError("analyze needs a dataset (--data or [data] path)");
    const IngestResult in = ingest_csv(path, cfg.schema);
    if (in.dropped_rows) std::fprintf(stderr, "dropped %zu rows with missing cells\n", in.dropped_rows);
    std::vector<std::string> names;
    const auto reports = analyze_dataset(in.data, cfg, &names);
    std::vector<IntervalRecord> records;
    for (const auto& rep : reports) {
        const std::string m = method_name(rep.method);
        if (rep.intervals.empty()) {
            std::printf("%s: no moderators selected\n", m.c_str());
            continue;
        }
        std::printf("%s (lambda %.4g, %d participants for inference)\n", m.c_str(), rep.lambda, rep.n_inference);
        std::printf("  %-16s %10s %10s %10s\n", "moderator", "estimate", "lower", "upper");
        for (const auto& iv : rep.intervals) {
            const std::string& name = names.at(iv.column);
            std::printf("  %-16s %10s %10s %10s\n", name.c_str(), fmt(iv.estimate).c_str(), fmt(iv.lower).c_str(),
                        fmt(iv.upper).c_str());
            IntervalRecord rec;
            rec.setting = "data";
            rec.method = m;
            rec.column = iv.column;
            rec.name = name;
            rec.estimate = iv.estimate;
            rec.lower = iv.lower;
            rec.upper = iv.upper;
            rec.truth = std::nan("");
            rec.finite = iv.finite;
            records.push_back(rec);
        }
        for (const auto& w : rep.warnings) std::fprintf(stderr, "%s: warning: %s\n", m.c_str(), w.c_str());
    }
    if (!g.out.empty()) write_intervals_csv(records, g.out);
    return 0;
}

int cmd_benchmark(const Globals& g) {
    ExperimentConfig cfg = resolve(g);
    std::vector<MetricsRow> rows;
    std::vector<IntervalRecord> intervals;
    for (const auto& cell : expand_grid(cfg)) {
        std::fprintf(stderr, "running %s (%d replications)\n", cell.label().c_str(), cell.replications);
        ExperimentResult res = run_experiment(cell);
        for (const auto& f : res.failures) std::fprintf(stderr, "failure: %s\n", f.c_str());
        rows.insert(rows.end(), res.rows.begin(), res.rows.end());
        intervals.insert(intervals.end(), res.intervals.begin(), res.intervals.end());
    }
    print_rows(rows);
    const std::string metrics = g.out.empty() ? cfg.out_metrics : g.out;
    if (!metrics.empty()) emit_results(rows, OutputFormat::csv, metrics);
    if (!cfg.out_json.empty()) emit_results(rows, OutputFormat::json, cfg.out_json);
    if (!cfg.out_intervals.empty()) write_intervals_csv(intervals, cfg.out_intervals);
    return 0;
}

int cmd_report(const Globals& g, const std::vector<std::string>& files) {
    if (files.empty()) throw ConfigError("report needs at least one result file");
    std::vector<MetricsRow> rows;
    for (const auto& f : files) {
        const bool json = f.size() >= 5 && f.compare(f.size() - 5, 5, ".json") == 0;
        auto part = json ? read_metrics_json(f) : read_metrics_csv(f);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    print_rows(rows);
    if (!g.out.empty()) emit_results(rows, OutputFormat::csv, g.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selective inference for effect moderation in micro-randomized trials"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    int threads = 1;
    app.add_option("--config", g.config, "INI config file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "master seed");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "output path");
    app.fallthrough();

    std::string data_path;
    std::vector<std::string> files;
    auto* simulate = app.add_subcommand("simulate", "write a synthetic dataset CSV");
    auto* analyze = app.add_subcommand("analyze", "select moderators and print intervals for a dataset CSV");
    analyze->add_option("--data", data_path, "dataset CSV")->check(CLI::ExistingFile);
    auto* benchmark = app.add_subcommand("benchmark", "run the Monte-Carlo study over the config grid");
    auto* report = app.add_subcommand("report", "aggregate metrics files");
    report->add_option("files", files, "metrics CSV/JSON files")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }
    if (*seed_opt) g.seed = seed;
    if (*threads_opt) g.threads = threads;

    try {
        if (*simulate) return cmd_simulate(g);
        if (*analyze) return cmd_analyze(g, data_path);
        if (*benchmark) return cmd_benchmark(g);
        if (*report) return cmd_report(g, files);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
