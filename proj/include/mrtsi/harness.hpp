#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mrtsi/comparators.hpp"
#include "mrtsi/mrt_data.hpp"
#include "mrtsi/synth.hpp"

namespace mrtsi {

// mrt: generated MRT data, nuisance split, stacked design with intercept.
// fixed: cross-sectional fixed design with Gaussian errors.
enum class Scenario { mrt, fixed };

struct ExperimentConfig {
    std::string setting;
    Scenario scenario = Scenario::mrt;
    SimConfig sim;
    FixedDesignConfig fixed;
    std::vector<Method> methods{Method::si, Method::polyhedral, Method::splitting, Method::naive};
    int replications = 500;
    InferenceOptions inference;
    double nuisance_fraction = 1.0 / 3.0;
    double p_tilde = 0.5;
    long truth_rows = 1000000;
    std::uint64_t seed = 1;
    int threads = 1;

    // Grid axes for `benchmark`; empty means the single sim setting.
    std::vector<double> signals;
    std::vector<ErrorRegime> regimes;

    // Real data.
    std::string data_path;
    CsvSchema schema;

    // Outputs.
    std::string out_metrics;
    std::string out_json;
    std::string out_intervals;

    void validate() const;
    std::string label() const;
    /// Hash of everything that determines the results.
    std::string hash() const;
};

/// INI file with sections [experiment], [sim], [fixed], [data],
/// [selection], [inference], [output]. Unknown keys are a ConfigError.
ExperimentConfig load_config(const std::string& path);

/// One config per (regime, signal) grid cell, or the config itself.
std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& cfg);

struct MetricsRow {
    std::string method;
    std::string setting;
    double coverage = 0.0;          // NaN when no intervals
    double fcr = 0.0;
    double avg_length_finite = 0.0; // NaN when no finite interval
    double pct_finite = 0.0;
    int n_sel = 0;                  // replications with a nonempty selection
    int n_intervals = 0;
    int n_failed = 0;               // replications lost to numeric failure
    int n_replications = 0;
};

struct IntervalRecord {
    std::string setting;
    std::string method;
    int replication = 0;
    int column = -1;
    std::string name;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double truth = 0.0;
    bool covered = false;
    bool finite = true;
};

struct ExperimentResult {
    std::vector<MetricsRow> rows;
    std::vector<IntervalRecord> intervals;
    std::vector<IntervalReport> reports;  // every report, replication-major
    std::vector<std::string> failures;
};

/// Per-replication truth for the columns of E (NaN-free).
using TruthFn = std::function<Vec(const IndexSet& E)>;

/// One replication's data and truth.
struct ReplicationData {
    StackedDesign design;
    TruthFn truth;
};

ReplicationData replication_data(const ExperimentConfig& cfg, int replication);

/// Runs every method on every replication; results depend only on the
/// config and seed, never on the thread count.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Aggregates per-replication reports for one method. `truths[r]` holds the
/// truth for report r's E.
MetricsRow summarize(const std::string& method, const std::string& setting,
                     const std::vector<std::optional<IntervalReport>>& reports,
                     const std::vector<Vec>& truths);

enum class OutputFormat { csv, json };

void emit_results(const std::vector<MetricsRow>& rows, OutputFormat format, const std::string& path);
void write_intervals_csv(const std::vector<IntervalRecord>& records, const std::string& path);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);
std::vector<MetricsRow> read_metrics_json(const std::string& path);

/// Intervals on real data: nuisance split, stacking, each configured method.
std::vector<IntervalReport> analyze_dataset(const MrtDataset& data, const ExperimentConfig& cfg,
                                            std::vector<std::string>* column_names = nullptr);

}  // namespace mrtsi
