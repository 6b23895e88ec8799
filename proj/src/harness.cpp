#include "mrtsi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"
#include "mrtsi/estimation.hpp"
#include "mrtsi/random.hpp"

namespace mrtsi {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long x = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string csv_number(double v) {
    if (std::isnan(v)) return "";
    return format_double(v);
}

double parse_csv_number(const std::string& s) {
    if (s.empty() || s == "nan") return kNaN;
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::stod(s);
}

nlohmann::json json_number(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (!(inference.alpha > 0.0 && inference.alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (methods.empty()) throw ConfigError("no methods configured");
    if (!(nuisance_fraction > 0.0 && nuisance_fraction < 1.0))
        throw ConfigError("nuisance fraction must lie in (0,1)");
    if (!(p_tilde > 0.0 && p_tilde < 1.0)) throw ConfigError("p_tilde must lie in (0,1)");
    if (inference.rule.draws < 1 || !(inference.rule.kappa > 0.0)) throw ConfigError("invalid lambda rule");
    if (inference.pivot.quadrature_order < 2) throw ConfigError("quadrature order must be >= 2");
    if (scenario == Scenario::mrt) (void)sim.resolved();
}

std::string ExperimentConfig::label() const {
    if (!setting.empty()) return setting;
    std::ostringstream os;
    if (scenario == Scenario::fixed) {
        os << "fixed/n=" << fixed.n << "/p=" << fixed.p << "/signal=" << fixed.signal;
    } else {
        os << regime_name(sim.regime) << "/c=" << sim.c;
    }
    return os.str();
}

std::string ExperimentConfig::hash() const {
    std::ostringstream os;
    os.precision(17);
    os << static_cast<int>(scenario) << "|";
    if (scenario == Scenario::mrt) os << sim.fingerprint() << "|n=" << sim.n << "|" << regime_name(sim.regime);
    else
        os << fixed.n << "," << fixed.p << "," << fixed.active_size << "," << fixed.signal << "," << fixed.noise_sd
           << "," << fixed.design_seed;
    os << "|m=";
    for (Method m : methods) os << method_name(m) << ",";
    const InferenceOptions& inf = inference;
    os << "|r=" << replications << "|a=" << inf.alpha << "|k=" << inf.rule.kappa << "|d=" << inf.rule.draws
       << "|l=" << inf.lambda << "|t=" << inf.tau << "|ts=" << inf.tau_scale << "|sf=" << inf.select_fraction
       << "|q=" << inf.pivot.quadrature_order << "|pi=" << inf.polyhedral_inactive << "|nf=" << nuisance_fraction << "|pt=" << p_tilde
       << "|tr=" << truth_rows << "|s=" << seed;
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(os.str());
    return hex.str();
}

ExperimentConfig load_config(const std::string& path) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("cannot read config: " + std::string(e.what()));
    }
    ExperimentConfig cfg;
    static const std::set<std::string> sections{"experiment", "sim", "fixed", "data",
                                                "selection", "inference", "output"};
    for (const auto& [section, body] : tree) {
        if (!sections.count(section)) throw ConfigError("unknown config section [" + section + "]");
        for (const auto& [key, node] : body) {
            const std::string v = node.get_value<std::string>();
            const std::string k = section + "." + key;
            bool known = true;
            if (section == "experiment") {
                if (key == "setting") cfg.setting = v;
                else if (key == "scenario") {
                    if (v == "mrt") cfg.scenario = Scenario::mrt;
                    else if (v == "fixed") cfg.scenario = Scenario::fixed;
                    else throw ConfigError("unknown scenario '" + v + "'");
                } else if (key == "methods") {
                    cfg.methods.clear();
                    for (const auto& m : split_list(v)) cfg.methods.push_back(parse_method(m));
                } else if (key == "replications") cfg.replications = static_cast<int>(to_long(k, v));
                else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_long(k, v));
                else if (key == "threads") cfg.threads = static_cast<int>(to_long(k, v));
                else if (key == "nuisance_fraction") cfg.nuisance_fraction = to_double(k, v);
                else if (key == "p_tilde") cfg.p_tilde = to_double(k, v);
                else if (key == "truth_rows") cfg.truth_rows = to_long(k, v);
                else if (key == "signals") {
                    cfg.signals.clear();
                    for (const auto& s : split_list(v)) cfg.signals.push_back(to_double(k, s));
                } else if (key == "regimes") {
                    cfg.regimes.clear();
                    for (const auto& s : split_list(v)) cfg.regimes.push_back(parse_regime(s));
                } else known = false;
            } else if (section == "sim") {
                SimConfig& s = cfg.sim;
                if (key == "n") s.n = static_cast<int>(to_long(k, v));
                else if (key == "T") s.T = static_cast<int>(to_long(k, v));
                else if (key == "p") s.p = static_cast<int>(to_long(k, v));
                else if (key == "active_size") s.active_size = static_cast<int>(to_long(k, v));
                else if (key == "c") s.c = to_double(k, v);
                else if (key == "rho") s.rho = to_double(k, v);
                else if (key == "theta1") s.theta1 = Vec();  // placeholder, resolved below
                else if (key == "theta2") s.theta2 = to_double(k, v);
                else if (key == "sigma_e") s.sigma_e = to_double(k, v);
                else if (key == "gamma0") s.Gamma0 = Mat();
                else if (key == "regime") s.regime = parse_regime(v);
                else if (key == "action_s1") s.action_s1 = to_double(k, v);
                else if (key == "action_s2") s.action_s2 = to_double(k, v);
                else if (key == "prob_min") s.prob_min = to_double(k, v);
                else if (key == "prob_max") s.prob_max = to_double(k, v);
                else if (key == "effect_offset") s.effect_offset = to_double(k, v);
                else if (key == "additive_scale") s.additive_scale = to_double(k, v);
                else if (key == "burn_in") s.burn_in = static_cast<int>(to_long(k, v));
                else if (key == "seed") s.seed = static_cast<std::uint64_t>(to_long(k, v));
                else known = false;
            } else if (section == "fixed") {
                FixedDesignConfig& f = cfg.fixed;
                if (key == "n") f.n = static_cast<int>(to_long(k, v));
                else if (key == "p") f.p = static_cast<int>(to_long(k, v));
                else if (key == "active_size") f.active_size = static_cast<int>(to_long(k, v));
                else if (key == "signal") f.signal = to_double(k, v);
                else if (key == "noise_sd") f.noise_sd = to_double(k, v);
                else if (key == "design_seed") f.design_seed = static_cast<std::uint64_t>(to_long(k, v));
                else known = false;
            } else if (section == "data") {
                CsvSchema& s = cfg.schema;
                if (key == "path") cfg.data_path = v;
                else if (key == "id") s.id = v;
                else if (key == "time") s.time = v;
                else if (key == "action") s.action = v;
                else if (key == "prob") s.prob = v;
                else if (key == "response") s.response = v;
                else if (key == "moderators") s.moderators = split_list(v);
                else if (key == "history") s.history = split_list(v);
                else known = false;
            } else if (section == "selection") {
                InferenceOptions& o = cfg.inference;
                if (key == "kappa") o.rule.kappa = to_double(k, v);
                else if (key == "draws") o.rule.draws = static_cast<int>(to_long(k, v));
                else if (key == "lambda") o.lambda = to_double(k, v);
                else if (key == "tau") o.tau = to_double(k, v);
                else if (key == "tau_scale") o.tau_scale = to_double(k, v);
                else known = false;
            } else if (section == "inference") {
                InferenceOptions& o = cfg.inference;
                if (key == "alpha") o.alpha = to_double(k, v);
                else if (key == "quadrature_order") o.pivot.quadrature_order = static_cast<int>(to_long(k, v));
                else if (key == "audit") o.pivot.audit = to_bool(k, v);
                else if (key == "select_fraction") o.select_fraction = to_double(k, v);
                else if (key == "infer_intercept") o.infer_unpenalized = to_bool(k, v);
                else if (key == "polyhedral_inactive") o.polyhedral_inactive = to_bool(k, v);
                else known = false;
            } else if (section == "output") {
                if (key == "metrics") cfg.out_metrics = v;
                else if (key == "json") cfg.out_json = v;
                else if (key == "intervals") cfg.out_intervals = v;
                else known = false;
            }
            if (!known) throw ConfigError("unknown config key '" + k + "'");
        }
    }
    // Vector-valued sim knobs: a single value broadcasts.
    if (auto v = tree.get_optional<std::string>("sim.theta1")) {
        const auto items = split_list(*v);
        if (items.size() == 1) cfg.sim.theta1 = Vec::Constant(cfg.sim.p, to_double("sim.theta1", items[0]));
        else {
            cfg.sim.theta1.resize(static_cast<Eigen::Index>(items.size()));
            for (std::size_t i = 0; i < items.size(); ++i)
                cfg.sim.theta1(static_cast<Eigen::Index>(i)) = to_double("sim.theta1", items[i]);
        }
    }
    if (auto v = tree.get_optional<std::string>("sim.gamma0"))
        cfg.sim.Gamma0 = to_double("sim.gamma0", *v) * Mat::Identity(cfg.sim.p, cfg.sim.p);
    cfg.validate();
    return cfg;
}

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& cfg) {
    if (cfg.scenario != Scenario::mrt || (cfg.signals.empty() && cfg.regimes.empty())) return {cfg};
    const std::vector<ErrorRegime> regimes = cfg.regimes.empty() ? std::vector<ErrorRegime>{cfg.sim.regime}
                                                                 : cfg.regimes;
    const std::vector<double> signals = cfg.signals.empty() ? std::vector<double>{cfg.sim.c} : cfg.signals;
    std::vector<ExperimentConfig> out;
    for (ErrorRegime r : regimes) {
        for (double c : signals) {
            ExperimentConfig cell = cfg;
            cell.signals.clear();
            cell.regimes.clear();
            cell.sim.regime = r;
            cell.sim.c = c;
            cell.setting.clear();
            if (!cfg.setting.empty()) cell.setting = cfg.setting + ":" + cell.label();
            out.push_back(cell);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Replications

ReplicationData replication_data(const ExperimentConfig& cfg, int replication) {
    const std::uint64_t rseed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(replication)});
    ReplicationData out;
    if (cfg.scenario == Scenario::fixed) {
        auto fd = std::make_shared<FixedDesign>(make_fixed_design(cfg.fixed));
        out.design = fd->draw(derive_seed(rseed, Stream::Data));
        out.truth = [fd](const IndexSet& E) { return fd->projected_truth(E); };
        return out;
    }
    SimConfig sim = cfg.sim;
    sim.seed = derive_seed(rseed, Stream::Data);
    auto generated = generate(sim);
    const NuisanceSplit split = fit_nuisance(generated.first, cfg.nuisance_fraction,
                                             derive_seed(rseed, Stream::NuisanceSplit));
    const FeatureMap fmap = FeatureMap::intercept_plus_identity(sim.p);
    out.design = stack_design(split.analysis, &split.model, fmap, constant_probability(cfg.p_tilde));
    const TruthMoments moments = truth_moments(sim, fmap, cfg.truth_rows);
    out.truth = [moments](const IndexSet& E) { return projected_truth(moments, E); };
    return out;
}

MetricsRow summarize(const std::string& method, const std::string& setting,
                     const std::vector<std::optional<IntervalReport>>& reports, const std::vector<Vec>& truths) {
    MetricsRow row;
    row.method = method;
    row.setting = setting;
    row.n_replications = static_cast<int>(reports.size());
    long covered = 0, finite = 0;
    double length = 0.0, fcr_sum = 0.0;
    int used = 0;
    for (std::size_t r = 0; r < reports.size(); ++r) {
        if (!reports[r]) {
            ++row.n_failed;
            continue;
        }
        ++used;
        const IntervalReport& rep = *reports[r];
        if (rep.intervals.empty()) continue;
        ++row.n_sel;
        int miss = 0;
        for (const auto& iv : rep.intervals) {
            const int k = static_cast<int>(std::find(rep.E.begin(), rep.E.end(), iv.column) - rep.E.begin());
            const double truth = truths[r](k);
            const bool cov = iv.lower <= truth && truth <= iv.upper;
            covered += cov;
            miss += !cov;
            ++row.n_intervals;
            const bool fin = std::isfinite(iv.lower) && std::isfinite(iv.upper);
            if (fin) {
                ++finite;
                length += iv.upper - iv.lower;
            }
        }
        fcr_sum += static_cast<double>(miss) / std::max<std::size_t>(rep.intervals.size(), 1);
    }
    if (row.n_intervals == 0) {
        row.coverage = row.fcr = row.avg_length_finite = row.pct_finite = kNaN;
        return row;
    }
    row.coverage = static_cast<double>(covered) / row.n_intervals;
    row.fcr = fcr_sum / used;
    row.pct_finite = static_cast<double>(finite) / row.n_intervals;
    row.avg_length_finite = finite ? length / finite : kNaN;
    return row;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const int R = cfg.replications;
    const std::size_t M = cfg.methods.size();
    const std::string setting = cfg.label();
    const std::string hash = cfg.hash();
    if (cfg.scenario == Scenario::mrt)
        (void)truth_moments(cfg.sim, FeatureMap::intercept_plus_identity(cfg.sim.p), cfg.truth_rows);

    struct Slot {
        std::vector<std::optional<IntervalReport>> reports;
        std::vector<Vec> truths;
        std::vector<std::string> failures;
        std::vector<std::string> names;
    };
    std::vector<Slot> slots(R);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int r = next++; r < R; r = next++) {
            Slot& slot = slots[r];
            slot.reports.resize(M);
            slot.truths.resize(M);
            const std::uint64_t rseed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(r)});
            ReplicationData data;
            try {
                data = replication_data(cfg, r);
            } catch (const std::exception& e) {
                slot.failures.push_back("replication " + std::to_string(r) + ": data: " + e.what());
                continue;
            }
            slot.names = data.design.column_names;
            for (std::size_t m = 0; m < M; ++m) {
                try {
                    IntervalReport rep = run_method(cfg.methods[m], data.design, cfg.inference, rseed);
                    rep.config_hash = hash;
                    slot.truths[m] = data.truth(rep.E);
                    slot.reports[m] = std::move(rep);
                } catch (const std::exception& e) {
                    slot.failures.push_back("replication " + std::to_string(r) + ": " +
                                            method_name(cfg.methods[m]) + ": " + e.what());
                }
            }
        }
    };
    const int nthreads = std::min(cfg.threads, R);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // Ordered merge.
    ExperimentResult out;
    for (std::size_t m = 0; m < M; ++m) {
        std::vector<std::optional<IntervalReport>> reps(R);
        std::vector<Vec> truths(R);
        for (int r = 0; r < R; ++r) {
            if (slots[r].reports.size() > m) reps[r] = slots[r].reports[m];
            if (slots[r].truths.size() > m) truths[r] = slots[r].truths[m];
        }
        out.rows.push_back(summarize(method_name(cfg.methods[m]), setting, reps, truths));
    }
    for (int r = 0; r < R; ++r) {
        for (auto& f : slots[r].failures) out.failures.push_back(f);
        for (std::size_t m = 0; m < slots[r].reports.size(); ++m) {
            if (!slots[r].reports[m]) continue;
            const IntervalReport& rep = *slots[r].reports[m];
            for (const auto& iv : rep.intervals) {
                const int k = static_cast<int>(std::find(rep.E.begin(), rep.E.end(), iv.column) - rep.E.begin());
                IntervalRecord rec;
                rec.setting = setting;
                rec.method = method_name(rep.method);
                rec.replication = r;
                rec.column = iv.column;
                rec.name = iv.column < static_cast<int>(slots[r].names.size()) ? slots[r].names[iv.column] : "";
                rec.estimate = iv.estimate;
                rec.lower = iv.lower;
                rec.upper = iv.upper;
                rec.truth = slots[r].truths[m](k);
                rec.covered = iv.lower <= rec.truth && rec.truth <= iv.upper;
                rec.finite = std::isfinite(iv.lower) && std::isfinite(iv.upper);
                out.intervals.push_back(rec);
            }
            out.reports.push_back(rep);
        }
    }
    return out;
}

std::vector<IntervalReport> analyze_dataset(const MrtDataset& data, const ExperimentConfig& cfg,
                                            std::vector<std::string>* column_names) {
    const NuisanceSplit split = fit_nuisance(data, cfg.nuisance_fraction, derive_seed(cfg.seed, Stream::NuisanceSplit));
    const FeatureMap fmap = FeatureMap::intercept_plus_identity(data.num_moderators());
    StackedDesign design = stack_design(split.analysis, &split.model, fmap, constant_probability(cfg.p_tilde));
    std::vector<std::string> names{"(intercept)"};
    for (const auto& m : data.moderator_names()) names.push_back(m);
    design.column_names = names;
    if (column_names) *column_names = names;
    std::vector<IntervalReport> out;
    for (Method m : cfg.methods) {
        IntervalReport rep = run_method(m, design, cfg.inference, cfg.seed);
        rep.config_hash = cfg.hash();
        out.push_back(std::move(rep));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output

namespace {

const char* kHeader = "method,setting,coverage,fcr,avg_length_finite,pct_finite,n_sel";

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    return os;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (in_quotes) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                in_quotes = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

void emit_results(const std::vector<MetricsRow>& rows, OutputFormat format, const std::string& path) {
    if (rows.empty()) throw ConfigError("no metrics rows to emit");
    std::ofstream os = open_out(path);
    if (format == OutputFormat::csv) {
        os << kHeader << "\n";
        for (const auto& r : rows)
            os << quote(r.method) << ',' << quote(r.setting) << ',' << csv_number(r.coverage) << ','
               << csv_number(r.fcr) << ',' << csv_number(r.avg_length_finite) << ',' << csv_number(r.pct_finite)
               << ',' << r.n_sel << "\n";
    } else {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& r : rows) {
            nlohmann::ordered_json j;
            j["method"] = r.method;
            j["setting"] = r.setting;
            j["coverage"] = json_number(r.coverage);
            j["fcr"] = json_number(r.fcr);
            j["avg_length_finite"] = json_number(r.avg_length_finite);
            j["pct_finite"] = json_number(r.pct_finite);
            j["n_sel"] = r.n_sel;
            j["n_intervals"] = r.n_intervals;
            j["n_failed"] = r.n_failed;
            j["n_replications"] = r.n_replications;
            arr.push_back(j);
        }
        os << arr.dump(2) << "\n";
    }
    if (!os) throw Error("write to '" + path + "' failed");
}

void write_intervals_csv(const std::vector<IntervalRecord>& records, const std::string& path) {
    std::ofstream os = open_out(path);
    os << "setting,method,replication,column,name,estimate,lower,upper,truth,covered,finite\n";
    for (const auto& r : records)
        os << quote(r.setting) << ',' << r.method << ',' << r.replication << ',' << r.column << ','
           << quote(r.name) << ',' << format_double(r.estimate) << ',' << format_double(r.lower) << ','
           << format_double(r.upper) << ',' << format_double(r.truth) << ',' << (r.covered ? 1 : 0) << ','
           << (r.finite ? 1 : 0) << "\n";
    if (!os) throw Error("write to '" + path + "' failed");
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(is, line) || line != kHeader) throw ParseError("'" + path + "' is not a metrics CSV");
    std::vector<MetricsRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 7) throw ParseError("'" + path + "': expected 7 fields in '" + line + "'");
        MetricsRow r;
        r.method = f[0];
        r.setting = f[1];
        r.coverage = parse_csv_number(f[2]);
        r.fcr = parse_csv_number(f[3]);
        r.avg_length_finite = parse_csv_number(f[4]);
        r.pct_finite = parse_csv_number(f[5]);
        r.n_sel = std::stoi(f[6]);
        rows.push_back(r);
    }
    return rows;
}

std::vector<MetricsRow> read_metrics_json(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open '" + path + "'");
    nlohmann::json arr;
    try {
        is >> arr;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    auto num = [](const nlohmann::json& v) { return v.is_null() ? kNaN : v.get<double>(); };
    std::vector<MetricsRow> rows;
    for (const auto& j : arr) {
        MetricsRow r;
        r.method = j.at("method").get<std::string>();
        r.setting = j.at("setting").get<std::string>();
        r.coverage = num(j.at("coverage"));
        r.fcr = num(j.at("fcr"));
        r.avg_length_finite = num(j.at("avg_length_finite"));
        r.pct_finite = num(j.at("pct_finite"));
        r.n_sel = j.at("n_sel").get<int>();
        r.n_intervals = j.value("n_intervals", 0);
        r.n_failed = j.value("n_failed", 0);
        r.n_replications = j.value("n_replications", 0);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace mrtsi
