#include "mrtsi/mrt_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "mrtsi/estimation.hpp"

namespace mrtsi {

MrtDataset::MrtDataset(std::vector<Participant> participants,
                       std::vector<std::string> moderator_names,
                       std::vector<std::string> history_names)
    : participants_(std::move(participants)),
      moderator_names_(std::move(moderator_names)),
      history_names_(std::move(history_names)) {
    const auto p = static_cast<Eigen::Index>(moderator_names_.size());
    const auto h = static_cast<Eigen::Index>(history_names_.size());
    for (const auto& person : participants_) {
        for (const auto& r : person.records) {
            if (!(r.prob > 0.0 && r.prob < 1.0))
                throw ValidationError("participant " + person.id +
                                      ": randomization probability outside (0,1)");
            if (r.action != 0 && r.action != 1)
                throw ValidationError("participant " + person.id + ": action must be 0 or 1");
            if (!std::isfinite(r.response))
                throw ValidationError("participant " + person.id + ": non-finite response");
            if (r.covariates.size() != p || r.history.size() != h)
                throw ValidationError("participant " + person.id + ": covariate dimension mismatch");
        }
    }
}

std::size_t MrtDataset::num_rows() const {
    std::size_t rows = 0;
    for (const auto& person : participants_) rows += person.records.size();
    return rows;
}

MrtDataset MrtDataset::subset(const std::vector<int>& positions) const {
    std::vector<Participant> out;
    out.reserve(positions.size());
    for (int k : positions) out.push_back(participants_.at(k));
    MrtDataset d;
    d.participants_ = std::move(out);
    d.moderator_names_ = moderator_names_;
    d.history_names_ = history_names_;
    return d;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                            : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view cell, std::size_t row, const std::string& column) {
    double value = 0.0;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw ParseError("row " + std::to_string(row) + ", column '" + column +
                         "': malformed number '" + std::string(cell) + "'");
    return value;
}

}  // namespace

IngestResult ingest_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "': missing header row");

    std::vector<std::string> header;
    for (auto cell : split_line(line)) header.emplace_back(trim(cell));
    std::unordered_map<std::string, int> col;
    for (int k = 0; k < static_cast<int>(header.size()); ++k) col[header[k]] = k;
    auto require = [&](const std::string& name) {
        auto it = col.find(name);
        if (it == col.end()) throw ParseError("'" + path + "': missing column '" + name + "'");
        return it->second;
    };
    const int c_id = require(schema.id);
    const int c_t = require(schema.time);
    const int c_a = require(schema.action);
    const int c_p = require(schema.prob);
    const int c_y = require(schema.response);

    std::vector<std::string> history = schema.history;
    std::vector<std::string> moderators = schema.moderators;
    if (moderators.empty()) {
        for (const auto& name : header) {
            if (name == schema.id || name == schema.time || name == schema.action ||
                name == schema.prob || name == schema.response)
                continue;
            if (std::find(history.begin(), history.end(), name) != history.end()) continue;
            moderators.push_back(name);
        }
    }
    std::vector<int> c_mod, c_hist;
    for (const auto& m : moderators) c_mod.push_back(require(m));
    for (const auto& h : history) c_hist.push_back(require(h));

    std::vector<Participant> people;
    std::unordered_map<std::string, std::size_t> index;
    std::size_t dropped = 0;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        auto cell = [&](int k) -> std::string_view {
            return k < static_cast<int>(cells.size()) ? trim(cells[k]) : std::string_view{};
        };
        bool missing = false;
        for (int k : {c_id, c_t, c_a, c_p, c_y}) missing |= cell(k).empty();
        for (int k : c_mod) missing |= cell(k).empty();
        for (int k : c_hist) missing |= cell(k).empty();
        if (missing) {
            ++dropped;
            continue;
        }

        Record r;
        r.t = parse_number(cell(c_t), row, schema.time);
        const double a = parse_number(cell(c_a), row, schema.action);
        if (a != 0.0 && a != 1.0)
            throw ValidationError("row " + std::to_string(row) + ": action must be 0 or 1");
        r.action = static_cast<int>(a);
        r.prob = parse_number(cell(c_p), row, schema.prob);
        if (!(r.prob > 0.0 && r.prob < 1.0))
            throw ValidationError("row " + std::to_string(row) +
                                  ": probability outside (0,1): " + std::string(cell(c_p)));
        r.response = parse_number(cell(c_y), row, schema.response);
        r.covariates.resize(static_cast<Eigen::Index>(c_mod.size()));
        for (std::size_t k = 0; k < c_mod.size(); ++k)
            r.covariates(static_cast<Eigen::Index>(k)) = parse_number(cell(c_mod[k]), row, moderators[k]);
        r.history.resize(static_cast<Eigen::Index>(c_hist.size()));
        for (std::size_t k = 0; k < c_hist.size(); ++k)
            r.history(static_cast<Eigen::Index>(k)) = parse_number(cell(c_hist[k]), row, history[k]);

        const std::string id(cell(c_id));
        auto [it, inserted] = index.try_emplace(id, people.size());
        if (inserted) people.push_back(Participant{id, {}});
        people[it->second].records.push_back(std::move(r));
    }
    for (auto& person : people)
        std::stable_sort(person.records.begin(), person.records.end(),
                         [](const Record& x, const Record& y) { return x.t < y.t; });
    return {MrtDataset(std::move(people), std::move(moderators), std::move(history)), dropped};
}

void write_csv(const MrtDataset& data, const std::string& path, const CsvSchema& schema) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << schema.id << ',' << schema.time << ',' << schema.action << ',' << schema.prob << ','
        << schema.response;
    for (const auto& m : data.moderator_names()) out << ',' << m;
    for (const auto& h : data.history_names()) out << ',' << h;
    out << '\n';
    for (const auto& person : data.participants()) {
        for (const auto& r : person.records) {
            out << person.id << ',' << format_double(r.t) << ',' << r.action << ','
                << format_double(r.prob) << ',' << format_double(r.response);
            for (Eigen::Index k = 0; k < r.covariates.size(); ++k)
                out << ',' << format_double(r.covariates(k));
            for (Eigen::Index k = 0; k < r.history.size(); ++k)
                out << ',' << format_double(r.history(k));
            out << '\n';
        }
    }
    if (!out) throw Error("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Feature maps and stacking

FeatureMap FeatureMap::intercept_plus_identity(int num_moderators) {
    FeatureMap m;
    m.dim = num_moderators + 1;
    m.description = "intercept + identity on " + std::to_string(num_moderators) + " moderators";
    m.f = [](double, const Vec& s) {
        Vec out(s.size() + 1);
        out(0) = 1.0;
        out.tail(s.size()) = s;
        return out;
    };
    return m;
}

FeatureMap FeatureMap::identity(int num_moderators) {
    FeatureMap m;
    m.dim = num_moderators;
    m.description = "identity on " + std::to_string(num_moderators) + " moderators";
    m.f = [](double, const Vec& s) { return s; };
    return m;
}

ProbabilityMap constant_probability(double p) {
    return [p](double, const Vec&) { return p; };
}

StackedDesign StackedDesign::subset(const std::vector<int>& positions) const {
    StackedDesign out;
    int total = 0;
    for (int k : positions) total += rows(k);
    out.X.resize(total, p());
    out.Y.resize(total);
    out.offsets.reserve(positions.size() + 1);
    out.offsets.push_back(0);
    for (int k : positions) {
        const int start = out.offsets.back();
        out.X.middleRows(start, rows(k)) = Xi(k);
        out.Y.segment(start, rows(k)) = Yi(k);
        out.offsets.push_back(start + rows(k));
        out.ids.push_back(ids.at(k));
    }
    out.column_names = column_names;
    out.unpenalized = unpenalized;
    return out;
}

StackedDesign stack_design(const MrtDataset& data, const NuisanceModel* nuisance,
                           const FeatureMap& fmap, const ProbabilityMap& p_tilde,
                           IndexSet unpenalized) {
    StackedDesign d;
    const auto rows = static_cast<Eigen::Index>(data.num_rows());
    d.X.resize(rows, fmap.dim);
    d.Y.resize(rows);
    d.offsets.reserve(static_cast<std::size_t>(data.n()) + 1);
    d.offsets.push_back(0);
    Eigen::Index r = 0;
    for (const auto& person : data.participants()) {
        for (std::size_t t = 0; t < person.records.size(); ++t) {
            const Record& rec = person.records[t];
            if (!(rec.prob > 0.0 && rec.prob < 1.0))
                throw ValidationError("participant " + person.id + ": positivity violation");
            const double pt1 = p_tilde(rec.t, rec.covariates);
            if (!(pt1 >= 0.0 && pt1 <= 1.0))
                throw ValidationError("pseudo-randomization probability outside [0,1]");
            const double p_obs = rec.action == 1 ? rec.prob : 1.0 - rec.prob;
            const double p_num = rec.action == 1 ? pt1 : 1.0 - pt1;
            const double sw = std::sqrt(p_num / p_obs);
            const Vec f = fmap(rec.t, rec.covariates);
            if (f.size() != fmap.dim) throw ConfigError("feature map returned wrong dimension");
            const double g = nuisance ? nuisance->predict(person, t) : 0.0;
            d.X.row(r) = (sw * (rec.action - pt1)) * f.transpose();
            d.Y(r) = sw * (rec.response - g);
            ++r;
        }
        d.offsets.push_back(static_cast<int>(r));
        d.ids.push_back(person.id);
    }
    if (fmap.dim == data.num_moderators() + 1) {
        d.column_names.push_back("(intercept)");
        for (const auto& m : data.moderator_names()) d.column_names.push_back(m);
    } else {
        for (int k = 0; k < fmap.dim; ++k) d.column_names.push_back("f" + std::to_string(k));
    }
    std::sort(unpenalized.begin(), unpenalized.end());
    for (int j : unpenalized)
        if (j < 0 || j >= fmap.dim) throw ConfigError("unpenalized column out of range");
    d.unpenalized = std::move(unpenalized);
    return d;
}

}  // namespace mrtsi
