#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mrtsi/common.hpp"

namespace mrtsi {

/// One decision time for one participant.
struct Record {
    double t = 0.0;
    Vec covariates;    // moderators S_it
    int action = 0;    // A_it in {0, 1}
    double prob = 0.5; // P(A_it = 1 | H_it), strictly inside (0, 1)
    double response = 0.0;
    Vec history;       // extra history features for the nuisance model (may be empty)
};

struct Participant {
    std::string id;
    std::vector<Record> records;  // sorted by t
};

/// Longitudinal MRT observations. Participants are the independent units.
class MrtDataset {
public:
    MrtDataset() = default;
    /// Validates positivity, binary actions, finite responses and
    /// consistent covariate dimensions.
    MrtDataset(std::vector<Participant> participants, std::vector<std::string> moderator_names,
               std::vector<std::string> history_names = {});

    int n() const { return static_cast<int>(participants_.size()); }
    int num_moderators() const { return static_cast<int>(moderator_names_.size()); }
    int num_history() const { return static_cast<int>(history_names_.size()); }
    std::size_t num_rows() const;

    const std::vector<Participant>& participants() const { return participants_; }
    const Participant& participant(int i) const { return participants_.at(i); }
    const std::vector<std::string>& moderator_names() const { return moderator_names_; }
    const std::vector<std::string>& history_names() const { return history_names_; }

    /// Dataset restricted to the given participant positions, in that order.
    MrtDataset subset(const std::vector<int>& positions) const;

private:
    std::vector<Participant> participants_;
    std::vector<std::string> moderator_names_;
    std::vector<std::string> history_names_;
};

/// Column mapping for CSV ingestion. Empty `moderators` means "every
/// remaining column, in header order".
struct CsvSchema {
    std::string id = "id";
    std::string time = "t";
    std::string action = "action";
    std::string prob = "prob";
    std::string response = "response";
    std::vector<std::string> moderators;
    std::vector<std::string> history;
};

struct IngestResult {
    MrtDataset data;
    std::size_t dropped_rows = 0;
};

IngestResult ingest_csv(const std::string& path, const CsvSchema& schema = {});
/// Writes `data` in the ingestion schema with round-trip precision.
void write_csv(const MrtDataset& data, const std::string& path, const CsvSchema& schema = {});

/// Moderator feature map f_t(S) -> R^p.
struct FeatureMap {
    std::function<Vec(double t, const Vec& s)> f;
    int dim = 0;
    std::string description;

    Vec operator()(double t, const Vec& s) const { return f(t, s); }

    /// f_t(S) = (1, S); column 0 is the unpenalized intercept.
    static FeatureMap intercept_plus_identity(int num_moderators);
    static FeatureMap identity(int num_moderators);
};

/// Pseudo-randomization probability p~(1 | t, S) used in the weights.
using ProbabilityMap = std::function<double(double t, const Vec& s)>;
ProbabilityMap constant_probability(double p);

class NuisanceModel;

/// Per-participant transformed design: rows are
/// sqrt(W) (A - p~) f_t(S) and responses sqrt(W) (Y - g~(H)).
/// Participants are stored contiguously; block i spans rows
/// [offset(i), offset(i+1)).
struct StackedDesign {
    Mat X;
    Vec Y;
    std::vector<int> offsets;  // size n + 1
    std::vector<std::string> ids;
    std::vector<std::string> column_names;
    IndexSet unpenalized;  // columns exempt from the l1 penalty

    int n() const { return static_cast<int>(offsets.size()) - 1; }
    int p() const { return static_cast<int>(X.cols()); }
    int rows(int i) const { return offsets[i + 1] - offsets[i]; }
    auto Xi(int i) const { return X.middleRows(offsets[i], rows(i)); }
    auto Yi(int i) const { return Y.segment(offsets[i], rows(i)); }

    /// Participants at `positions`, in that order.
    StackedDesign subset(const std::vector<int>& positions) const;
};

/// Builds the stacked design. `nuisance` may be null, meaning g~ = 0.
/// Throws ValidationError on a positivity violation.
StackedDesign stack_design(const MrtDataset& data, const NuisanceModel* nuisance,
                           const FeatureMap& fmap, const ProbabilityMap& p_tilde,
                           IndexSet unpenalized = {0});

}  // namespace mrtsi
