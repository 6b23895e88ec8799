#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrtsi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

/// Sorted column indices into a design matrix.
using IndexSet = std::vector<int>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration or precondition (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input parsed but violates a data invariant (e.g. positivity).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Numerical failure (CLI exit code 3).
class NumericError : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public NumericError {
public:
    SingularMatrixError(const std::string& what, IndexSet columns)
        : NumericError(what), columns_(std::move(columns)) {}
    const IndexSet& columns() const noexcept { return columns_; }

private:
    IndexSet columns_;
};

/// Complement of `set` in {0, ..., p-1}; `set` must be sorted.
IndexSet complement(const IndexSet& set, int p);

/// Rows/columns of `m` restricted to the given index sets.
Mat submatrix(const Mat& m, const IndexSet& rows, const IndexSet& cols);
Vec subvector(const Vec& v, const IndexSet& idx);

std::string format_index_set(const IndexSet& set);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace mrtsi
