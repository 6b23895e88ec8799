#include "mrtsi/common.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace mrtsi {

IndexSet complement(const IndexSet& set, int p) {
    IndexSet out;
    out.reserve(static_cast<std::size_t>(p) - set.size());
    std::size_t k = 0;
    for (int j = 0; j < p; ++j) {
        if (k < set.size() && set[k] == j) {
            ++k;
        } else {
            out.push_back(j);
        }
    }
    return out;
}

Mat submatrix(const Mat& m, const IndexSet& rows, const IndexSet& cols) {
    Mat out(rows.size(), cols.size());
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b) out(a, b) = m(rows[a], cols[b]);
    return out;
}

Vec subvector(const Vec& v, const IndexSet& idx) {
    Vec out(idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) out(a) = v(idx[a]);
    return out;
}

std::string format_index_set(const IndexSet& set) {
    std::ostringstream os;
    os << '{';
    for (std::size_t k = 0; k < set.size(); ++k) os << (k ? "," : "") << set[k];
    os << '}';
    return os.str();
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace mrtsi
