#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "nardf/common.hpp"

namespace nardf {

// ============================================================================
// Single-letter distortion, applied through the shift:
//   d(x^n, y^n) = sum_{i=0}^{n} rho(x_i, y_i)
// Callers divide by n+1 for the per-symbol value.  Two kinds: a finite
// |X| x |Y| table, or squared error ||x - y||^2 on real vectors.
// ============================================================================

enum class DistortionKind { single_letter_table, squared_error };

struct DistortionSpec {
    DistortionKind kind = DistortionKind::squared_error;
    Eigen::MatrixXd table;  // finite case only

    static DistortionSpec from_table(const Eigen::MatrixXd& table) {
        for (Eigen::Index r = 0; r < table.rows(); ++r)
            for (Eigen::Index c = 0; c < table.cols(); ++c)
                if (!std::isfinite(table(r, c)) || table(r, c) < 0.0)
                    throw Error("distortion table entries must be finite and nonnegative");
        return DistortionSpec{DistortionKind::single_letter_table, table};
    }

    static DistortionSpec hamming(int alphabet_x, int alphabet_y) {
        Eigen::MatrixXd table = Eigen::MatrixXd::Ones(alphabet_x, alphabet_y);
        for (int i = 0; i < std::min(alphabet_x, alphabet_y); ++i) table(i, i) = 0.0;
        return DistortionSpec{DistortionKind::single_letter_table, table};
    }

    static DistortionSpec squared() { return DistortionSpec{}; }

    double letter(int x, int y) const { return table(x, y); }
};

namespace detail {

inline void require_single_letter(const DistortionSpec& rho, int nx, int ny) {
    if (rho.kind != DistortionKind::single_letter_table)
        throw Error("finite-alphabet solver requires a single-letter distortion table");
    if (rho.table.rows() < nx || rho.table.cols() < ny)
        throw DimensionError("distortion table smaller than the source/reproduction alphabets");
}

}  // namespace detail

inline double evaluate_distortion(const DistortionSpec& spec, const std::vector<int>& x_seq,
                                  const std::vector<int>& y_seq) {
    if (spec.kind != DistortionKind::single_letter_table)
        throw Error("finite sequences require a single-letter distortion table");
    if (x_seq.size() != y_seq.size())
        throw DimensionError("distortion: source and reproduction sequences differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < x_seq.size(); ++i) total += spec.letter(x_seq[i], y_seq[i]);
    return total;
}

// squared-error path; sequences are columns of x_seq / y_seq
inline double evaluate_distortion(const DistortionSpec& spec, const Eigen::MatrixXd& x_seq,
                                  const Eigen::MatrixXd& y_seq) {
    if (spec.kind != DistortionKind::squared_error)
        throw Error("vector sequences require the squared-error distortion");
    if (x_seq.rows() != y_seq.rows() || x_seq.cols() != y_seq.cols())
        throw DimensionError("distortion: source and reproduction sequences differ in shape");
    return (x_seq - y_seq).squaredNorm();
}

}  // namespace nardf
