#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace splloc {

// Row-major matrix of doubles. Rows are snippets, columns are feature dims.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * static_cast<size_t>(cols), fill) {
        assert(rows >= 0 && cols >= 0);
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& at(int r, int c) {
        assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
        return data_[static_cast<size_t>(r) * cols_ + c];
    }
    double at(int r, int c) const {
        assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
        return data_[static_cast<size_t>(r) * cols_ + c];
    }

    std::span<double> row(int r) {
        assert(r >= 0 && r < rows_);
        return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
    }
    std::span<const double> row(int r) const {
        assert(r >= 0 && r < rows_);
        return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
    }

    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Zero-norm vectors have undefined direction; similarity is defined as 0 there.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

// Mean of rows [begin, end); requires a non-empty range.
inline std::vector<double> mean_rows(const Matrix& m, int begin, int end) {
    assert(begin >= 0 && begin < end && end <= m.rows());
    std::vector<double> out(m.cols(), 0.0);
    for (int r = begin; r < end; ++r) {
        auto row = m.row(r);
        for (int c = 0; c < m.cols(); ++c) out[c] += row[c];
    }
    const double inv = 1.0 / static_cast<double>(end - begin);
    for (double& v : out) v *= inv;
    return out;
}

// Copy with the column means over all rows subtracted. Used to restore
// angular structure before cosine comparisons; Euclidean distances between
// rows are unchanged by the shift.
inline Matrix center_rows(const Matrix& m) {
    Matrix out = m;
    if (m.rows() == 0) return out;
    std::vector<double> mean(m.cols(), 0.0);
    for (int r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (int c = 0; c < m.cols(); ++c) mean[c] += row[c];
    }
    for (double& v : mean) v /= m.rows();
    for (int r = 0; r < m.rows(); ++r) {
        auto row = out.row(r);
        for (int c = 0; c < m.cols(); ++c) row[c] -= mean[c];
    }
    return out;
}

// Copy of rows [begin, end) as a new matrix.
inline Matrix slice_rows(const Matrix& m, int begin, int end) {
    assert(begin >= 0 && begin <= end && end <= m.rows());
    Matrix out(end - begin, m.cols());
    for (int r = begin; r < end; ++r) {
        auto src = m.row(r);
        auto dst = out.row(r - begin);
        for (int c = 0; c < m.cols(); ++c) dst[c] = src[c];
    }
    return out;
}

}  // namespace splloc
