#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace npe {

// Dense row-major matrix of 64-bit floats. The single tensor type used for
// features, weights, logits and gradients. All reductions run sequentially
// in row-major order so results are bit-reproducible for a fixed seed.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;  // row-major, rows*cols entries

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

    double& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }

    double* row(std::size_t i) { return v.data() + i * cols; }
    const double* row(std::size_t i) const { return v.data() + i * cols; }

    std::size_t size() const { return v.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

inline bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.v == b.v;
}

inline void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

// c = a * b^T, (n×k)·(m×k)^T -> n×m. Main path for logits: h·W^T.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require(a.cols == b.cols, "matmul_nt: inner dimensions differ");
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* bj = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
            ci[j] = s;
        }
    }
    return c;
}

// c = a^T * b, (k×n)^T·(k×m) -> n×m. Main path for weight grads: delta^T·acts.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require(a.rows == b.rows, "matmul_tn: inner dimensions differ");
    Matrix c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* ak = a.row(k);
        const double* bk = b.row(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            double* ci = c.row(i);
            const double aki = ak[i];
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

// c = a * b, (n×k)·(k×m) -> n×m.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols == b.rows, "matmul: inner dimensions differ");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = ai[k];
            const double* bk = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

inline void add_inplace(Matrix& a, const Matrix& b) {
    require(a.same_shape(b), "add_inplace: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a.v[i] += b.v[i];
}

// a += s*b
inline void axpy(Matrix& a, double s, const Matrix& b) {
    require(a.same_shape(b), "axpy: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a.v[i] += s * b.v[i];
}

inline Matrix scaled(const Matrix& a, double s) {
    Matrix c = a;
    for (double& x : c.v) x *= s;
    return c;
}

// Column sums of a (n×m), returned as an m×1 column (bias-gradient shape).
inline Matrix column_sums(const Matrix& a) {
    Matrix c(a.cols, 1);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        for (std::size_t j = 0; j < a.cols; ++j) c.v[j] += ai[j];
    }
    return c;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    require(a.same_shape(b), "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

}  // namespace npe
