#pragma once
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tofu {

// Dense row-major matrix of 64-bit reals.
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
    double* row(std::size_t i) { return a.data() + i * cols; }
    const double* row(std::size_t i) const { return a.data() + i * cols; }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    bool finite() const {
        for (double v : a)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline Mat matmul(const Mat& x, const Mat& w) {
    if (x.cols != w.rows)
        throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(x.cols) +
                                    " vs " + std::to_string(w.rows) + ")");
    Mat out(x.rows, w.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        double* oi = out.row(i);
        for (std::size_t k = 0; k < x.cols; ++k) {
            const double xv = xi[k];
            const double* wk = w.row(k);
            for (std::size_t j = 0; j < w.cols; ++j) oi[j] += xv * wk[j];
        }
    }
    return out;
}

// x^T * y, for gradient accumulation.
inline Mat matmul_at(const Mat& x, const Mat& y) {
    if (x.rows != y.rows) throw std::invalid_argument("matmul_at: row counts differ");
    Mat out(x.cols, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        const double* yi = y.row(i);
        for (std::size_t k = 0; k < x.cols; ++k) {
            const double xv = xi[k];
            double* ok = out.row(k);
            for (std::size_t j = 0; j < y.cols; ++j) ok[j] += xv * yi[j];
        }
    }
    return out;
}

// x * y^T.
inline Mat matmul_bt(const Mat& x, const Mat& y) {
    if (x.cols != y.cols) throw std::invalid_argument("matmul_bt: col counts differ");
    Mat out(x.rows, y.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        double* oi = out.row(i);
        for (std::size_t j = 0; j < y.rows; ++j) {
            const double* yj = y.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < x.cols; ++k) s += xi[k] * yj[k];
            oi[j] = s;
        }
    }
    return out;
}

inline Mat take_rows(const Mat& x, const std::vector<std::size_t>& idx) {
    Mat out(idx.size(), x.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double* src = x.row(idx[i]);
        double* dst = out.row(i);
        for (std::size_t j = 0; j < x.cols; ++j) dst[j] = src[j];
    }
    return out;
}

inline std::vector<double> col_mean(const Mat& x) {
    std::vector<double> m(x.cols, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        for (std::size_t j = 0; j < x.cols; ++j) m[j] += xi[j];
    }
    if (x.rows > 0)
        for (double& v : m) v /= double(x.rows);
    return m;
}

inline double sq_dist(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double sq_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace tofu
