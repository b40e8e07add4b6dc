#pragma once
#include <array>
#include <cmath>
#include <stdexcept>

#include "tofu/mat.hpp"
#include "tofu/rng.hpp"

namespace tofu {

struct Pca2 {
    Mat projections;                       // n x 2
    std::array<double, 2> explained{0, 0}; // top-2 covariance eigenvalues, non-increasing
    Mat components;                        // 2 x d
    bool degenerate = false;               // rank-0 input (all points identical)
};

namespace detail {

// Largest eigenpair of a symmetric matrix by power iteration.
inline double power_iteration(const Mat& s, std::vector<double>& v, std::uint64_t seed) {
    const std::size_t d = s.rows;
    Rng rng(mix_seed(seed, 0x9c0a));
    v.assign(d, 0.0);
    for (double& x : v) x = rng.gaussian();
    double lambda = 0.0;
    for (int it = 0; it < 1000; ++it) {
        std::vector<double> w(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            const double* si = s.row(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += si[j] * v[j];
            w[i] = acc;
        }
        double nrm = std::sqrt(sq_norm(w));
        if (nrm < 1e-300) { v.assign(d, 0.0); return 0.0; }
        for (std::size_t i = 0; i < d; ++i) w[i] /= nrm;
        double diff = 0.0;
        for (std::size_t i = 0; i < d; ++i) diff = std::max(diff, std::abs(std::abs(w[i]) - std::abs(v[i])));
        v = std::move(w);
        double next = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double* si = s.row(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += si[j] * v[j];
            next += v[i] * acc;
        }
        lambda = next;
        if (diff < 1e-13 && it > 2) break;
    }
    // deterministic sign: largest-magnitude component positive
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i)
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0.0)
        for (double& x : v) x = -x;
    return lambda;
}

}  // namespace detail

// Mean-centered projection onto the top-2 covariance eigenvectors
// (power iteration with deflation).
inline Pca2 pca2(const Mat& points) {
    if (points.rows < 3) throw std::invalid_argument("pca2: need at least 3 points");
    if (!points.finite()) throw std::invalid_argument("pca2: non-finite input");
    const std::size_t n = points.rows, d = points.cols;
    std::vector<double> mean = col_mean(points);
    Mat centered(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) centered(i, j) = points(i, j) - mean[j];

    Mat cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = centered.row(i);
        for (std::size_t r = 0; r < d; ++r) {
            const double xr = xi[r];
            double* cr = cov.row(r);
            for (std::size_t c = 0; c < d; ++c) cr[c] += xr * xi[c];
        }
    }
    for (double& v : cov.a) v /= double(n);

    Pca2 out;
    out.projections = Mat(n, 2);
    out.components = Mat(2, d);
    double total = 0.0;
    for (std::size_t r = 0; r < d; ++r) total += cov(r, r);
    if (total < 1e-15) {
        out.degenerate = true;
        return out;
    }

    std::vector<double> v1, v2;
    const double l1 = detail::power_iteration(cov, v1, 1);
    Mat deflated = cov;
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) deflated(r, c) -= l1 * v1[r] * v1[c];
    const double l2 = detail::power_iteration(deflated, v2, 2);

    out.explained = {std::max(l1, 0.0), std::max(l2, 0.0)};
    for (std::size_t j = 0; j < d; ++j) {
        out.components(0, j) = v1.empty() ? 0.0 : v1[j];
        out.components(1, j) = v2.empty() ? 0.0 : v2[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = centered.row(i);
        double p1 = 0.0, p2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            p1 += xi[j] * out.components(0, j);
            p2 += xi[j] * out.components(1, j);
        }
        out.projections(i, 0) = p1;
        out.projections(i, 1) = p2;
    }
    return out;
}

}  // namespace tofu
