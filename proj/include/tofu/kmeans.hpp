#pragma once
#include <limits>
#include <stdexcept>
#include <vector>

#include "tofu/mat.hpp"
#include "tofu/rng.hpp"

namespace tofu {

struct KmeansResult {
    Mat centroids;                // k x d
    std::vector<int> assignment;  // per point
    double inertia = 0.0;         // sum of squared distances to the assigned centroid
};

namespace detail {

inline Mat kmeanspp_seed(const Mat& pts, std::size_t k, Rng& rng) {
    const std::size_t n = pts.rows, d = pts.cols;
    Mat centers(k, d);
    std::vector<double> best_d2(n, std::numeric_limits<double>::max());
    std::size_t first = std::size_t(rng.uniform_int(int(n)));
    for (std::size_t j = 0; j < d; ++j) centers(0, j) = pts(first, j);
    for (std::size_t i = 0; i < n; ++i) best_d2[i] = sq_dist(pts.row(i), centers.row(0), d);
    for (std::size_t c = 1; c < k; ++c) {
        double sum = 0.0;
        for (double v : best_d2) sum += v;
        std::size_t pick = 0;
        if (sum <= 0.0) {
            pick = std::size_t(rng.uniform_int(int(n)));
        } else {
            double r = rng.uniform() * sum, cum = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                cum += best_d2[i];
                if (r <= cum) { pick = i; break; }
            }
        }
        for (std::size_t j = 0; j < d; ++j) centers(c, j) = pts(pick, j);
        for (std::size_t i = 0; i < n; ++i) {
            const double d2 = sq_dist(pts.row(i), centers.row(c), d);
            if (d2 < best_d2[i]) best_d2[i] = d2;
        }
    }
    return centers;
}

inline double lloyd(const Mat& pts, Mat& centers, std::vector<int>& assign, int max_iters) {
    const std::size_t n = pts.rows, d = pts.cols, k = centers.rows;
    assign.assign(n, -1);
    double inertia = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        bool changed = false;
        inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            int arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d2 = sq_dist(pts.row(i), centers.row(c), d);
                if (d2 < best) { best = d2; arg = int(c); }
            }
            if (assign[i] != arg) { assign[i] = arg; changed = true; }
            inertia += best;
        }
        if (!changed && it > 0) break;
        // recompute means; an emptied cluster is re-seeded at the farthest point
        Mat sums(k, d);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            double* s = sums.row(std::size_t(assign[i]));
            const double* p = pts.row(i);
            for (std::size_t j = 0; j < d; ++j) s[j] += p[j];
            counts[std::size_t(assign[i])]++;
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                std::size_t far = 0;
                double far_d2 = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d2 = sq_dist(pts.row(i), centers.row(std::size_t(assign[i])), d);
                    if (d2 > far_d2) { far_d2 = d2; far = i; }
                }
                for (std::size_t j = 0; j < d; ++j) centers(c, j) = pts(far, j);
            } else {
                for (std::size_t j = 0; j < d; ++j) centers(c, j) = sums(c, j) / double(counts[c]);
            }
        }
    }
    // final assignment pass so inertia matches the returned centers
    inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::max();
        int arg = 0;
        for (std::size_t c = 0; c < k; ++c) {
            const double d2 = sq_dist(pts.row(i), centers.row(c), d);
            if (d2 < best) { best = d2; arg = int(c); }
        }
        assign[i] = arg;
        inertia += best;
    }
    return inertia;
}

// Single-point move refinement (Hartigan-Wong step). Lloyd fixed points can
// still admit a strictly improving reassignment of one point because moving
// a point also moves both centroids; apply such moves until none remain.
inline double refine_single_moves(const Mat& pts, Mat& centers, std::vector<int>& assign,
                                  int max_passes = 100) {
    const std::size_t n = pts.rows, d = pts.cols, k = centers.rows;
    std::vector<std::size_t> counts(k, 0);
    Mat sums(k, d);
    for (std::size_t i = 0; i < n; ++i) {
        counts[std::size_t(assign[i])]++;
        double* s = sums.row(std::size_t(assign[i]));
        const double* p = pts.row(i);
        for (std::size_t j = 0; j < d; ++j) s[j] += p[j];
    }
    auto centroid = [&](std::size_t c, std::size_t j) { return sums(c, j) / double(counts[c]); };
    for (int pass = 0; pass < max_passes; ++pass) {
        bool moved = false;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t a = std::size_t(assign[i]);
            if (counts[a] <= 1) continue;
            double da = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = pts(i, j) - centroid(a, j);
                da += diff * diff;
            }
            const double removal_gain = double(counts[a]) / double(counts[a] - 1) * da;
            double best_delta = -1e-12;
            std::size_t best_c = a;
            for (std::size_t c = 0; c < k; ++c) {
                if (c == a) continue;
                double dc = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = pts(i, j) - centroid(c, j);
                    dc += diff * diff;
                }
                const double insertion_cost = double(counts[c]) / double(counts[c] + 1) * dc;
                const double delta = insertion_cost - removal_gain;
                if (delta < best_delta) {
                    best_delta = delta;
                    best_c = c;
                }
            }
            if (best_c != a) {
                for (std::size_t j = 0; j < d; ++j) {
                    sums(a, j) -= pts(i, j);
                    sums(best_c, j) += pts(i, j);
                }
                counts[a]--;
                counts[best_c]++;
                assign[i] = int(best_c);
                moved = true;
            }
        }
        if (!moved) break;
    }
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < d; ++j) centers(c, j) = centroid(c, j);
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        inertia += sq_dist(pts.row(i), centers.row(std::size_t(assign[i])), d);
    return inertia;
}

}  // namespace detail

// Lloyd's iterations with k-means++ seeding, a single-point-move refinement
// pass, best of `restarts` by inertia.
inline KmeansResult kmeans(const Mat& points, std::size_t k, std::uint64_t seed,
                           int restarts = 10, int max_iters = 200) {
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (points.rows < k)
        throw std::invalid_argument("kmeans: fewer points (" + std::to_string(points.rows) +
                                    ") than clusters (" + std::to_string(k) + ")");
    KmeansResult best;
    best.inertia = std::numeric_limits<double>::max();
    for (int r = 0; r < restarts; ++r) {
        Rng rng(mix_seed(seed, std::uint64_t(r)));
        Mat centers = detail::kmeanspp_seed(points, k, rng);
        std::vector<int> assign;
        detail::lloyd(points, centers, assign, max_iters);
        const double inertia = detail::refine_single_moves(points, centers, assign);
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.centroids = std::move(centers);
            best.assignment = std::move(assign);
        }
    }
    return best;
}

}  // namespace tofu
