#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "tofu/metrics.hpp"
#include "tofu/rng.hpp"

using namespace tofu;

namespace {

// Independent entropy-table oracle for one slice: builds the full joint
// count table and evaluates the conditional-entropy definitions directly.
void oracle_scores(const std::vector<int>& clusters, const std::vector<int>& truth, double& h,
                   double& c) {
    const double n = double(clusters.size());
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> pc, pt;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        joint[{clusters[i], truth[i]}] += 1.0 / n;
        pc[clusters[i]] += 1.0 / n;
        pt[truth[i]] += 1.0 / n;
    }
    double h_t = 0.0, h_c = 0.0, h_t_given_c = 0.0, h_c_given_t = 0.0;
    for (auto& [_, p] : pt) h_t -= p * std::log(p);
    for (auto& [_, p] : pc) h_c -= p * std::log(p);
    for (auto& [key, p] : joint) {
        h_t_given_c -= p * std::log(p / pc[key.first]);
        h_c_given_t -= p * std::log(p / pt[key.second]);
    }
    h = h_t <= 0.0 ? 1.0 : 1.0 - h_t_given_c / h_t;
    c = h_c <= 0.0 ? 1.0 : 1.0 - h_c_given_t / h_c;
}

}  // namespace

TEST_CASE("accuracy: all correct, all wrong, half correct") {
    CHECK(accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(accuracy({1, 2, 3}, {0, 0, 0}) == 0.0);
    std::vector<int> pred(10, 1), truth(10, 1);
    for (int i = 0; i < 5; ++i) truth[std::size_t(i)] = 0;
    CHECK(accuracy(pred, truth) == 0.5);
}

TEST_CASE("accuracy: empty input throws") {
    CHECK_THROWS_AS(accuracy({}, {}), std::invalid_argument);
}

TEST_CASE("pearson: perfect and anti correlation") {
    std::vector<double> u = {1, 2, 3, 4, 5};
    std::vector<double> neg = {-1, -2, -3, -4, -5};
    CHECK(pearson(u, u) == doctest::Approx(1.0));
    CHECK(pearson(u, neg) == doctest::Approx(-1.0));
}

TEST_CASE("pearson: zero variance throws") {
    CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), std::domain_error);
}

TEST_CASE("pearson: invariant to positive affine maps, sign flips under negation") {
    Rng rng(5);
    std::vector<double> u(200), v(200);
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = rng.gaussian();
        v[i] = 0.7 * u[i] + rng.gaussian();
    }
    const double base = pearson(u, v);
    std::vector<double> u2 = u, v2 = v;
    for (auto& x : u2) x = 3.5 * x + 11.0;
    for (auto& x : v2) x = 0.25 * x - 4.0;
    CHECK(std::abs(pearson(u2, v2) - base) < 1e-12);
    std::vector<double> vneg = v;
    for (auto& x : vneg) x = -x;
    CHECK(pearson(u, vneg) == doctest::Approx(-base).epsilon(1e-12));
}

TEST_CASE("cluster_scores: clusters identical to truth score (1,1,1)") {
    LabeledClustering s{0, {0, 0, 1, 1, 2, 2}, {5, 5, 7, 7, 9, 9}};
    ClusterEvalReport r = cluster_scores({s});
    CHECK(r.homogeneity == doctest::Approx(1.0));
    CHECK(r.completeness == doctest::Approx(1.0));
    CHECK(r.v_measure == doctest::Approx(1.0));
}

TEST_CASE("cluster_scores: one cluster over two balanced truth classes") {
    LabeledClustering s{0, {0, 0, 0, 0}, {0, 0, 1, 1}};
    ClusterEvalReport r = cluster_scores({s});
    CHECK(r.homogeneity == doctest::Approx(0.0));
    CHECK(r.completeness == doctest::Approx(1.0));
    CHECK(r.v_measure == doctest::Approx(0.0));
}

TEST_CASE("cluster_scores: pure split of each truth class keeps homogeneity 1") {
    // truth classes {0,1}; each split into two pure clusters
    LabeledClustering s{0, {0, 1, 2, 3, 0, 1, 2, 3}, {0, 0, 1, 1, 0, 0, 1, 1}};
    ClusterEvalReport r = cluster_scores({s});
    CHECK(r.homogeneity == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.completeness < 1.0);
    double oh = 0.0, oc = 0.0;
    oracle_scores(s.cluster_ids, s.truth, oh, oc);
    CHECK(std::abs(r.homogeneity - oh) < 1e-12);
    CHECK(std::abs(r.completeness - oc) < 1e-12);
}

TEST_CASE("cluster_scores: single example scores 1 by convention") {
    LabeledClustering s{3, {0}, {4}};
    ClusterEvalReport r = cluster_scores({s});
    CHECK(r.homogeneity == 1.0);
    CHECK(r.completeness == 1.0);
}

TEST_CASE("cluster_scores: matches the entropy-table oracle on 200 random assignments") {
    for (int t = 0; t < 200; ++t) {
        Rng rng(std::uint64_t(9000 + t));
        const std::size_t n = 2 + std::size_t(rng.uniform_int(40));
        const int kc = 1 + rng.uniform_int(5);
        const int kt = 1 + rng.uniform_int(5);
        LabeledClustering s;
        s.label = 0;
        s.cluster_ids.resize(n);
        s.truth.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            s.cluster_ids[i] = rng.uniform_int(kc);
            s.truth[i] = rng.uniform_int(kt);
        }
        ClusterEvalReport r = cluster_scores({s});
        double oh = 0.0, oc = 0.0;
        oracle_scores(s.cluster_ids, s.truth, oh, oc);
        CHECK(std::abs(r.homogeneity - oh) < 1e-12);
        CHECK(std::abs(r.completeness - oc) < 1e-12);
        const double ov = (oh <= 0.0 || oc <= 0.0) ? 0.0 : 2.0 * oh * oc / (oh + oc);
        CHECK(std::abs(r.v_measure - ov) < 1e-12);

        CHECK(r.homogeneity >= -1e-12);
        CHECK(r.homogeneity <= 1.0 + 1e-12);
        CHECK(r.completeness >= -1e-12);
        CHECK(r.completeness <= 1.0 + 1e-12);
        CHECK(r.v_measure <= std::max(r.homogeneity, r.completeness) + 1e-12);
        CHECK(r.v_measure >= -1e-12);
    }
}

TEST_CASE("cluster_scores: permuting cluster ids leaves every score unchanged") {
    Rng rng(101);
    LabeledClustering s;
    s.label = 0;
    for (int i = 0; i < 60; ++i) {
        s.cluster_ids.push_back(rng.uniform_int(4));
        s.truth.push_back(rng.uniform_int(3));
    }
    ClusterEvalReport a = cluster_scores({s});
    const int perm[4] = {2, 3, 1, 0};
    LabeledClustering sp = s;
    for (auto& c : sp.cluster_ids) c = perm[c];
    ClusterEvalReport b = cluster_scores({sp});
    CHECK(std::abs(a.homogeneity - b.homogeneity) < 1e-12);
    CHECK(std::abs(a.completeness - b.completeness) < 1e-12);
    CHECK(std::abs(a.v_measure - b.v_measure) < 1e-12);
}

TEST_CASE("cluster_scores: splitting a cluster never decreases homogeneity") {
    for (int t = 0; t < 50; ++t) {
        Rng rng(std::uint64_t(500 + t));
        const std::size_t n = 6 + std::size_t(rng.uniform_int(30));
        LabeledClustering s;
        s.label = 0;
        for (std::size_t i = 0; i < n; ++i) {
            s.cluster_ids.push_back(rng.uniform_int(3));
            s.truth.push_back(rng.uniform_int(3));
        }
        ClusterEvalReport before = cluster_scores({s});
        // split cluster 0 into 0 and a fresh id by coin flip
        LabeledClustering split = s;
        for (auto& c : split.cluster_ids)
            if (c == 0 && rng.bernoulli(0.5)) c = 99;
        ClusterEvalReport after = cluster_scores({split});
        CHECK(after.homogeneity >= before.homogeneity - 1e-12);
    }
}

TEST_CASE("cluster_scores: per-label aggregation is an unweighted mean") {
    LabeledClustering a{0, {0, 1}, {0, 1}};          // perfect, tiny slice
    LabeledClustering b{1, {0, 0, 0, 0}, {0, 0, 1, 1}};  // homogeneity 0, larger slice
    ClusterEvalReport r = cluster_scores({a, b});
    CHECK(r.homogeneity == doctest::Approx(0.5));
    REQUIRE(r.per_label.size() == 2);
    CHECK(r.per_label[0].homogeneity == doctest::Approx(1.0));
    CHECK(r.per_label[1].homogeneity == doctest::Approx(0.0));
}
