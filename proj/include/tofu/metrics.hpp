#pragma once
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace tofu {

inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("accuracy: length mismatch");
    if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++hits;
    return double(hits) / double(predictions.size());
}

inline double pearson(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) throw std::invalid_argument("pearson: length mismatch");
    if (u.size() < 2) throw std::invalid_argument("pearson: need at least 2 samples");
    const double n = double(u.size());
    double mu = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) { mu += u[i]; mv += v[i]; }
    mu /= n; mv /= n;
    double suu = 0.0, svv = 0.0, suv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double du = u[i] - mu, dv = v[i] - mv;
        suu += du * du; svv += dv * dv; suv += du * dv;
    }
    if (suu <= 0.0 || svv <= 0.0)
        throw std::domain_error("pearson: zero variance");
    return suv / std::sqrt(suu * svv);
}

// One label slice of a clustering to be scored against hidden truth values.
struct LabeledClustering {
    int label = 0;
    std::vector<int> cluster_ids;
    std::vector<int> truth;
};

struct ClusterEvalReport {
    double homogeneity = 0.0, completeness = 0.0, v_measure = 0.0;
    struct PerLabel {
        int label;
        double homogeneity, completeness, v_measure;
        std::size_t count;
    };
    std::vector<PerLabel> per_label;
};

namespace detail {

// homogeneity = 1 - H(truth|cluster)/H(truth), completeness with roles
// swapped; entropies in nats (the ratio is base-independent).
inline void entropy_scores(const std::vector<int>& clusters, const std::vector<int>& truth,
                           double& homogeneity, double& completeness) {
    const std::size_t n = clusters.size();
    std::map<int, std::size_t> nc, nt;
    std::map<std::pair<int, int>, std::size_t> joint;
    for (std::size_t i = 0; i < n; ++i) {
        nc[clusters[i]]++;
        nt[truth[i]]++;
        joint[{clusters[i], truth[i]}]++;
    }
    auto entropy = [&](const std::map<int, std::size_t>& counts) {
        double h = 0.0;
        for (auto& [_, c] : counts) {
            const double p = double(c) / double(n);
            if (p > 0.0) h -= p * std::log(p);
        }
        return h;
    };
    const double h_truth = entropy(nt);
    const double h_clust = entropy(nc);
    double h_truth_given_clust = 0.0, h_clust_given_truth = 0.0;
    for (auto& [key, c] : joint) {
        const double p = double(c) / double(n);
        h_truth_given_clust -= p * std::log(double(c) / double(nc[key.first]));
        h_clust_given_truth -= p * std::log(double(c) / double(nt[key.second]));
    }
    homogeneity = h_truth <= 0.0 ? 1.0 : 1.0 - h_truth_given_clust / h_truth;
    completeness = h_clust <= 0.0 ? 1.0 : 1.0 - h_clust_given_truth / h_clust;
}

}  // namespace detail

// Cluster agreement against hidden truth: scores computed per label, then
// averaged unweighted across labels. V is the harmonic mean (0 if either
// side is 0). Single-example slices score 1 by the zero-entropy convention.
inline ClusterEvalReport cluster_scores(const std::vector<LabeledClustering>& slices) {
    if (slices.empty()) throw std::invalid_argument("cluster_scores: no label slices");
    ClusterEvalReport rep;
    for (const auto& s : slices) {
        if (s.cluster_ids.size() != s.truth.size())
            throw std::invalid_argument("cluster_scores: slice length mismatch");
        if (s.cluster_ids.empty()) throw std::invalid_argument("cluster_scores: empty slice");
        double h = 0.0, c = 0.0;
        detail::entropy_scores(s.cluster_ids, s.truth, h, c);
        const double v = (h <= 0.0 || c <= 0.0) ? 0.0 : 2.0 * h * c / (h + c);
        rep.per_label.push_back({s.label, h, c, v, s.cluster_ids.size()});
    }
    for (const auto& pl : rep.per_label) {
        rep.homogeneity += pl.homogeneity;
        rep.completeness += pl.completeness;
        rep.v_measure += pl.v_measure;
    }
    const double m = double(rep.per_label.size());
    rep.homogeneity /= m;
    rep.completeness /= m;
    rep.v_measure /= m;
    return rep;
}

}  // namespace tofu
