#pragma once
#include <stdexcept>
#include <vector>

#include "tofu/data.hpp"
#include "tofu/kmeans.hpp"
#include "tofu/metrics.hpp"
#include "tofu/nn.hpp"
#include "tofu/train.hpp"

namespace tofu {

// Per-label clusters in the encoder space. Clusters never mix labels; a label
// with fewer examples than n_c falls back to a single cluster.
struct LabelClusters {
    int label = 0;
    Mat centroids;
    std::vector<std::size_t> example_indices;  // into the environment
    std::vector<int> cluster_of;               // parallel to example_indices
    bool fell_back = false;
};

struct ClusterAssignment {
    std::size_t n_c = 2;
    std::vector<LabelClusters> per_label;

    // group id = label * n_c + cluster, dense over the environment
    std::vector<int> flat_groups(std::size_t env_size) const {
        std::vector<int> g(env_size, -1);
        for (const auto& lc : per_label)
            for (std::size_t i = 0; i < lc.example_indices.size(); ++i)
                g[lc.example_indices[i]] = lc.label * int(n_c) + lc.cluster_of[i];
        return g;
    }

    std::vector<std::vector<std::size_t>> group_index_lists() const {
        std::vector<std::vector<std::size_t>> groups;
        for (const auto& lc : per_label) {
            const std::size_t k = lc.centroids.rows;
            std::vector<std::vector<std::size_t>> local(k);
            for (std::size_t i = 0; i < lc.example_indices.size(); ++i)
                local[std::size_t(lc.cluster_of[i])].push_back(lc.example_indices[i]);
            for (auto& g : local)
                if (!g.empty()) groups.push_back(std::move(g));
        }
        return groups;
    }
};

inline Mat encode(const ModelParams& f_z, const Mat& X) { return forward_eval(f_z, X); }

// K-means per label value in the f_Z space.
inline ClusterAssignment cluster_by_label(const ModelParams& f_z, const Environment& env,
                                          std::size_t n_c, std::uint64_t seed) {
    if (n_c < 1) throw std::invalid_argument("cluster_by_label: n_c must be >= 1");
    const Mat emb = encode(f_z, env.features());
    const auto& y = env.labels();
    const int k_labels = env.spec().num_classes;

    ClusterAssignment out;
    out.n_c = n_c;
    for (int label = 0; label < k_labels; ++label) {
        LabelClusters lc;
        lc.label = label;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == label) lc.example_indices.push_back(i);
        if (lc.example_indices.empty()) continue;
        Mat pts = take_rows(emb, lc.example_indices);
        std::size_t k = n_c;
        if (pts.rows < n_c) {
            k = 1;
            lc.fell_back = true;
        }
        KmeansResult km = kmeans(pts, k, mix_seed(seed, std::uint64_t(label)));
        lc.centroids = std::move(km.centroids);
        lc.cluster_of = std::move(km.assignment);
        out.per_label.push_back(std::move(lc));
    }
    return out;
}

// Worst-cluster accuracy on an environment whose groups are induced by f_Z.
inline double worst_cluster_val_accuracy(const ModelParams& model, const ModelParams& f_z,
                                         const Environment& val_env, std::size_t n_c,
                                         std::uint64_t seed) {
    if (val_env.size() == 0) throw std::invalid_argument("worst_cluster_val_accuracy: empty env");
    const ClusterAssignment ca = cluster_by_label(f_z, val_env, n_c, seed);
    return worst_group_accuracy(model, val_env.features(), val_env.labels(), ca.group_index_lists());
}

// Group-DRO over the f_Z-derived clusters of a training environment; the
// validation criterion is supplied by the caller (worst-cluster accuracy for
// the transfer pipeline).
inline TrainResult group_dro_train(const Environment& env, const ClusterAssignment& clusters,
                                   const TrainConfig& cfg, const ValFn& val_fn,
                                   bool record_curve = false) {
    const auto groups = clusters.group_index_lists();
    if (groups.size() < 1) throw std::invalid_argument("group_dro_train: no groups");
    return dro_train(env.features(), env.labels(), groups, std::size_t(env.spec().num_classes), cfg,
                     val_fn, record_curve);
}

// Score per-label clusters against the hidden unstable values (evaluation
// only: reads the environment's truth).
inline ClusterEvalReport score_clusters(const ClusterAssignment& ca, const Environment& env) {
    const HiddenTruth& t = env.truth();
    std::vector<LabeledClustering> slices;
    for (const auto& lc : ca.per_label) {
        LabeledClustering s;
        s.label = lc.label;
        s.cluster_ids = lc.cluster_of;
        for (std::size_t i : lc.example_indices) s.truth.push_back(t.z[i]);
        slices.push_back(std::move(s));
    }
    return cluster_scores(slices);
}

}  // namespace tofu
