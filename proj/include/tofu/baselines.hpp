#pragma once
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tofu/pipeline.hpp"
#include "tofu/target.hpp"
#include "tofu/train.hpp"

namespace tofu {

enum class BaselineKind { erm, reuse, finetune, multitask, oracle };

inline const char* baseline_name(BaselineKind k) {
    switch (k) {
        case BaselineKind::erm: return "erm";
        case BaselineKind::reuse: return "reuse";
        case BaselineKind::finetune: return "finetune";
        case BaselineKind::multitask: return "multitask";
        case BaselineKind::oracle: return "oracle";
    }
    return "?";
}

struct BaselineRun {
    ModelParams model;  // target classifier
    double val_criterion = 0.0;
    std::optional<double> source_test_accuracy;
};

// --- shared source-phase artifacts -----------------------------------------

struct SourceArtifacts {
    const TaskBundle* bundle = nullptr;
    TrainResult f1, f2;  // environment-specific classifiers
    SourcePartitions parts;
};

inline SourceArtifacts build_source_artifacts(const TaskBundle& src, const TrainConfig& cfg) {
    if (!src.train2) throw std::invalid_argument("source task needs two training environments");
    SourceArtifacts a;
    a.bundle = &src;
    TrainConfig c1 = cfg, c2 = cfg;
    c1.seed = mix_seed(cfg.seed, hash_str(src.task_id + "/f1"));
    c2.seed = mix_seed(cfg.seed, hash_str(src.task_id + "/f2"));
    a.f1 = train_env_classifier(src.train1, c1);
    a.f2 = train_env_classifier(*src.train2, c2);
    a.parts.env1 = &src.train1;
    a.parts.env2 = &*src.train2;
    a.parts.f1_on_env2 = partition_environment(a.f1.model, *src.train2, "train1", "train2");
    a.parts.f2_on_env1 = partition_environment(a.f2.model, src.train1, "train2", "train1");
    return a;
}

// The four cross-partition subsets over the pooled source training data,
// as index lists into (env1 rows, then env2 rows).
inline std::vector<std::vector<std::size_t>> cross_partition_groups(const SourceArtifacts& a) {
    const std::size_t n1 = a.parts.env1->size();
    std::vector<std::vector<std::size_t>> groups(4);
    for (const auto& slice : a.parts.f2_on_env1.per_label) {
        for (std::size_t i : slice.correct) groups[0].push_back(i);
        for (std::size_t i : slice.incorrect) groups[1].push_back(i);
    }
    for (const auto& slice : a.parts.f1_on_env2.per_label) {
        for (std::size_t i : slice.correct) groups[2].push_back(i + n1);
        for (std::size_t i : slice.incorrect) groups[3].push_back(i + n1);
    }
    std::vector<std::vector<std::size_t>> nonempty;
    for (auto& g : groups)
        if (!g.empty()) nonempty.push_back(std::move(g));
    return nonempty;
}

inline void pooled_source_data(const SourceArtifacts& a, Mat& X, std::vector<int>& y) {
    const Environment& e1 = *a.parts.env1;
    const Environment& e2 = *a.parts.env2;
    X = Mat(e1.size() + e2.size(), e1.features().cols);
    y.resize(X.rows);
    for (std::size_t i = 0; i < e1.size(); ++i) {
        std::copy(e1.features().row(i), e1.features().row(i) + X.cols, X.row(i));
        y[i] = e1.labels()[i];
    }
    for (std::size_t i = 0; i < e2.size(); ++i) {
        std::copy(e2.features().row(i), e2.features().row(i) + X.cols, X.row(e1.size() + i));
        y[e1.size() + i] = e2.labels()[i];
    }
}

struct SourceStableModel {
    ModelParams model;
    double val_worst = 0.0;  // worst held-out subset accuracy at the snapshot
};

// Stable source model: worst-case risk over the four cross-partition subsets,
// early-stopped on the worst held-out-slice accuracy per subset.
inline SourceStableModel train_source_stable(const SourceArtifacts& a, const TrainConfig& cfg) {
    Mat X;
    std::vector<int> y;
    pooled_source_data(a, X, y);
    auto full_groups = cross_partition_groups(a);
    if (full_groups.size() < 2)
        throw std::runtime_error("train_source_stable: partitions collapsed to one subset");

    std::vector<std::vector<std::size_t>> train_groups, hold_groups;
    Rng rng(mix_seed(cfg.seed, 0x73706cu));
    for (auto& g : full_groups) {
        std::vector<std::size_t> tr, ho;
        detail::split_holdout(g, 0.1, rng, tr, ho);
        if (ho.empty()) ho = tr;
        train_groups.push_back(std::move(tr));
        hold_groups.push_back(std::move(ho));
    }
    auto val_fn = [&](const ModelParams& m) { return worst_group_accuracy(m, X, y, hold_groups); };
    const std::size_t k = std::size_t(a.bundle->train1.spec().num_classes);
    TrainResult r = dro_train(X, y, train_groups, k, cfg, val_fn);
    return {std::move(r.model), r.best_val};
}

// Post-activation output of every layer but the last (the feature extractor).
inline Mat hidden_features(const ModelParams& model, const Mat& X) {
    Rng unused(0);
    ForwardCache c = forward_cached(model, X, false, unused);
    return c.act[model.layers.size() - 1];
}

// --- the five reference systems --------------------------------------------

// Average-risk training on the target task alone; validated by average
// accuracy on the target validation environment.
inline BaselineRun run_erm(const TaskBundle& target, const TrainConfig& cfg) {
    const Environment& tr = target.train1;
    const Environment& val = target.val;
    auto val_fn = [&](const ModelParams& m) { return env_accuracy(m, val); };
    TrainResult r = erm_train(tr.features(), tr.labels(), std::size_t(tr.spec().num_classes), cfg,
                              val_fn);
    return {std::move(r.model), r.best_val, std::nullopt};
}

// Frozen transfer: stable source extractor + a linear softmax head trained on
// the target task.
inline BaselineRun run_reuse(const SourceArtifacts& src, const SourceStableModel& stable,
                             const TaskBundle& target, const TrainConfig& cfg) {
    const Environment& tr = target.train1;
    const Environment& val = target.val;
    const Mat feat_tr = hidden_features(stable.model, tr.features());
    const Mat feat_val = hidden_features(stable.model, val.features());
    auto val_fn = [&](const ModelParams& head) {
        return model_accuracy(head, feat_val, val.labels());
    };
    TrainConfig head_cfg = cfg;
    head_cfg.seed = mix_seed(cfg.seed, 0x68656164u);
    Rng init_rng(mix_seed(head_cfg.seed, 0x696eu));
    ModelParams head = make_mlp(feat_tr.cols, {}, std::size_t(tr.spec().num_classes), init_rng,
                                Activation::relu, 0.0, cfg.weight_decay);
    std::vector<std::size_t> all(feat_tr.rows);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    TrainResult r = dro_train(feat_tr, tr.labels(), {all}, head_cfg, val_fn, std::move(head));

    BaselineRun out;
    out.model = stable.model;  // extractor layers stay bitwise identical
    out.model.layers.back() = r.model.layers.front();
    out.model.output_dim = std::size_t(tr.spec().num_classes);
    out.model.dropout_rate = 0.0;
    out.val_criterion = r.best_val;
    out.source_test_accuracy = env_accuracy(stable.model, src.bundle->test);
    return out;
}

// As reuse, but every parameter is trained on the target task.
inline BaselineRun run_finetune(const SourceArtifacts& src, const SourceStableModel& stable,
                                const TaskBundle& target, const TrainConfig& cfg) {
    const Environment& tr = target.train1;
    const Environment& val = target.val;
    const std::size_t k = std::size_t(tr.spec().num_classes);
    ModelParams model = stable.model;
    model.dropout_rate = cfg.dropout;
    model.weight_decay = cfg.weight_decay;
    Rng init_rng(mix_seed(cfg.seed, 0x6674u));
    const std::size_t width = model.layers.back().W.rows;
    ModelParams fresh_head = make_mlp(width, {}, k, init_rng);
    model.layers.back() = fresh_head.layers.front();
    model.output_dim = k;

    auto val_fn = [&](const ModelParams& m) { return env_accuracy(m, val); };
    std::vector<std::size_t> all(tr.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    TrainConfig c = cfg;
    c.seed = mix_seed(cfg.seed, 0x66746eu);
    TrainResult r = dro_train(tr.features(), tr.labels(), {all}, c, val_fn, std::move(model));
    BaselineRun out;
    out.model = std::move(r.model);
    out.val_criterion = r.best_val;
    out.source_test_accuracy = env_accuracy(stable.model, src.bundle->test);
    return out;
}

namespace detail {

struct PartAdam {
    long t = 0;
    Layer m, v;
    double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;

    explicit PartAdam(const Layer& shape, double lr_) : lr(lr_) {
        m.W = Mat(shape.W.rows, shape.W.cols);
        m.b.assign(shape.b.size(), 0.0);
        v = m;
    }

    void step(Layer& p, const Layer& g) {
        ++t;
        const double bc1 = 1.0 - std::pow(b1, double(t));
        const double bc2 = 1.0 - std::pow(b2, double(t));
        auto upd = [&](double& param, double& mm, double& vv, double grad) {
            mm = b1 * mm + (1.0 - b1) * grad;
            vv = b2 * vv + (1.0 - b2) * grad * grad;
            param -= lr * (mm / bc1) / (std::sqrt(vv / bc2) + eps);
        };
        for (std::size_t i = 0; i < p.W.a.size(); ++i) upd(p.W.a[i], m.W.a[i], v.W.a[i], g.W.a[i]);
        for (std::size_t i = 0; i < p.b.size(); ++i) upd(p.b[i], m.b[i], v.b[i], g.b[i]);
    }
};

inline ModelParams assemble(const Layer& trunk, const Layer& head, std::size_t in, double dropout,
                            double wd) {
    ModelParams m;
    m.layers = {trunk, head};
    m.activation = Activation::relu;
    m.input_dim = in;
    m.output_dim = head.W.cols;
    m.dropout_rate = dropout;
    m.weight_decay = wd;
    return m;
}

}  // namespace detail

// Shared extractor with one head per task, alternating one worst-case source
// step with one average-risk target step. The source objective can be
// disabled, which reduces the loop to plain target training from scratch.
inline BaselineRun run_multitask(const SourceArtifacts& src, const TaskBundle& target,
                                 const TrainConfig& cfg, bool enable_source = true) {
    const Environment& tr = target.train1;
    const Environment& val = target.val;
    const std::size_t k_tgt = std::size_t(tr.spec().num_classes);
    const std::size_t k_src = std::size_t(src.bundle->train1.spec().num_classes);
    const std::size_t in_dim = tr.features().cols;
    if (src.bundle->train1.features().cols != in_dim)
        throw std::invalid_argument("run_multitask: source/target input dims differ");

    Mat src_X;
    std::vector<int> src_y;
    pooled_source_data(src, src_X, src_y);
    const auto src_groups = cross_partition_groups(src);

    Rng init_rng(mix_seed(cfg.seed, 0x6d74u));
    ModelParams proto = make_mlp(in_dim, {cfg.hidden}, k_tgt, init_rng);
    Layer trunk = proto.layers[0];
    Layer tgt_head = proto.layers[1];
    ModelParams src_proto = make_mlp(cfg.hidden, {}, k_src, init_rng);
    Layer src_head = src_proto.layers[0];

    detail::PartAdam trunk_adam(trunk, cfg.lr), src_adam(src_head, cfg.lr),
        tgt_adam(tgt_head, cfg.lr);
    Rng tgt_rng(mix_seed(cfg.seed, 0x7467u));
    Rng src_rng(mix_seed(cfg.seed, 0x7372u));

    std::vector<std::size_t> tgt_all(tr.size());
    for (std::size_t i = 0; i < tgt_all.size(); ++i) tgt_all[i] = i;

    auto one_step = [&](const Mat& X, const std::vector<int>& y,
                        const std::vector<std::vector<std::size_t>>& groups, Layer& head,
                        detail::PartAdam& head_adam, Rng& rng) {
        ModelParams m = detail::assemble(trunk, head, in_dim, cfg.dropout, cfg.weight_decay);
        double worst = -std::numeric_limits<double>::infinity();
        ForwardCache worst_cache;
        std::vector<int> worst_labels;
        for (const auto& g : groups) {
            const auto idx = detail::sample_with_replacement(g, cfg.batch_size, rng);
            Mat bx = take_rows(X, idx);
            std::vector<int> by(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) by[i] = y[idx[i]];
            ForwardCache cache = forward_cached(m, bx, true, rng);
            const double loss = cross_entropy(cache.act.back(), by).first;
            if (loss > worst) {
                worst = loss;
                worst_cache = std::move(cache);
                worst_labels = std::move(by);
            }
        }
        auto [lu, probs] = cross_entropy(worst_cache.act.back(), worst_labels);
        (void)lu;
        Mat dlogits = std::move(probs);
        for (std::size_t i = 0; i < dlogits.rows; ++i)
            dlogits(i, std::size_t(worst_labels[i])) -= 1.0;
        for (double& vv : dlogits.a) vv /= double(dlogits.rows);
        Gradients g = backprop(m, worst_cache, dlogits);
        add_weight_decay(m, g);
        trunk_adam.step(trunk, g[0]);
        head_adam.step(head, g[1]);
    };

    double best_val = -std::numeric_limits<double>::infinity();
    Layer best_trunk = trunk, best_tgt = tgt_head, best_src = src_head;
    long since_best = 0;
    {
        ModelParams m0 = detail::assemble(trunk, tgt_head, in_dim, 0.0, 0.0);
        best_val = env_accuracy(m0, val);
    }
    for (long step = 1; step <= cfg.max_steps; ++step) {
        if (enable_source) one_step(src_X, src_y, src_groups, src_head, src_adam, src_rng);
        one_step(tr.features(), tr.labels(), {tgt_all}, tgt_head, tgt_adam, tgt_rng);
        if (step % cfg.eval_every == 0) {
            ModelParams m = detail::assemble(trunk, tgt_head, in_dim, 0.0, 0.0);
            const double v = env_accuracy(m, val);
            if (v > best_val) {
                best_val = v;
                best_trunk = trunk;
                best_tgt = tgt_head;
                best_src = src_head;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
    }
    BaselineRun out;
    out.model = detail::assemble(best_trunk, best_tgt, in_dim, 0.0, 0.0);
    out.val_criterion = best_val;
    ModelParams src_model = detail::assemble(best_trunk, best_src, in_dim, 0.0, 0.0);
    out.source_test_accuracy = env_accuracy(src_model, src.bundle->test);
    return out;
}

// Oracle groups: the cross product of observed label and true unstable value.
// This is the only training path that reads the hidden truth.
inline std::vector<std::vector<std::size_t>> oracle_groups(const Environment& env) {
    const HiddenTruth& t = env.truth();
    const auto& y = env.labels();
    const int m = env.spec().num_unstable_values;
    std::map<int, std::vector<std::size_t>> by_group;
    for (std::size_t i = 0; i < y.size(); ++i) by_group[y[i] * m + t.z[i]].push_back(i);
    std::vector<std::vector<std::size_t>> groups;
    for (auto& [_, g] : by_group) groups.push_back(std::move(g));
    return groups;
}

inline BaselineRun run_oracle(const TaskBundle& target, const TrainConfig& cfg) {
    const Environment& tr = target.train1;
    const Environment& val = target.val;
    const auto train_groups = oracle_groups(tr);
    if (train_groups.size() < 2) throw std::runtime_error("run_oracle: fewer than two oracle groups");
    const auto val_groups = oracle_groups(val);
    auto val_fn = [&](const ModelParams& m) {
        return worst_group_accuracy(m, val.features(), val.labels(), val_groups);
    };
    TrainResult r = dro_train(tr.features(), tr.labels(), train_groups,
                              std::size_t(tr.spec().num_classes), cfg, val_fn);
    return {std::move(r.model), r.best_val, std::nullopt};
}

}  // namespace tofu
