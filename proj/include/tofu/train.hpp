#pragma once
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tofu/data.hpp"
#include "tofu/metrics.hpp"
#include "tofu/nn.hpp"

namespace tofu {

struct TrainConfig {
    double lr = 1e-3;
    double dropout = 0.0;
    double weight_decay = 0.0;
    std::size_t hidden = 64;
    std::size_t batch_size = 50;
    long max_steps = 3000;
    long eval_every = 100;
    long patience = 20;
    std::uint64_t seed = 0;
};

struct CurveRow {
    long step = 0;
    std::vector<double> group_loss;
    int selected_group = 0;
    bool evaluated = false;
    double val_metric = 0.0;
};

struct TrainResult {
    ModelParams model;       // best snapshot by the validation criterion
    double best_val = -std::numeric_limits<double>::infinity();
    long best_step = 0;
    long steps_run = 0;
    std::vector<CurveRow> curve;  // filled only when requested
};

using ValFn = std::function<double(const ModelParams&)>;

namespace detail {

inline std::vector<std::size_t> sample_with_replacement(const std::vector<std::size_t>& pool,
                                                        std::size_t count, Rng& rng) {
    std::vector<std::size_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = pool[std::size_t(rng.uniform_int(int(pool.size())))];
    return out;
}

}  // namespace detail

// Worst-group training: each step samples one batch per group, computes the
// per-group loss, and backpropagates only the maximum-loss group's batch
// (ties break to the lowest group id). A single all-index group makes this
// plain average-risk training. Early stopping tracks val_fn (higher better),
// evaluated every eval_every steps, and the best snapshot is returned.
inline TrainResult dro_train(const Mat& X, const std::vector<int>& y,
                             const std::vector<std::vector<std::size_t>>& groups,
                             const TrainConfig& cfg, const ValFn& val_fn, ModelParams init,
                             bool record_curve = false) {
    if (groups.empty()) throw std::invalid_argument("dro_train: no groups");
    for (const auto& g : groups)
        if (g.empty()) throw std::invalid_argument("dro_train: empty group");

    TrainResult res;
    ModelParams model = std::move(init);
    AdamState adam = AdamState::like(model, cfg.lr);
    Rng rng(mix_seed(cfg.seed, 0x7261u));  // batch sampling + dropout masks

    res.best_val = val_fn(model);
    res.best_step = 0;
    res.model = model;
    long since_best = 0;

    for (long step = 1; step <= cfg.max_steps; ++step) {
        double worst_loss = -std::numeric_limits<double>::infinity();
        int worst_gid = -1;
        ForwardCache worst_cache;
        std::vector<int> worst_labels;
        CurveRow row;
        row.step = step;
        for (std::size_t gid = 0; gid < groups.size(); ++gid) {
            const auto idx = detail::sample_with_replacement(groups[gid], cfg.batch_size, rng);
            Mat bx = take_rows(X, idx);
            std::vector<int> by(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) by[i] = y[idx[i]];
            ForwardCache cache = forward_cached(model, bx, true, rng);
            const double loss = cross_entropy(cache.act.back(), by).first;
            if (!std::isfinite(loss))
                throw std::runtime_error("dro_train: non-finite loss at step " + std::to_string(step));
            if (record_curve) row.group_loss.push_back(loss);
            if (loss > worst_loss) {
                worst_loss = loss;
                worst_gid = int(gid);
                worst_cache = std::move(cache);
                worst_labels = std::move(by);
            }
        }
        const Mat& logits = worst_cache.act.back();
        auto [loss_unused, probs] = cross_entropy(logits, worst_labels);
        (void)loss_unused;
        Mat dlogits = std::move(probs);
        for (std::size_t i = 0; i < dlogits.rows; ++i)
            dlogits(i, std::size_t(worst_labels[i])) -= 1.0;
        for (double& v : dlogits.a) v /= double(dlogits.rows);
        Gradients g = backprop(model, worst_cache, dlogits);
        add_weight_decay(model, g);
        adam_step(adam, model, g);
        res.steps_run = step;

        if (step % cfg.eval_every == 0) {
            const double v = val_fn(model);
            if (record_curve) {
                row.evaluated = true;
                row.val_metric = v;
            }
            if (v > res.best_val) {
                res.best_val = v;
                res.best_step = step;
                res.model = model;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                if (record_curve) {
                    row.selected_group = worst_gid;
                    res.curve.push_back(std::move(row));
                }
                break;
            }
        }
        if (record_curve) {
            row.selected_group = worst_gid;
            res.curve.push_back(std::move(row));
        }
    }
    return res;
}

inline TrainResult dro_train(const Mat& X, const std::vector<int>& y,
                             const std::vector<std::vector<std::size_t>>& groups,
                             std::size_t num_classes, const TrainConfig& cfg, const ValFn& val_fn,
                             bool record_curve = false) {
    Rng init_rng(mix_seed(cfg.seed, 0x696eu));
    ModelParams init = make_mlp(X.cols, {cfg.hidden}, num_classes, init_rng, Activation::relu,
                                cfg.dropout, cfg.weight_decay);
    return dro_train(X, y, groups, cfg, val_fn, std::move(init), record_curve);
}

// Average-risk training is the one-group case of the worst-group loop.
inline TrainResult erm_train(const Mat& X, const std::vector<int>& y, std::size_t num_classes,
                             const TrainConfig& cfg, const ValFn& val_fn, bool record_curve = false) {
    std::vector<std::size_t> all(X.rows);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return dro_train(X, y, {all}, num_classes, cfg, val_fn, record_curve);
}

inline double model_accuracy(const ModelParams& model, const Mat& X, const std::vector<int>& y) {
    return accuracy(predict_argmax(forward_eval(model, X)), y);
}

inline double env_accuracy(const ModelParams& model, const Environment& env) {
    return model_accuracy(model, env.features(), env.labels());
}

// Minimum per-group accuracy; empty groups are skipped.
inline double worst_group_accuracy(const ModelParams& model, const Mat& X, const std::vector<int>& y,
                                   const std::vector<std::vector<std::size_t>>& groups) {
    const std::vector<int> pred = predict_argmax(forward_eval(model, X));
    double worst = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& g : groups) {
        if (g.empty()) continue;
        std::size_t hit = 0;
        for (std::size_t i : g)
            if (pred[i] == y[i]) ++hit;
        worst = std::min(worst, double(hit) / double(g.size()));
        any = true;
    }
    if (!any) throw std::invalid_argument("worst_group_accuracy: all groups empty");
    return worst;
}

}  // namespace tofu
