#pragma once
#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "tofu/data.hpp"
#include "tofu/train.hpp"

namespace tofu {

// Per-label split of an evaluated environment into correct / incorrect
// prediction index sets.
struct LabelSlicePartition {
    std::vector<std::size_t> correct;
    std::vector<std::size_t> incorrect;
    bool degenerate() const { return correct.empty() || incorrect.empty(); }
};

struct Partition {
    std::string source_env;  // environment the classifier was trained on
    std::string eval_env;    // environment being partitioned
    std::vector<LabelSlicePartition> per_label;
    double alpha_empirical = 0.0;
};

// Train an environment-specific classifier with a held-out tail slice of the
// environment used for early stopping on average accuracy.
inline TrainResult train_env_classifier(const Environment& env, TrainConfig cfg,
                                        double holdout_frac = 0.1) {
    if (env.size() == 0) throw std::invalid_argument("train_env_classifier: empty environment");
    const std::size_t n = env.size();
    const std::size_t n_holdout = std::max<std::size_t>(1, std::size_t(double(n) * holdout_frac));
    const std::size_t n_train = n > n_holdout ? n - n_holdout : n;

    std::vector<std::size_t> train_idx(n_train), hold_idx;
    for (std::size_t i = 0; i < n_train; ++i) train_idx[i] = i;
    for (std::size_t i = n_train; i < n; ++i) hold_idx.push_back(i);
    if (hold_idx.empty()) hold_idx = train_idx;  // single-example environment

    Mat hx = take_rows(env.features(), hold_idx);
    std::vector<int> hy(hold_idx.size());
    for (std::size_t i = 0; i < hold_idx.size(); ++i) hy[i] = env.labels()[hold_idx[i]];

    Mat tx = take_rows(env.features(), train_idx);
    std::vector<int> ty(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) ty[i] = env.labels()[train_idx[i]];

    const std::size_t k = std::size_t(env.spec().num_classes);
    auto val_fn = [&](const ModelParams& m) { return model_accuracy(m, hx, hy); };
    return erm_train(tx, ty, k, cfg, val_fn);
}

// Split env_j's indices per label by the correctness of f_i's predictions.
inline Partition partition_environment(const ModelParams& f_i, const Environment& env_j,
                                       const std::string& source_id, const std::string& eval_id) {
    if (source_id == eval_id)
        throw std::invalid_argument("partition_environment: classifier must come from a different environment");
    Partition part;
    part.source_env = source_id;
    part.eval_env = eval_id;
    part.per_label.resize(std::size_t(env_j.spec().num_classes));
    const std::vector<int> pred = predict_argmax(forward_eval(f_i, env_j.features()));
    const auto& y = env_j.labels();
    std::size_t n_correct = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        auto& slice = part.per_label[std::size_t(y[i])];
        if (pred[i] == y[i]) {
            slice.correct.push_back(i);
            ++n_correct;
        } else {
            slice.incorrect.push_back(i);
        }
    }
    part.alpha_empirical = double(n_correct) / double(y.size());
    return part;
}

// Batch-mean triplet hinge: max(0, ||m1-m2||^2 - ||m1-m3||^2 + margin).
inline double triplet_loss(const std::vector<double>& m1, const std::vector<double>& m2,
                           const std::vector<double>& m3, double margin) {
    if (m1.size() != m2.size() || m1.size() != m3.size())
        throw std::invalid_argument("triplet_loss: dimension mismatch");
    double d12 = 0.0, d13 = 0.0;
    for (std::size_t i = 0; i < m1.size(); ++i) {
        const double a = m1[i] - m2[i];
        const double b = m1[i] - m3[i];
        d12 += a * a;
        d13 += b * b;
    }
    return std::max(0.0, d12 - d13 + margin);
}

struct TripletConfig {
    double margin = 0.3;
    std::size_t batch_size = 50;
    // The encoder gets twice the classifier step budget and a gentler rate:
    // the embedding geometry keeps refining at the margin boundary long after
    // the hinge first saturates, and fast rates leave seed-dependent
    // asymmetries between unstable values.
    long max_steps = 6000;
    long eval_every = 100;
    long patience = 20;
    double lr = 3e-4;
    std::size_t hidden = 64;
    std::size_t embed_dim = 16;
    double holdout_frac = 0.1;
    std::size_t eval_triples_per_slot = 8;
    // The encoder output layer starts near zero so the embedding begins
    // collapsed. With a full-scale init the raw input geometry already
    // separates the partition means beyond the margin, the hinge never
    // activates, and no unstable-feature structure is learned.
    double output_init_scale = 0.05;
    // Decay applies on every step, active hinge or not, so the equilibrium
    // embedding is minimum-norm among margin-satisfying ones; weak noisy
    // pathways shrink away while the one-hot unstable block survives.
    double weight_decay = 3e-3;
    // Hidden-layer dropout during encoder training. The margin then has to
    // survive random pathway deletion, which spreads each unstable value
    // over redundant directions instead of a single low-rank arrangement.
    double dropout = 0.5;
    std::uint64_t seed = 0;
};

// Partitions of one source task: both cross-environment directions.
struct SourcePartitions {
    const Environment* env1 = nullptr;
    const Environment* env2 = nullptr;
    Partition f1_on_env2;  // f_1 evaluated on env2
    Partition f2_on_env1;  // f_2 evaluated on env1
};

struct TripletSlot {
    std::size_t task = 0;       // index into the sources vector
    const Environment* env = nullptr;  // environment the indices refer to
    int label = 0;
    std::vector<std::size_t> correct_train, incorrect_train;
    std::vector<std::size_t> correct_hold, incorrect_hold;
};

struct TripletDraw {
    std::size_t slot = 0;
    std::vector<std::size_t> batch1, batch2;  // from the correct side
    std::vector<std::size_t> batch3;          // from the incorrect side
};

namespace detail {

inline void split_holdout(const std::vector<std::size_t>& all, double frac, Rng& rng,
                          std::vector<std::size_t>& train, std::vector<std::size_t>& hold) {
    std::vector<std::size_t> shuffled = all;
    for (std::size_t i = shuffled.size(); i > 1; --i)
        std::swap(shuffled[i - 1], shuffled[std::size_t(rng.uniform_int(int(i)))]);
    std::size_t n_hold = std::size_t(double(shuffled.size()) * frac);
    if (shuffled.size() - n_hold < 1) n_hold = shuffled.size() - 1;
    hold.assign(shuffled.begin(), shuffled.begin() + long(n_hold));
    train.assign(shuffled.begin() + long(n_hold), shuffled.end());
}

}  // namespace detail

// Enumerate the usable (task, environment, label) slots. Degenerate slices
// (an empty correct or incorrect side) are skipped.
inline std::vector<TripletSlot> build_triplet_slots(const std::vector<SourcePartitions>& sources,
                                                    double holdout_frac, std::uint64_t seed) {
    std::vector<TripletSlot> slots;
    for (std::size_t t = 0; t < sources.size(); ++t) {
        const SourcePartitions& sp = sources[t];
        const struct {
            const Partition* part;
            const Environment* env;
        } dirs[2] = {{&sp.f1_on_env2, sp.env2}, {&sp.f2_on_env1, sp.env1}};
        for (const auto& d : dirs) {
            for (std::size_t y = 0; y < d.part->per_label.size(); ++y) {
                const auto& slice = d.part->per_label[y];
                if (slice.degenerate()) continue;
                TripletSlot slot;
                slot.task = t;
                slot.env = d.env;
                slot.label = int(y);
                Rng rng(mix_seed(mix_seed(seed, t * 8 + y), hash_str(d.part->source_env)));
                detail::split_holdout(slice.correct, holdout_frac, rng, slot.correct_train,
                                      slot.correct_hold);
                detail::split_holdout(slice.incorrect, holdout_frac, rng, slot.incorrect_train,
                                      slot.incorrect_hold);
                slots.push_back(std::move(slot));
            }
        }
    }
    return slots;
}

// Uniform over slots, then uniform batches with replacement; all three
// batches come from the same (environment, label) slice by construction.
inline TripletDraw sample_triplet(const std::vector<TripletSlot>& slots, std::size_t batch_size,
                                  Rng& rng) {
    if (slots.empty()) throw std::runtime_error("no contrastable signal: all partitions degenerate");
    TripletDraw d;
    d.slot = std::size_t(rng.uniform_int(int(slots.size())));
    const TripletSlot& s = slots[d.slot];
    d.batch1 = detail::sample_with_replacement(s.correct_train, batch_size, rng);
    d.batch2 = detail::sample_with_replacement(s.correct_train, batch_size, rng);
    d.batch3 = detail::sample_with_replacement(s.incorrect_train, batch_size, rng);
    return d;
}

namespace detail {

inline std::vector<double> embed_mean(const ModelParams& enc, const Environment& env,
                                      const std::vector<std::size_t>& idx, ForwardCache* cache,
                                      Rng& rng) {
    Mat bx = take_rows(env.features(), idx);
    if (cache) {
        *cache = forward_cached(enc, bx, true, rng);
        return col_mean(cache->act.back());
    }
    return col_mean(forward_eval(enc, bx));
}

}  // namespace detail

// Learn the unstable-feature encoder by minimizing the batch-mean triplet
// hinge over uniformly sampled slots. Early stopping uses the mean triplet
// loss on held-out triples (fixed at setup so evaluations are comparable).
inline TrainResult learn_unstable_representation(const std::vector<SourcePartitions>& sources,
                                                 const TripletConfig& cfg) {
    std::vector<TripletSlot> slots = build_triplet_slots(sources, cfg.holdout_frac, cfg.seed);
    if (slots.empty()) throw std::runtime_error("no contrastable signal: all partitions degenerate");
    const std::size_t input_dim = std::size_t(slots.front().env->spec().input_dim());

    // fixed evaluation triples from the held-out side
    struct EvalTriple {
        const Environment* env;
        std::vector<std::size_t> b1, b2, b3;
    };
    std::vector<EvalTriple> eval_triples;
    {
        Rng erng(mix_seed(cfg.seed, 0x65766cu));
        for (const auto& s : slots) {
            if (s.correct_hold.empty() || s.incorrect_hold.empty()) continue;
            for (std::size_t r = 0; r < cfg.eval_triples_per_slot; ++r) {
                EvalTriple t;
                t.env = s.env;
                t.b1 = detail::sample_with_replacement(s.correct_hold, cfg.batch_size, erng);
                t.b2 = detail::sample_with_replacement(s.correct_hold, cfg.batch_size, erng);
                t.b3 = detail::sample_with_replacement(s.incorrect_hold, cfg.batch_size, erng);
                eval_triples.push_back(std::move(t));
            }
        }
    }

    Rng init_rng(mix_seed(cfg.seed, 0x667au));
    ModelParams enc = make_mlp(input_dim, {cfg.hidden}, cfg.embed_dim, init_rng,
                               Activation::relu, cfg.dropout);
    for (double& w : enc.layers.back().W.a) w *= cfg.output_init_scale;
    AdamState adam = AdamState::like(enc, cfg.lr);
    Rng rng(mix_seed(cfg.seed, 0x747269u));
    Rng eval_rng(0);  // encoder runs without dropout; no randomness consumed

    auto eval_loss = [&](const ModelParams& m) {
        if (eval_triples.empty()) return 0.0;
        double total = 0.0;
        for (const auto& t : eval_triples) {
            auto m1 = detail::embed_mean(m, *t.env, t.b1, nullptr, eval_rng);
            auto m2 = detail::embed_mean(m, *t.env, t.b2, nullptr, eval_rng);
            auto m3 = detail::embed_mean(m, *t.env, t.b3, nullptr, eval_rng);
            total += triplet_loss(m1, m2, m3, cfg.margin);
        }
        return total / double(eval_triples.size());
    };

    TrainResult res;
    res.model = enc;
    res.best_val = -eval_loss(enc);  // higher-better convention
    res.best_step = 0;
    long since_best = 0;

    for (long step = 1; step <= cfg.max_steps; ++step) {
        const TripletDraw draw = sample_triplet(slots, cfg.batch_size, rng);
        const TripletSlot& s = slots[draw.slot];
        ForwardCache c1, c2, c3;
        auto m1 = detail::embed_mean(enc, *s.env, draw.batch1, &c1, rng);
        auto m2 = detail::embed_mean(enc, *s.env, draw.batch2, &c2, rng);
        auto m3 = detail::embed_mean(enc, *s.env, draw.batch3, &c3, rng);
        const double loss = triplet_loss(m1, m2, m3, cfg.margin);
        res.steps_run = step;
        Gradients g = zero_like(enc);
        if (loss > 0.0) {
            // d/dm1 = 2(m3 - m2), d/dm2 = -2(m1 - m2), d/dm3 = 2(m1 - m3);
            // each example in a batch carries grad/batch_size.
            const std::size_t dim = m1.size(), bs = cfg.batch_size;
            auto spread = [&](const std::vector<double>& dmean, const ForwardCache& cache) {
                Mat dout(bs, dim);
                for (std::size_t i = 0; i < bs; ++i)
                    for (std::size_t j = 0; j < dim; ++j) dout(i, j) = dmean[j] / double(bs);
                return backprop(enc, cache, dout);
            };
            std::vector<double> d1(dim), d2(dim), d3(dim);
            for (std::size_t j = 0; j < dim; ++j) {
                d1[j] = 2.0 * (m3[j] - m2[j]);
                d2[j] = -2.0 * (m1[j] - m2[j]);
                d3[j] = 2.0 * (m1[j] - m3[j]);
            }
            g = spread(d1, c1);
            Gradients g2 = spread(d2, c2);
            Gradients g3 = spread(d3, c3);
            for (std::size_t k = 0; k < g.size(); ++k) {
                for (std::size_t i = 0; i < g[k].W.a.size(); ++i)
                    g[k].W.a[i] += g2[k].W.a[i] + g3[k].W.a[i];
                for (std::size_t i = 0; i < g[k].b.size(); ++i)
                    g[k].b[i] += g2[k].b[i] + g3[k].b[i];
            }
        }
        if (cfg.weight_decay > 0.0)
            for (std::size_t k = 0; k < g.size(); ++k)
                for (std::size_t i = 0; i < g[k].W.a.size(); ++i)
                    g[k].W.a[i] += cfg.weight_decay * enc.layers[k].W.a[i];
        adam_step(adam, enc, g);
        if (step % cfg.eval_every == 0) {
            const double v = -eval_loss(enc);
            // ties keep the later snapshot: the held-out hinge saturates at 0
            // exactly while training triples still refine the embedding
            if (v >= res.best_val) {
                since_best = (v > res.best_val) ? 0 : since_best + 1;
                res.best_val = v;
                res.best_step = step;
                res.model = enc;
                if (since_best >= cfg.patience) break;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
    }
    return res;
}

}  // namespace tofu
