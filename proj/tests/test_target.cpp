#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "tofu/baselines.hpp"
#include "tofu/pipeline.hpp"
#include "tofu/target.hpp"

using namespace tofu;

namespace {

struct Fixture {
    std::vector<TaskBundle> suite;
    TrainResult fz;
    Fixture() {
        suite = make_binary_suite(3);
        TrainConfig scfg;
        scfg.seed = 1;
        scfg.dropout = 0.5;
        SourceArtifacts art = build_source_artifacts(suite[0], scfg);
        TripletConfig tcfg;
        tcfg.seed = 2;
        fz = learn_unstable_representation({art.parts}, tcfg);
    }
};

Fixture& fx() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("cluster_by_label: clusters never mix observed labels") {
    const Environment& env = fx().suite[1].train1;
    ClusterAssignment ca = cluster_by_label(fx().fz.model, env, 2, 7);
    for (const auto& lc : ca.per_label) {
        CHECK(lc.example_indices.size() == lc.cluster_of.size());
        for (std::size_t i : lc.example_indices) CHECK(env.labels()[i] == lc.label);
    }
    // every example assigned exactly once
    std::vector<int> flat = ca.flat_groups(env.size());
    for (int g : flat) CHECK(g >= 0);
}

TEST_CASE("cluster_by_label: trained encoder recovers z at high V-measure, random encoder does not") {
    const Environment& env = fx().suite[1].train1;
    ClusterAssignment trained = cluster_by_label(fx().fz.model, env, 2, 7);
    ClusterEvalReport rep = score_clusters(trained, env);
    CHECK(rep.v_measure >= 0.90);

    Rng rng(12345);
    ModelParams random_enc = make_mlp(std::size_t(env.spec().input_dim()), {64}, 16, rng);
    ClusterAssignment control = cluster_by_label(random_enc, env, 2, 7);
    CHECK(score_clusters(control, env).v_measure < 0.3);
}

TEST_CASE("cluster_by_label: n_c = 1 gives one group per label") {
    const Environment& env = fx().suite[1].train1;
    ClusterAssignment ca = cluster_by_label(fx().fz.model, env, 1, 7);
    const auto groups = ca.group_index_lists();
    CHECK(groups.size() == 2);  // one per label
}

TEST_CASE("cluster_by_label: a label with fewer examples than n_c falls back to one cluster") {
    EnvironmentSpec s;
    s.task_id = "tiny";
    s.eta = 0.8;
    s.n = 7;
    s.proto_scale = 0.30;
    s.seed = 5;
    Environment env = gen_binary_token_task(s, Role::train1);
    std::size_t smaller_label_count = std::min(
        std::size_t(std::count(env.labels().begin(), env.labels().end(), 0)),
        std::size_t(std::count(env.labels().begin(), env.labels().end(), 1)));
    if (smaller_label_count >= 1 && smaller_label_count < 5) {
        ClusterAssignment ca = cluster_by_label(fx().fz.model, env, 5, 7);
        bool fell_back = false;
        for (const auto& lc : ca.per_label)
            if (lc.fell_back) {
                fell_back = true;
                CHECK(lc.centroids.rows == 1);
            }
        CHECK(fell_back);
    }
}

TEST_CASE("group_dro_train: single group is stepwise identical to a plain average-risk loop") {
    const Environment& env = fx().suite[1].train1;
    TrainConfig cfg;
    cfg.seed = 9;
    cfg.max_steps = 200;  // multiple of eval_every: the last snapshot is the last step
    cfg.eval_every = 100;
    cfg.dropout = 0.0;

    std::vector<std::size_t> all(env.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto val_fn = [](const ModelParams&) { return 0.0; };  // never improves, never stops
    TrainResult dro = dro_train(env.features(), env.labels(), {all}, 2, cfg, val_fn);

    // independent re-implementation with the library primitives and the same
    // rng stream layout (batch draws from one stream, init from another)
    Rng init_rng(mix_seed(cfg.seed, 0x696eu));
    ModelParams model = make_mlp(env.features().cols, {cfg.hidden}, 2, init_rng, Activation::relu,
                                 cfg.dropout, cfg.weight_decay);
    AdamState adam = AdamState::like(model, cfg.lr);
    Rng rng(mix_seed(cfg.seed, 0x7261u));
    for (long step = 1; step <= cfg.max_steps; ++step) {
        Batch b;
        b.inputs = Mat(cfg.batch_size, env.features().cols);
        b.labels.resize(cfg.batch_size);
        for (std::size_t i = 0; i < cfg.batch_size; ++i) {
            const std::size_t idx = all[std::size_t(rng.uniform_int(int(all.size())))];
            std::copy(env.features().row(idx), env.features().row(idx) + b.inputs.cols,
                      b.inputs.row(i));
            b.labels[i] = env.labels()[idx];
        }
        Gradients g = backward(model, b, LossKind::cross_entropy, true, rng);
        adam_step(adam, model, g);
    }
    // dro_train returns the best snapshot; with a constant val metric that is
    // the step-0 model, so compare against its final trajectory via a fresh
    // run that records nothing but runs to max_steps
    // (instead: rerun dro with patience large and val improving at the end)
    TrainConfig cfg2 = cfg;
    cfg2.patience = 1000000;
    long calls = 0;
    auto always_better = [&](const ModelParams&) { return double(++calls); };
    TrainResult dro2 = dro_train(env.features(), env.labels(), {all}, 2, cfg2, always_better);
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        CHECK(dro2.model.layers[k].W.a == model.layers[k].W.a);
        CHECK(dro2.model.layers[k].b == model.layers[k].b);
    }
    CHECK(dro2.steps_run == cfg.max_steps);
    (void)dro;
}

TEST_CASE("group_dro_train: the selected group attains the maximum sampled loss each step") {
    const Environment& env = fx().suite[1].train1;
    ClusterAssignment ca = cluster_by_label(fx().fz.model, env, 2, 7);
    TrainConfig cfg;
    cfg.seed = 10;
    cfg.max_steps = 150;
    auto val_fn = [](const ModelParams&) { return 0.0; };
    TrainResult r = group_dro_train(env, ca, cfg, val_fn, true);
    REQUIRE(!r.curve.empty());
    for (const auto& row : r.curve) {
        REQUIRE(!row.group_loss.empty());
        double mx = row.group_loss[0];
        for (double l : row.group_loss) mx = std::max(mx, l);
        CHECK(row.group_loss[std::size_t(row.selected_group)] == mx);
        // ties break to the lowest group id
        for (int g = 0; g < row.selected_group; ++g)
            CHECK(row.group_loss[std::size_t(g)] < mx);
    }
}

TEST_CASE("group_dro_train: per-step objective picks the worse of two groups") {
    // two trivially separable groups of different difficulty: group 1 has
    // flipped labels so its loss stays high and every gradient comes from it
    Mat X(40, 2);
    std::vector<int> y(40);
    for (std::size_t i = 0; i < 40; ++i) {
        X(i, 0) = i < 20 ? 1.0 : -1.0;
        X(i, 1) = 1.0;
        y[i] = (i < 20) == (i % 2 == 0) ? 1 : 0;  // group 2 labels anti-correlated
    }
    std::vector<std::vector<std::size_t>> groups(2);
    for (std::size_t i = 0; i < 20; ++i) groups[0].push_back(i);
    for (std::size_t i = 20; i < 40; ++i) groups[1].push_back(i);
    // group 0: y = 1{x0 > 0} pattern varies; keep it simple: relabel exactly
    for (std::size_t i = 0; i < 20; ++i) y[i] = 1;   // easy constant group
    for (std::size_t i = 20; i < 40; ++i) y[i] = i % 2 == 0 ? 0 : 1;  // unlearnable from x
    TrainConfig cfg;
    cfg.seed = 4;
    cfg.max_steps = 120;
    cfg.batch_size = 10;
    auto val_fn = [](const ModelParams&) { return 0.0; };
    TrainResult r = dro_train(X, y, groups, 2, cfg, val_fn, true);
    REQUIRE(r.curve.size() == 120);
    // once the easy group is fit, every worst-group pick is the unlearnable one
    for (std::size_t i = 40; i < r.curve.size(); ++i)
        CHECK(r.curve[i].selected_group == 1);
}

TEST_CASE("group_dro_train: deterministic given the seed") {
    const Environment& env = fx().suite[1].train1;
    ClusterAssignment ca = cluster_by_label(fx().fz.model, env, 2, 7);
    TrainConfig cfg;
    cfg.seed = 11;
    cfg.max_steps = 200;
    auto val_fn = [&](const ModelParams& m) { return env_accuracy(m, fx().suite[1].val); };
    TrainResult a = group_dro_train(env, ca, cfg, val_fn);
    TrainResult b = group_dro_train(env, ca, cfg, val_fn);
    for (std::size_t k = 0; k < a.model.layers.size(); ++k)
        CHECK(a.model.layers[k].W.a == b.model.layers[k].W.a);
    ClusterAssignment ca2 = cluster_by_label(fx().fz.model, env, 2, 7);
    for (std::size_t l = 0; l < ca.per_label.size(); ++l)
        CHECK(ca.per_label[l].cluster_of == ca2.per_label[l].cluster_of);
}

TEST_CASE("worst_cluster_val_accuracy: perfect and constant models") {
    const Environment& val = fx().suite[1].val;
    // perfect: read the token block directly (eta-agnostic correctness is not
    // needed; build a classifier that predicts from the stable prototype axis)
    const auto& spec = val.spec();
    ModelParams direct;
    direct.activation = Activation::identity;
    direct.input_dim = std::size_t(spec.input_dim());
    direct.output_dim = 2;
    Layer l;
    l.W = Mat(std::size_t(spec.input_dim()), 2);
    l.b.assign(2, 0.0);
    l.W(std::size_t(spec.proto_offset), 0) = 100.0;
    l.W(std::size_t(spec.proto_offset + 1), 1) = 100.0;
    direct.layers.push_back(l);
    // that model is only ~stable-Bayes accurate; a genuinely perfect model
    // needs the labels, so check the exact contract on a constant model first
    ModelParams constant = direct;
    std::fill(constant.layers[0].W.a.begin(), constant.layers[0].W.a.end(), 0.0);
    constant.layers[0].b = {10.0, 0.0};  // always predicts label 0
    const double worst_const =
        worst_cluster_val_accuracy(constant, fx().fz.model, val, 2, 13);
    CHECK(worst_const == 0.0);

    // a model that copies the observed label cannot exist; emulate perfection
    // by evaluating on predictions == labels through the group helper
    ClusterAssignment ca = cluster_by_label(fx().fz.model, val, 2, 13);
    auto groups = ca.group_index_lists();
    std::size_t covered = 0;
    for (const auto& g : groups) covered += g.size();
    CHECK(covered == val.size());
}

TEST_CASE("worst-cluster validation never exceeds average validation accuracy") {
    const Environment& val = fx().suite[1].val;
    TrainConfig cfg;
    cfg.seed = 6;
    cfg.max_steps = 400;
    BaselineRun erm = run_erm(fx().suite[1], cfg);
    const double avg = env_accuracy(erm.model, val);
    const double worst = worst_cluster_val_accuracy(erm.model, fx().fz.model, val, 2, 13);
    CHECK(worst <= avg + 1e-12);
}

TEST_CASE("biased model: worst-cluster accuracy sits strictly below average accuracy") {
    // the ERM model on eta=0.8 data leans on the token; the minority-z
    // cluster exposes it
    TrainConfig cfg;
    cfg.seed = 14;
    BaselineRun erm = run_erm(fx().suite[1], cfg);
    const Environment& val = fx().suite[1].val;
    const double avg = env_accuracy(erm.model, val);
    const double worst = worst_cluster_val_accuracy(erm.model, fx().fz.model, val, 2, 13);
    CHECK(worst < avg - 0.10);
}
