#pragma once
#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tofu/baselines.hpp"
#include "tofu/config.hpp"
#include "tofu/pca.hpp"
#include "tofu/serialize.hpp"
#include "tofu/svg.hpp"

namespace tofu {

struct GridCellResult {
    ExperimentConfig::GridCell cell;
    double val_criterion = 0.0;
};

struct RunRecord {
    std::string config_hash;
    std::string suite, source_task, target_task, method;
    std::uint64_t seed = 0;
    std::size_t n_c = 2;
    ExperimentConfig::GridCell chosen{0, 0, 0};
    double val_criterion = 0.0;
    double test_accuracy = 0.0;
    double worst_group_test_accuracy = 0.0;  // worst oracle-cell accuracy on test
    std::optional<double> source_test_accuracy;
    std::optional<ClusterEvalReport> cluster_scores;
    std::vector<GridCellResult> grid;
    bool failed = false;
    std::string failure;
    double wall_time_ms = 0.0;  // in-memory only; result files stay byte-stable
};

namespace detail {

inline std::vector<TaskBundle> build_suite(Suite s, std::uint64_t data_seed) {
    switch (s) {
        case Suite::binary_pairwise: return make_binary_suite(data_seed);
        case Suite::multiclass_colored: return make_multiclass_suite(data_seed);
        case Suite::multisource: return make_multisource_suite(data_seed);
        case Suite::theory: return {};
    }
    return {};
}

inline const TaskBundle& find_bundle(const std::vector<TaskBundle>& bundles, const std::string& id) {
    for (const auto& b : bundles)
        if (b.task_id == id) return b;
    throw std::invalid_argument("no task \"" + id + "\" in suite");
}

}  // namespace detail

// Per-seed shared artifacts: the generated suite, the source-phase models and
// partitions, the learned encoder, and the stable source model.
struct SeedArtifacts {
    std::uint64_t seed = 0;
    std::vector<TaskBundle> bundles;
    std::vector<SourceArtifacts> sources;  // aligned with config.source_tasks
    std::optional<TrainResult> f_z;
    std::optional<SourceStableModel> stable;  // only when reuse/finetune need it
};

inline TrainConfig source_phase_config(const ExperimentConfig& cfg, std::uint64_t seed,
                                       std::uint64_t tag) {
    TrainConfig c;
    c.dropout = 0.5;
    c.batch_size = cfg.batch_size;
    c.max_steps = cfg.max_steps;
    c.eval_every = cfg.eval_every;
    c.patience = cfg.patience;
    c.seed = mix_seed(mix_seed(cfg.data_seed_base, seed), tag);
    return c;
}

inline SeedArtifacts build_seed_artifacts(const ExperimentConfig& cfg, std::uint64_t seed) {
    SeedArtifacts art;
    art.seed = seed;
    art.bundles = detail::build_suite(cfg.suite, mix_seed(cfg.data_seed_base, seed));

    const bool needs_sources = [&] {
        for (const auto& m : cfg.methods)
            if (m != "erm" && m != "oracle") return true;
        return false;
    }();
    if (!needs_sources) return art;

    for (const auto& sid : cfg.source_tasks) {
        const TaskBundle& src = detail::find_bundle(art.bundles, sid);
        art.sources.push_back(
            build_source_artifacts(src, source_phase_config(cfg, seed, hash_str(sid))));
    }

    bool needs_fz = false, needs_stable = false;
    for (const auto& m : cfg.methods) {
        if (m == "tofu") needs_fz = true;
        if (m == "reuse" || m == "finetune") needs_stable = true;
    }
    if (needs_fz) {
        TripletConfig tc;
        tc.margin = cfg.margin;
        tc.batch_size = cfg.batch_size;
        tc.max_steps = 2 * cfg.max_steps;
        tc.eval_every = cfg.eval_every;
        tc.patience = cfg.patience;
        tc.seed = mix_seed(mix_seed(cfg.data_seed_base, seed), 0xf5a1u);
        std::vector<SourcePartitions> parts;
        for (const auto& s : art.sources) parts.push_back(s.parts);
        art.f_z = learn_unstable_representation(parts, tc);
    }
    if (needs_stable) {
        TrainConfig sc = source_phase_config(cfg, seed, 0x57a6u);
        sc.dropout = 0.0;
        sc.weight_decay = 1e-2;
        art.stable = train_source_stable(art.sources.front(), sc);
    }
    return art;
}

inline TrainConfig cell_config(const ExperimentConfig& cfg, const ExperimentConfig::GridCell& cell,
                               std::uint64_t seed, std::uint64_t tag) {
    TrainConfig c;
    c.lr = cell.lr;
    c.dropout = cell.dropout;
    c.weight_decay = cell.weight_decay;
    c.batch_size = cfg.batch_size;
    c.max_steps = cfg.max_steps;
    c.eval_every = cfg.eval_every;
    c.patience = cfg.patience;
    c.seed = mix_seed(mix_seed(cfg.data_seed_base, seed), tag);
    return c;
}

// Evaluation-only: worst accuracy over the oracle (label x unstable value)
// cells of the test environment.
inline double worst_oracle_cell_accuracy(const ModelParams& model, const Environment& test) {
    return worst_group_accuracy(model, test.features(), test.labels(), oracle_groups(test));
}

struct MethodOutput {
    RunRecord record;
    std::optional<ModelParams> target_model;
    std::optional<json> clusters_json;       // tofu only
    std::optional<std::string> curve_csv;    // tofu only, chosen cell
};

// One (method, seed, n_c) run: grid search with the method's own validation
// criterion, then test evaluation of the selected model.
inline MethodOutput run_method(const ExperimentConfig& cfg, const SeedArtifacts& art,
                               const std::string& method, std::size_t n_c) {
    const auto t_start = std::chrono::steady_clock::now();
    MethodOutput out;
    RunRecord& rec = out.record;
    rec.config_hash = config_hash(cfg);
    rec.suite = suite_name(cfg.suite);
    rec.source_task = cfg.source_tasks.empty() ? "" : cfg.source_tasks.front();
    if (cfg.source_tasks.size() > 1) {
        rec.source_task = cfg.source_tasks.front();
        for (std::size_t i = 1; i < cfg.source_tasks.size(); ++i)
            rec.source_task += "+" + cfg.source_tasks[i];
    }
    rec.target_task = cfg.target_task;
    rec.method = method;
    rec.seed = art.seed;
    rec.n_c = n_c;

    const TaskBundle& tgt = detail::find_bundle(art.bundles, cfg.target_task);
    const std::uint64_t cell_tag_base = hash_str(method) ^ (n_c * 0x9e37u);

    double best_val = -std::numeric_limits<double>::infinity();
    std::optional<ModelParams> best_model;
    std::optional<double> src_test;
    std::optional<ClusterAssignment> tofu_clusters;
    std::optional<std::string> best_curve;

    // tofu's clusters are fixed before the grid loop (T.1 happens once)
    std::optional<std::vector<std::vector<std::size_t>>> tofu_val_groups;
    if (method == "tofu") {
        const ModelParams& fz = art.f_z->model;
        tofu_clusters = cluster_by_label(
            fz, tgt.train1, n_c, mix_seed(mix_seed(cfg.data_seed_base, art.seed), 0xc1u));
        ClusterAssignment vca = cluster_by_label(
            fz, tgt.val, n_c, mix_seed(mix_seed(cfg.data_seed_base, art.seed), 0xc2u));
        tofu_val_groups = vca.group_index_lists();
    }

    const auto grid = cfg.grid();
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const TrainConfig tc = cell_config(cfg, grid[gi], art.seed, cell_tag_base + gi);
        double val = 0.0;
        std::optional<ModelParams> model;
        std::optional<std::string> curve;
        if (method == "erm") {
            BaselineRun r = run_erm(tgt, tc);
            val = r.val_criterion;
            model = std::move(r.model);
        } else if (method == "oracle") {
            BaselineRun r = run_oracle(tgt, tc);
            val = r.val_criterion;
            model = std::move(r.model);
        } else if (method == "reuse") {
            BaselineRun r = run_reuse(art.sources.front(), *art.stable, tgt, tc);
            val = r.val_criterion;
            model = std::move(r.model);
            src_test = r.source_test_accuracy;
        } else if (method == "finetune") {
            BaselineRun r = run_finetune(art.sources.front(), *art.stable, tgt, tc);
            val = r.val_criterion;
            model = std::move(r.model);
            src_test = r.source_test_accuracy;
        } else if (method == "multitask") {
            BaselineRun r = run_multitask(art.sources.front(), tgt, tc);
            val = r.val_criterion;
            model = std::move(r.model);
            src_test = r.source_test_accuracy;
        } else if (method == "tofu") {
            auto vfn = [&](const ModelParams& m) {
                return worst_group_accuracy(m, tgt.val.features(), tgt.val.labels(),
                                            *tofu_val_groups);
            };
            TrainResult r = group_dro_train(tgt.train1, *tofu_clusters, tc, vfn, true);
            val = r.best_val;
            std::ostringstream cs;
            cs << "step";
            const std::size_t n_groups = r.curve.empty() ? 0 : r.curve.front().group_loss.size();
            for (std::size_t g = 0; g < n_groups; ++g) cs << ",loss_g" << g;
            cs << ",selected_group,val_metric\n";
            for (const auto& row : r.curve) {
                cs << row.step;
                for (double l : row.group_loss) cs << "," << fmt_double(l);
                cs << "," << row.selected_group << ","
                   << (row.evaluated ? fmt_double(row.val_metric) : "") << "\n";
            }
            curve = cs.str();
            model = std::move(r.model);
        } else {
            throw std::invalid_argument("unknown method " + method);
        }
        rec.grid.push_back({grid[gi], val});
        if (val > best_val) {
            best_val = val;
            best_model = std::move(model);
            rec.chosen = grid[gi];
            if (curve) best_curve = std::move(curve);
        }
    }

    rec.val_criterion = best_val;
    rec.test_accuracy = env_accuracy(*best_model, tgt.test);
    rec.worst_group_test_accuracy = worst_oracle_cell_accuracy(*best_model, tgt.test);
    rec.source_test_accuracy = src_test;
    if (method == "tofu") {
        rec.cluster_scores = score_clusters(*tofu_clusters, tgt.train1);
        out.clusters_json = clusters_to_json(*tofu_clusters);
        out.curve_csv = best_curve;
    }
    out.target_model = std::move(best_model);
    rec.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
            .count();
    return out;
}

// --- plots -------------------------------------------------------------------

// Small logistic probe on 2-D projected points; reports training accuracy.
inline double linear_probe_accuracy(const Mat& points2d, const std::vector<int>& labels,
                                    int num_classes, std::uint64_t seed) {
    Rng rng(seed);
    ModelParams probe = make_mlp(2, {}, std::size_t(num_classes), rng, Activation::identity);
    AdamState adam = AdamState::like(probe, 0.05);
    Batch batch{points2d, labels, std::nullopt};
    Rng fr(0);
    for (int step = 0; step < 400; ++step) {
        Gradients g = backward(probe, batch, LossKind::cross_entropy, false, fr);
        adam_step(adam, probe, g);
    }
    return model_accuracy(probe, points2d, labels);
}

struct PlotOutputs {
    std::vector<std::pair<std::string, std::string>> files;  // name -> svg
    std::vector<std::string> warnings;
};

// Figure-style outputs: a PCA scatter of the encoder space colored by the
// hidden unstable value, and the accuracy-vs-cluster-count ablation.
inline PlotOutputs emit_plots(const std::vector<RunRecord>& records,
                              const std::optional<ModelParams>& f_z, const Environment* target_env,
                              const std::string& suite) {
    PlotOutputs out;
    if (f_z && target_env) {
        const Mat emb = encode(*f_z, target_env->features());
        Pca2 p = pca2(emb);
        if (p.degenerate) {
            out.warnings.push_back("encoder output is degenerate; skipping the PCA scatter");
        } else {
            const HiddenTruth& t = target_env->truth();
            out.files.push_back({"fz_pca_" + suite + ".svg",
                                 svg_scatter(p.projections, t.z, "unstable-feature space (top-2 PCA)",
                                             "z=")});
        }
    } else {
        out.warnings.push_back("no encoder/environment available; skipping the PCA scatter");
    }

    std::map<std::size_t, std::vector<double>> by_nc;
    for (const auto& r : records)
        if (r.method == "tofu" && !r.failed) by_nc[r.n_c].push_back(r.test_accuracy);
    if (by_nc.size() >= 2) {
        std::vector<double> xs, mean, stdev;
        for (auto& [nc, accs] : by_nc) {
            double m = 0.0;
            for (double a : accs) m += a;
            m /= double(accs.size());
            double v = 0.0;
            for (double a : accs) v += (a - m) * (a - m);
            xs.push_back(double(nc));
            mean.push_back(m);
            stdev.push_back(accs.size() > 1 ? std::sqrt(v / double(accs.size() - 1)) : 0.0);
        }
        out.files.push_back({"nc_ablation_" + suite + ".svg",
                             svg_line_errorbars(xs, mean, stdev, "accuracy vs cluster count",
                                                "clusters per label", "test accuracy")});
    } else if (records.empty()) {
        out.warnings.push_back("no records; skipping plots");
    }
    return out;
}

// --- theory battery ------------------------------------------------------------

struct TheoryReport {
    json j;
    bool pass = false;
};

inline TheoryReport run_theory_checks(std::uint64_t seed, int prop_pairs = 1000, int cor_pairs = 500,
                                      int thm_pairs = 8, std::size_t thm_trials = 2000) {
    TheoryReport rep;
    json& j = rep.j;

    double worst_mix = 0.0;
    for (int t = 0; t < prop_pairs; ++t) {
        Rng rng(mix_seed(seed, std::uint64_t(t)));
        DiscreteJoint joint = fuzz_random_joint(rng);
        ConditionalY cond = fuzz_random_conditional(rng);
        PartitionedJoint part = partition_distribution(joint, cond);
        if (part.correct_degenerate || part.incorrect_degenerate) continue;
        for (std::size_t i = 0; i < joint.p.size(); ++i)
            worst_mix = std::max(worst_mix, std::abs(part.alpha * part.correct.p[i] +
                                                     (1.0 - part.alpha) * part.incorrect.p[i] -
                                                     joint.p[i]));
    }
    const bool prop1_ok = worst_mix < 1e-12;
    j["prop1"] = {{"pairs", prop_pairs}, {"max_mixture_error", worst_mix}, {"pass", prop1_ok}};

    int p2_hyp = 0, p2_hold = 0;
    for (int t = 0; t < prop_pairs; ++t) {
        Rng rng(mix_seed(seed ^ 0x9a2bu, std::uint64_t(t)));
        FuzzedPair pair = fuzz_hypothesis_pair(rng);
        Prop2Report r = check_prop2(pair.p_i, pair.p_j);
        if (r.hypotheses.satisfied_prop2() && r.applicable) {
            ++p2_hyp;
            if (r.holds) ++p2_hold;
        }
    }
    const bool prop2_ok = p2_hyp == prop_pairs && p2_hold == p2_hyp;
    j["prop2"] = {{"pairs", prop_pairs},
                  {"hypothesis_satisfied", p2_hyp},
                  {"sign_holds", p2_hold},
                  {"pass", prop2_ok}};

    int c1_hyp = 0, c1_hold = 0;
    for (int t = 0; t < cor_pairs; ++t) {
        Rng rng(mix_seed(seed ^ 0x77c1u, std::uint64_t(t)));
        FuzzedPair pair = fuzz_hypothesis_pair(rng);
        Cor1Report r = check_cor1(pair.p_i, pair.p_j);
        if (r.hypotheses.satisfied_cor1() && r.applicable) {
            ++c1_hyp;
            if (r.holds()) ++c1_hold;
        }
    }
    const bool cor1_ok = c1_hyp == cor_pairs && c1_hold == c1_hyp;
    j["cor1"] = {{"pairs", cor_pairs},
                 {"hypothesis_satisfied", c1_hyp},
                 {"holds", c1_hold},
                 {"pass", cor1_ok}};

    // Theorem 1 Monte Carlo on the standard suite: agreement gap >= 0.05 with
    // a_j >= 0.65 so batch 256 reaches the asymptotic regime.
    const std::size_t sizes[4] = {4, 16, 64, 256};
    bool monotone = true;
    double min_at_256 = 1.0;
    json fractions = json::array();
    for (int p = 0; p < thm_pairs; ++p) {
        Rng rng(mix_seed(seed ^ 0x7713u, std::uint64_t(p)));
        const double a_j = rng.uniform(0.65, 0.85);
        const double a_i = rng.uniform(a_j + 0.05, 0.95);
        const double s = rng.uniform(0.6, 0.9);
        DiscreteJoint p_i = make_symmetric_binary_joint(a_i, s);
        DiscreteJoint p_j = make_symmetric_binary_joint(a_j, s);
        PartitionedJoint part = partition_distribution(p_j, bayes_conditional(p_i));
        json row = json::array();
        double prev = 0.0;
        for (int si = 0; si < 4; ++si) {
            const double frac = simulate_theorem1(part, 1, sizes[si], thm_trials,
                                                  mix_seed(seed, std::uint64_t(p * 16 + si)));
            if (frac < prev - 0.02) monotone = false;
            prev = frac;
            row.push_back(frac);
            if (sizes[si] == 256) min_at_256 = std::min(min_at_256, frac);
        }
        fractions.push_back(std::move(row));
    }
    const bool thm1_ok = monotone && min_at_256 >= 0.95;
    j["thm1"] = {{"suite_pairs", thm_pairs},
                 {"batch_sizes", {4, 16, 64, 256}},
                 {"fractions", fractions},
                 {"min_fraction_at_256", min_at_256},
                 {"monotone", monotone},
                 {"trials", thm_trials},
                 {"pass", thm1_ok}};

    rep.pass = prop1_ok && prop2_ok && cor1_ok && thm1_ok;
    j["pass"] = rep.pass;
    return rep;
}

// --- the full experiment --------------------------------------------------------

inline json record_to_json(const RunRecord& r) {
    json j;
    j["config_hash"] = r.config_hash;
    j["suite"] = r.suite;
    j["source_task"] = r.source_task;
    j["target_task"] = r.target_task;
    j["method"] = r.method;
    j["seed"] = r.seed;
    j["n_c"] = r.n_c;
    j["chosen"] = {{"lr", r.chosen.lr},
                   {"dropout", r.chosen.dropout},
                   {"weight_decay", r.chosen.weight_decay}};
    j["val_criterion"] = r.val_criterion;
    j["test_accuracy"] = r.test_accuracy;
    j["worst_group_test_accuracy"] = r.worst_group_test_accuracy;
    if (r.source_test_accuracy) j["source_test_accuracy"] = *r.source_test_accuracy;
    if (r.cluster_scores) {
        j["cluster_scores"] = {{"homogeneity", r.cluster_scores->homogeneity},
                               {"completeness", r.cluster_scores->completeness},
                               {"v_measure", r.cluster_scores->v_measure}};
    }
    j["grid"] = json::array();
    for (const auto& g : r.grid)
        j["grid"].push_back({{"lr", g.cell.lr},
                             {"dropout", g.cell.dropout},
                             {"weight_decay", g.cell.weight_decay},
                             {"val_criterion", g.val_criterion}});
    if (r.failed) j["failure"] = r.failure;
    return j;
}

inline const char* results_csv_header() {
    return "config_hash,suite,source_task,target_task,method,seed,n_c,learning_rate,dropout,"
           "weight_decay,val_criterion,test_accuracy,worst_group_test_accuracy,"
           "source_test_accuracy,homogeneity,completeness,v_measure,failed";
}

inline std::string record_to_csv_row(const RunRecord& r) {
    std::ostringstream os;
    os << r.config_hash << "," << csv_escape(r.suite) << "," << csv_escape(r.source_task) << ","
       << csv_escape(r.target_task) << "," << r.method << "," << r.seed << "," << r.n_c << ","
       << fmt_double(r.chosen.lr) << "," << fmt_double(r.chosen.dropout) << ","
       << fmt_double(r.chosen.weight_decay) << "," << fmt_double(r.val_criterion) << ","
       << fmt_double(r.test_accuracy) << "," << fmt_double(r.worst_group_test_accuracy) << ","
       << (r.source_test_accuracy ? fmt_double(*r.source_test_accuracy) : "") << ","
       << (r.cluster_scores ? fmt_double(r.cluster_scores->homogeneity) : "") << ","
       << (r.cluster_scores ? fmt_double(r.cluster_scores->completeness) : "") << ","
       << (r.cluster_scores ? fmt_double(r.cluster_scores->v_measure) : "") << ","
       << (r.failed ? "1" : "0");
    return os.str();
}

struct ExperimentOutput {
    std::vector<RunRecord> records;
    std::vector<std::string> files_written;
};

// Executes generation, the source phase where needed, the target phase, and
// evaluation for every (method, seed, n_c); selects each method's grid cell by
// its own validation criterion; writes results.csv/results.json, cluster and
// model files, plots, and a manifest. Output bytes depend only on the config.
inline ExperimentOutput run_experiment(const ExperimentConfig& cfg, int jobs = 1,
                                       std::ostream* log = nullptr) {
    namespace fs = std::filesystem;
    ExperimentOutput out;
    const std::string hash = config_hash(cfg);
    fs::create_directories(cfg.out_dir);

    if (cfg.suite == Suite::theory) {
        TheoryReport rep = run_theory_checks(mix_seed(cfg.data_seed_base, cfg.seeds.front()));
        const std::string path = cfg.out_dir + "/theory_report.json";
        write_text_file(path, rep.j.dump(2) + "\n");
        json manifest;
        manifest["config"] = config_to_json(cfg);
        manifest["config_hash"] = hash;
        manifest["files"] = {path};
        write_text_file(cfg.out_dir + "/manifest.json", manifest.dump(2) + "\n");
        out.files_written = {path, cfg.out_dir + "/manifest.json"};
        return out;
    }

    // stage A: per-seed shared artifacts, parallel across seeds
    std::vector<SeedArtifacts> artifacts(cfg.seeds.size());
    {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= cfg.seeds.size()) return;
                artifacts[i] = build_seed_artifacts(cfg, cfg.seeds[i]);
            }
        };
        std::vector<std::thread> pool;
        const int nthreads = std::max(1, std::min<int>(jobs, int(cfg.seeds.size())));
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // stage B: (method, seed, n_c) jobs
    struct JobSpec {
        std::size_t seed_idx;
        std::string method;
        std::size_t n_c;
    };
    std::vector<JobSpec> specs;
    for (const auto& method : cfg.methods)
        for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
            if (method == "tofu") {
                for (std::size_t nc : cfg.n_clusters) specs.push_back({si, method, nc});
            } else {
                specs.push_back({si, method, cfg.n_clusters.front()});
            }
        }
    std::vector<MethodOutput> outputs(specs.size());
    {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= specs.size()) return;
                const JobSpec& js = specs[i];
                try {
                    outputs[i] = run_method(cfg, artifacts[js.seed_idx], js.method, js.n_c);
                } catch (const std::exception& e) {
                    RunRecord rec;
                    rec.config_hash = hash;
                    rec.suite = suite_name(cfg.suite);
                    rec.method = js.method;
                    rec.seed = cfg.seeds[js.seed_idx];
                    rec.n_c = js.n_c;
                    rec.failed = true;
                    rec.failure = e.what();
                    outputs[i].record = std::move(rec);
                }
            }
        };
        std::vector<std::thread> pool;
        const int nthreads = std::max(1, std::min<int>(jobs, int(specs.size())));
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // merge in the deterministic spec order (already deterministic: specs order)
    for (auto& mo : outputs) out.records.push_back(mo.record);

    // output files
    fs::create_directories(cfg.out_dir + "/models");
    fs::create_directories(cfg.out_dir + "/clusters");
    fs::create_directories(cfg.out_dir + "/plots");
    fs::create_directories(cfg.out_dir + "/curves");
    auto emit = [&](const std::string& rel, const std::string& content) {
        const std::string path = cfg.out_dir + "/" + rel;
        write_text_file(path, content);
        out.files_written.push_back(path);
    };

    std::ostringstream csv;
    csv << results_csv_header() << "\n";
    for (const auto& r : out.records) csv << record_to_csv_row(r) << "\n";
    emit("results.csv", csv.str());

    json jrecords = json::array();
    for (const auto& r : out.records) jrecords.push_back(record_to_json(r));
    json jresults;
    jresults["config"] = config_to_json(cfg);
    jresults["config_hash"] = hash;
    jresults["records"] = std::move(jrecords);
    emit("results.json", jresults.dump(2) + "\n");

    for (std::size_t i = 0; i < specs.size(); ++i) {
        const JobSpec& js = specs[i];
        const RunRecord& rec = outputs[i].record;
        if (rec.failed) continue;
        const std::string stem =
            js.method + "_seed" + std::to_string(cfg.seeds[js.seed_idx]) + "_nc" + std::to_string(js.n_c);
        if (outputs[i].target_model)
            emit("models/" + stem + ".json", model_to_json(*outputs[i].target_model).dump(2) + "\n");
        if (outputs[i].clusters_json)
            emit("clusters/" + stem + ".json", outputs[i].clusters_json->dump(2) + "\n");
        if (outputs[i].curve_csv) emit("curves/" + stem + ".csv", *outputs[i].curve_csv);
    }
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si)
        if (artifacts[si].f_z)
            emit("models/fz_seed" + std::to_string(cfg.seeds[si]) + ".json",
                 model_to_json(artifacts[si].f_z->model).dump(2) + "\n");
    if (!cfg.source_tasks.empty() && !artifacts.empty() && !artifacts.front().sources.empty())
        fs::create_directories(cfg.out_dir + "/partitions");
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si)
        for (std::size_t s = 0; s < artifacts[si].sources.size(); ++s) {
            const auto& parts = artifacts[si].sources[s].parts;
            json j;
            j["task"] = cfg.source_tasks[s];
            j["directions"] = json::array(
                {partition_to_json(parts.f1_on_env2), partition_to_json(parts.f2_on_env1)});
            emit("partitions/" + cfg.source_tasks[s] + "_seed" + std::to_string(cfg.seeds[si]) +
                     ".json",
                 j.dump(2) + "\n");
        }

    // plots from the first seed's encoder on the target training environment
    {
        std::optional<ModelParams> fz;
        const Environment* env = nullptr;
        if (!artifacts.empty() && artifacts.front().f_z) {
            fz = artifacts.front().f_z->model;
            env = &detail::find_bundle(artifacts.front().bundles, cfg.target_task).train1;
        }
        PlotOutputs plots = emit_plots(out.records, fz, env, suite_name(cfg.suite));
        for (const auto& [name, content] : plots.files) emit("plots/" + name, content);
        if (log)
            for (const auto& w : plots.warnings) *log << "warning: " << w << "\n";
    }

    json manifest;
    manifest["config"] = config_to_json(cfg);
    manifest["config_hash"] = hash;
    manifest["files"] = out.files_written;
    emit("manifest.json", manifest.dump(2) + "\n");
    return out;
}

}  // namespace tofu
