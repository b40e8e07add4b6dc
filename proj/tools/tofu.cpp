#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "tofu/experiment.hpp"

namespace fs = std::filesystem;
using namespace tofu;

namespace {

// Relative output paths are rooted at $TOFU_OUT_ROOT when it is set.
std::string resolve_out_dir(const std::string& dir) {
    if (fs::path(dir).is_absolute()) return dir;
    const char* root = std::getenv("TOFU_OUT_ROOT");
    if (!root || !*root) return dir;
    return (fs::path(root) / dir).string();
}

int cmd_gen(const std::string& suite_str, const std::string& out_dir, std::uint64_t seed) {
    Suite suite;
    if (suite_str == "binary_pairwise") suite = Suite::binary_pairwise;
    else if (suite_str == "multiclass_colored") suite = Suite::multiclass_colored;
    else if (suite_str == "multisource") suite = Suite::multisource;
    else {
        std::cerr << "unknown suite: " << suite_str << "\n";
        return 1;
    }
    const std::string dir = resolve_out_dir(out_dir);
    fs::create_directories(dir);
    std::vector<TaskBundle> bundles = detail::build_suite(suite, seed);
    json manifest;
    manifest["suite"] = suite_str;
    manifest["seed"] = seed;
    manifest["bundles"] = json::array();
    for (const TaskBundle& b : bundles) {
        const std::string prefix = b.task_id;
        for (const Environment* env : b.environments()) {
            const std::string path = dir + "/" + prefix + "_" + role_name(env->role()) + ".jsonl";
            std::ofstream f(path);
            if (!f) {
                std::cerr << "cannot write " << path << "\n";
                return 1;
            }
            write_environment_jsonl(*env, f);
        }
        manifest["bundles"].push_back(bundle_manifest(b, prefix));
    }
    write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
    std::cout << "wrote " << bundles.size() << " task bundles to " << dir << "\n";
    return 0;
}

int cmd_theory_check(const std::string& out_path, std::uint64_t seed, int pairs, int trials) {
    TheoryReport rep = run_theory_checks(seed, pairs, pairs / 2, 8, std::size_t(trials));
    if (!out_path.empty() && out_path != "-") {
        const std::string resolved = resolve_out_dir(out_path);
        const fs::path parent = fs::path(resolved).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
        write_text_file(resolved, rep.j.dump(2) + "\n");
    }
    std::cout << rep.j.dump(2) << "\n";
    return rep.pass ? 0 : 1;
}

int cmd_run(const std::string& config_path, int jobs, long seed_override) {
    ParsedConfig parsed = validate_config(config_path);
    if (!parsed.ok()) {
        for (const auto& e : parsed.errors) std::cerr << "config error: " << e << "\n";
        return 1;
    }
    ExperimentConfig cfg = parsed.config;
    if (seed_override >= 0) cfg.seeds = {std::uint64_t(seed_override)};
    cfg.out_dir = resolve_out_dir(cfg.out_dir);
    try {
        ExperimentOutput out = run_experiment(cfg, jobs, &std::cerr);
        std::size_t failed = 0;
        for (const auto& r : out.records)
            if (r.failed) ++failed;
        std::cout << "wrote " << out.files_written.size() << " files to " << cfg.out_dir << " ("
                  << out.records.size() << " records";
        if (failed) std::cout << ", " << failed << " failed";
        std::cout << ")\n";
        return failed == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return 1;
    }
}

int cmd_plots(const std::string& run_dir_in) {
    const std::string run_dir = resolve_out_dir(run_dir_in);
    const std::string results_path = run_dir + "/results.json";
    if (!fs::exists(results_path)) {
        std::cerr << "warning: no results.json under " << run_dir << "; nothing to plot\n";
        return 0;
    }
    json jresults = json::parse(read_text_file(results_path));
    std::vector<RunRecord> records;
    for (const auto& jr : jresults.at("records")) {
        RunRecord r;
        r.method = jr.at("method").get<std::string>();
        r.n_c = jr.at("n_c").get<std::size_t>();
        r.test_accuracy = jr.value("test_accuracy", 0.0);
        r.failed = jr.contains("failure");
        records.push_back(std::move(r));
    }
    const json& jc = jresults.at("config");
    const std::string suite_str = jc.at("suite").get<std::string>();
    std::optional<ModelParams> fz;
    const Environment* env = nullptr;
    std::vector<TaskBundle> bundles;
    const std::uint64_t seed0 =
        jc.at("seeds").empty() ? 0 : jc.at("seeds")[0].get<std::uint64_t>();
    const std::string fz_path = run_dir + "/models/fz_seed" + std::to_string(seed0) + ".json";
    if (fs::exists(fz_path) && suite_str != "theory") {
        fz = load_model(fz_path);
        Suite suite = Suite::binary_pairwise;
        if (suite_str == "multiclass_colored") suite = Suite::multiclass_colored;
        else if (suite_str == "multisource") suite = Suite::multisource;
        bundles = detail::build_suite(
            suite, mix_seed(jc.at("data_seed_base").get<std::uint64_t>(), seed0));
        env = &detail::find_bundle(bundles, jc.at("target_task").get<std::string>()).train1;
    }
    PlotOutputs plots = emit_plots(records, fz, env, suite_str);
    fs::create_directories(run_dir + "/plots");
    for (const auto& [name, content] : plots.files)
        write_text_file(run_dir + "/plots/" + name, content);
    for (const auto& w : plots.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << plots.files.size() << " plots to " << run_dir << "/plots\n";
    return 0;
}

int cmd_validate(const std::string& config_path) {
    ParsedConfig parsed = validate_config(config_path);
    if (parsed.ok()) {
        std::cout << "OK " << config_hash(parsed.config) << "\n";
        return 0;
    }
    for (const auto& e : parsed.errors) std::cout << "error: " << e << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic distribution-shift workbench: unstable-feature transfer, baselines, "
                 "and theory checks"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate a synthetic task suite as JSONL + manifest");
    std::string gen_suite = "binary_pairwise", gen_out = "data";
    std::uint64_t gen_seed = 0;
    gen->add_option("--suite", gen_suite, "binary_pairwise | multiclass_colored | multisource");
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--seed", gen_seed, "generation seed");

    auto* theory = app.add_subcommand("theory-check", "run the exact discrete-distribution checks");
    std::string theory_out = "theory_report.json";
    std::uint64_t theory_seed = 0;
    int theory_pairs = 1000, theory_trials = 2000;
    theory->add_option("--out", theory_out, "report path ('-' for stdout only)");
    theory->add_option("--seed", theory_seed, "fuzzer seed");
    theory->add_option("--pairs", theory_pairs, "fuzzed pair count");
    theory->add_option("--trials", theory_trials, "Monte Carlo trials per batch size");

    auto* run = app.add_subcommand("run", "run a config-driven experiment");
    std::string run_config;
    int run_jobs = 1;
    long run_seed = -1;
    run->add_option("--config", run_config, "experiment config file")->required();
    run->add_option("--jobs", run_jobs, "worker threads");
    run->add_option("--seed", run_seed, "override the config's seed list with one seed");

    auto* plots = app.add_subcommand("plots", "re-emit plots from a finished run directory");
    std::string plots_dir;
    plots->add_option("--run-dir", plots_dir, "directory with results.json and models/")->required();

    auto* validate = app.add_subcommand("validate", "check a config file and print all violations");
    std::string validate_config_path;
    validate->add_option("--config", validate_config_path, "experiment config file")->required();

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) return cmd_gen(gen_suite, gen_out, gen_seed);
    if (theory->parsed()) return cmd_theory_check(theory_out, theory_seed, theory_pairs, theory_trials);
    if (run->parsed()) return cmd_run(run_config, run_jobs, run_seed);
    if (plots->parsed()) return cmd_plots(plots_dir);
    if (validate->parsed()) return cmd_validate(validate_config_path);
    return 1;
}
