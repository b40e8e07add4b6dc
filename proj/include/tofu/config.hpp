#pragma once
#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tofu/rng.hpp"
#include "tofu/serialize.hpp"

namespace tofu {

enum class Suite { binary_pairwise, multiclass_colored, multisource, theory };

inline const char* suite_name(Suite s) {
    switch (s) {
        case Suite::binary_pairwise: return "binary_pairwise";
        case Suite::multiclass_colored: return "multiclass_colored";
        case Suite::multisource: return "multisource";
        case Suite::theory: return "theory";
    }
    return "?";
}

struct ExperimentConfig {
    Suite suite = Suite::binary_pairwise;
    std::vector<std::string> source_tasks;  // one entry except for multisource
    std::string target_task;
    std::vector<std::string> methods;  // subset of erm/reuse/finetune/multitask/tofu/oracle
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::vector<double> learning_rates = {1e-3, 1e-4};
    std::vector<double> dropouts;       // one regularization axis is active per run
    std::vector<double> weight_decays;  // (suite default fills whichever is empty)
    std::vector<std::size_t> n_clusters = {2};
    double margin = 0.3;
    std::size_t batch_size = 50;
    long max_steps = 3000;
    long eval_every = 100;
    long patience = 20;
    std::string out_dir = "out";
    std::uint64_t data_seed_base = 0;  // suite generation seed offset

    struct GridCell {
        double lr, dropout, weight_decay;
    };
    std::vector<GridCell> grid() const {
        std::vector<GridCell> cells;
        for (double lr : learning_rates) {
            for (double d : dropouts) cells.push_back({lr, d, 0.0});
            for (double w : weight_decays) cells.push_back({lr, 0.0, w});
        }
        return cells;
    }
};

// Canonical serialization for hashing and the run manifest.
inline json config_to_json(const ExperimentConfig& c) {
    json j;
    j["suite"] = suite_name(c.suite);
    j["source_tasks"] = c.source_tasks;
    j["target_task"] = c.target_task;
    j["methods"] = c.methods;
    j["seeds"] = c.seeds;
    j["learning_rates"] = c.learning_rates;
    j["dropouts"] = c.dropouts;
    j["weight_decays"] = c.weight_decays;
    j["n_clusters"] = c.n_clusters;
    j["margin"] = c.margin;
    j["batch_size"] = c.batch_size;
    j["max_steps"] = c.max_steps;
    j["eval_every"] = c.eval_every;
    j["patience"] = c.patience;
    j["data_seed_base"] = c.data_seed_base;
    return j;
}

inline std::string config_hash(const ExperimentConfig& c) {
    const std::string canon = config_to_json(c).dump();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)hash_str(canon));
    return buf;
}

// --- strict key = value parsing ---------------------------------------------

struct ParsedConfig {
    ExperimentConfig config;
    std::vector<std::string> errors;  // all schema violations, not just the first
    bool ok() const { return errors.empty(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

}  // namespace detail

inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "suite",        "source_tasks", "target_task",   "methods",     "seeds",
        "learning_rates", "dropouts",   "weight_decays", "n_clusters",  "margin",
        "batch_size",   "max_steps",    "eval_every",    "patience",    "out_dir",
        "data_seed_base"};
    return keys;
}

inline const std::set<std::string>& known_methods() {
    static const std::set<std::string> m = {"erm", "reuse", "finetune", "multitask", "tofu",
                                            "oracle"};
    return m;
}

inline std::vector<std::string> suite_task_ids(Suite s) {
    switch (s) {
        case Suite::binary_pairwise: return {"bin_a", "bin_b"};
        case Suite::multiclass_colored: return {"mc_a", "mc_b"};
        case Suite::multisource: return {"s1", "s2", "s3", "t"};
        case Suite::theory: return {};
    }
    return {};
}

// Parse the strict key = value format: '#' comments, unknown keys rejected,
// duplicates rejected, every violation reported.
inline ParsedConfig parse_config_text(const std::string& text) {
    ParsedConfig out;
    ExperimentConfig& c = out.config;
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            out.errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (!known_config_keys().count(key)) {
            out.errors.push_back("unknown key \"" + key + "\"");
            continue;
        }
        if (kv.count(key)) {
            out.errors.push_back("duplicate key \"" + key + "\"");
            continue;
        }
        kv[key] = val;
    }

    auto parse_doubles = [&](const std::string& key, std::vector<double>& dst) {
        if (!kv.count(key)) return;
        dst.clear();
        for (const auto& tok : detail::split_list(kv[key])) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(tok, &pos);
                if (pos != tok.size()) throw std::invalid_argument(tok);
                dst.push_back(v);
            } catch (...) {
                out.errors.push_back(key + ": cannot parse \"" + tok + "\" as a real number");
            }
        }
    };
    auto parse_long = [&](const std::string& key, auto& dst) {
        if (!kv.count(key)) return;
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(kv[key], &pos);
            if (pos != kv[key].size() || v < 0) throw std::invalid_argument(kv[key]);
            dst = static_cast<std::decay_t<decltype(dst)>>(v);
        } catch (...) {
            out.errors.push_back(key + ": cannot parse \"" + kv[key] + "\" as a non-negative integer");
        }
    };

    if (kv.count("suite")) {
        const std::string& s = kv["suite"];
        if (s == "binary_pairwise") c.suite = Suite::binary_pairwise;
        else if (s == "multiclass_colored") c.suite = Suite::multiclass_colored;
        else if (s == "multisource") c.suite = Suite::multisource;
        else if (s == "theory") c.suite = Suite::theory;
        else out.errors.push_back("suite: unknown suite \"" + s + "\"");
    }
    if (kv.count("source_tasks")) c.source_tasks = detail::split_list(kv["source_tasks"]);
    if (kv.count("target_task")) c.target_task = kv["target_task"];
    if (kv.count("methods")) c.methods = detail::split_list(kv["methods"]);
    if (kv.count("seeds")) {
        c.seeds.clear();
        for (const auto& tok : detail::split_list(kv["seeds"])) {
            try {
                std::size_t pos = 0;
                const unsigned long long v = std::stoull(tok, &pos);
                if (pos != tok.size()) throw std::invalid_argument(tok);
                c.seeds.push_back(v);
            } catch (...) {
                out.errors.push_back("seeds: cannot parse \"" + tok + "\" as an integer");
            }
        }
    }
    parse_doubles("learning_rates", c.learning_rates);
    parse_doubles("dropouts", c.dropouts);
    parse_doubles("weight_decays", c.weight_decays);
    if (kv.count("n_clusters")) {
        c.n_clusters.clear();
        for (const auto& tok : detail::split_list(kv["n_clusters"])) {
            try {
                std::size_t pos = 0;
                const long v = std::stol(tok, &pos);
                if (pos != tok.size() || v < 1) throw std::invalid_argument(tok);
                c.n_clusters.push_back(std::size_t(v));
            } catch (...) {
                out.errors.push_back("n_clusters: cannot parse \"" + tok + "\" as a positive integer");
            }
        }
    }
    if (kv.count("margin")) {
        try {
            c.margin = std::stod(kv["margin"]);
        } catch (...) {
            out.errors.push_back("margin: cannot parse \"" + kv["margin"] + "\"");
        }
    }
    parse_long("batch_size", c.batch_size);
    parse_long("max_steps", c.max_steps);
    parse_long("eval_every", c.eval_every);
    parse_long("patience", c.patience);
    parse_long("data_seed_base", c.data_seed_base);
    if (kv.count("out_dir")) c.out_dir = kv["out_dir"];

    // suite-dependent default regularization axis: dropout for the token
    // suite, weight decay for the colored ones
    if (c.dropouts.empty() && c.weight_decays.empty()) {
        if (c.suite == Suite::binary_pairwise) c.dropouts = {0.1, 0.3, 0.5};
        else c.weight_decays = {1e-1, 1e-2, 1e-3};
    }
    if (c.suite != Suite::theory) {
        const auto ids = suite_task_ids(c.suite);
        if (c.source_tasks.empty()) {
            if (c.suite == Suite::multisource) c.source_tasks = {"s1", "s2", "s3"};
            else c.source_tasks = {ids[0]};
        }
        if (c.target_task.empty()) c.target_task = ids.back();
        if (c.methods.empty()) out.errors.push_back("methods: at least one method is required");
    }

    // validation proper
    if (c.seeds.empty()) out.errors.push_back("seeds must be nonempty");
    for (const auto& m : c.methods)
        if (!known_methods().count(m)) out.errors.push_back("methods: unknown method \"" + m + "\"");
    if (c.suite != Suite::theory) {
        const auto ids = suite_task_ids(c.suite);
        auto known_task = [&](const std::string& t) {
            return std::find(ids.begin(), ids.end(), t) != ids.end();
        };
        for (const auto& t : c.source_tasks)
            if (!known_task(t)) out.errors.push_back("source_tasks: no task \"" + t + "\" in suite");
        if (!c.target_task.empty() && !known_task(c.target_task))
            out.errors.push_back("target_task: no task \"" + c.target_task + "\" in suite");
        for (const auto& t : c.source_tasks)
            if (t == c.target_task)
                out.errors.push_back("source_tasks: task \"" + t + "\" is also the target");
        if (c.suite != Suite::multisource && c.source_tasks.size() > 1)
            out.errors.push_back("source_tasks: this suite takes a single source task");
        const bool needs_source = [&] {
            for (const auto& m : c.methods)
                if (m != "erm" && m != "oracle") return true;
            return false;
        }();
        if (c.suite == Suite::multisource) {
            for (const auto& m : c.methods)
                if (m == "reuse" || m == "finetune" || m == "multitask")
                    out.errors.push_back("methods: \"" + m + "\" is not supported on the multisource suite");
        }
        if (needs_source && c.source_tasks.empty())
            out.errors.push_back("source_tasks required by the requested methods");
    }
    if (c.learning_rates.empty()) out.errors.push_back("learning_rates must be nonempty");
    if (c.margin <= 0.0) out.errors.push_back("margin must be > 0");
    if (c.batch_size < 2) out.errors.push_back("batch_size must be >= 2");
    if (c.n_clusters.empty()) out.errors.push_back("n_clusters must be nonempty");
    if (c.grid().empty()) out.errors.push_back("hyperparameter grid is empty");
    return out;
}

inline ParsedConfig validate_config(const std::string& path) {
    ParsedConfig out;
    std::ifstream f(path);
    if (!f) {
        out.errors.push_back("cannot read config file: " + path);
        return out;
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace tofu
