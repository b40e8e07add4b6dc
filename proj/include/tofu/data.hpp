#pragma once
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tofu/discrete.hpp"
#include "tofu/mat.hpp"
#include "tofu/rng.hpp"

namespace tofu {

enum class Role { train1, train2, val, test };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::train1: return "train1";
        case Role::train2: return "train2";
        case Role::val: return "val";
        case Role::test: return "test";
    }
    return "?";
}

inline Role role_from_name(const std::string& s) {
    if (s == "train1") return Role::train1;
    if (s == "train2") return Role::train2;
    if (s == "val") return Role::val;
    if (s == "test") return Role::test;
    throw std::invalid_argument("unknown role: " + s);
}

// One data point as produced by a generator. The z/c fields are hidden truth
// for evaluation and the oracle baseline; everything that trains a model goes
// through Environment's features()/labels() view instead.
struct Example {
    std::vector<double> x;
    int y = 0;
    int z_hidden = 0;
    int c_hidden = 0;
};

struct EnvironmentSpec {
    std::string task_id;
    int num_classes = 2;          // K
    int num_unstable_values = 2;  // M (one-hot width of the unstable block)
    double eta = 0.8;             // P(unstable value agrees with the observed label)
    double label_noise_keep = 1.0;
    std::size_t n = 5000;
    int stable_dim = 20;
    int unstable_dim = 2;
    double stable_noise_sigma = 0.5;
    std::uint64_t seed = 0;
    int proto_offset = 0;      // basis index of the first class prototype
    double proto_scale = 1.0;  // prototype magnitude; sets how learnable the stable block is
    // Restricted color support (multi-source suite): base_color[y] plus the
    // alternative colors drawn when the agreement flip happens. Empty means
    // colors coincide with label ids and alternatives are all other values.
    std::vector<int> base_color;
    std::vector<std::vector<int>> alt_colors;

    int input_dim() const { return stable_dim + unstable_dim; }
};

struct HiddenTruth {
    std::vector<int> z;
    std::vector<int> c;
};

// A generated environment. Training-facing code sees only features() and
// labels(); the hidden truth is reachable only through truth(), and every
// read is counted so tests can assert which code paths touch it.
class Environment {
public:
    Environment() = default;
    Environment(EnvironmentSpec spec, Role role, Mat x, std::vector<int> y, HiddenTruth truth)
        : spec_(std::move(spec)), role_(role), x_(std::move(x)), y_(std::move(y)),
          truth_(std::move(truth)) {}

    const EnvironmentSpec& spec() const { return spec_; }
    Role role() const { return role_; }
    std::size_t size() const { return y_.size(); }

    const Mat& features() const { return x_; }
    const std::vector<int>& labels() const { return y_; }

    const HiddenTruth& truth() const {
        ++truth_reads_;
        return truth_;
    }
    long truth_reads() const { return truth_reads_; }

    Example example(std::size_t i) const {
        Example e;
        e.x.assign(x_.row(i), x_.row(i) + x_.cols);
        e.y = y_[i];
        const HiddenTruth& t = truth();
        e.z_hidden = t.z[i];
        e.c_hidden = t.c[i];
        return e;
    }

private:
    EnvironmentSpec spec_;
    Role role_ = Role::train1;
    Mat x_;
    std::vector<int> y_;
    HiddenTruth truth_;
    mutable long truth_reads_ = 0;
};

struct TaskBundle {
    std::string task_id;
    std::string generator;  // "binary_token" | "multiclass_colored" | "multisource"
    Environment train1, val, test;
    std::optional<Environment> train2;

    std::vector<const Environment*> environments() const {
        std::vector<const Environment*> v{&train1};
        if (train2) v.push_back(&*train2);
        v.push_back(&val);
        v.push_back(&test);
        return v;
    }
};

namespace detail {

// Fixed orthogonal prototypes: class c maps to basis vector proto_offset + c.
inline void write_stable_block(std::vector<double>& x, const EnvironmentSpec& spec, int c, Rng& rng) {
    for (int d = 0; d < spec.stable_dim; ++d) x[std::size_t(d)] = spec.stable_noise_sigma * rng.gaussian();
    const int axis = spec.proto_offset + c;
    if (axis >= spec.stable_dim)
        throw std::invalid_argument("prototype axis " + std::to_string(axis) + " outside stable_dim");
    x[std::size_t(axis)] += spec.proto_scale;
}

inline void write_unstable_block(std::vector<double>& x, const EnvironmentSpec& spec, int z) {
    if (z < 0 || z >= spec.unstable_dim)
        throw std::invalid_argument("unstable value outside one-hot width");
    x[std::size_t(spec.stable_dim + z)] = 1.0;
}

inline int flip_uniform_other(int value, int cardinality, Rng& rng) {
    int pick = rng.uniform_int(cardinality - 1);
    return pick >= value ? pick + 1 : pick;
}

}  // namespace detail

// Binary task with an appended pseudo-token block: y uniform, stable block is
// the class prototype plus Gaussian noise, z agrees with y with probability
// eta, no label noise.
inline Environment gen_binary_token_task(const EnvironmentSpec& spec, Role role) {
    if (spec.num_classes != 2 || spec.num_unstable_values != 2)
        throw std::invalid_argument("gen_binary_token_task: K and M must be 2");
    if (spec.label_noise_keep != 1.0)
        throw std::invalid_argument("gen_binary_token_task: label noise must be off");
    if (spec.eta < 0.0 || spec.eta > 1.0)
        throw std::invalid_argument("gen_binary_token_task: eta outside [0,1]");
    Rng rng(spec.seed);
    Mat x(spec.n, std::size_t(spec.input_dim()));
    std::vector<int> ys(spec.n);
    HiddenTruth truth;
    truth.z.resize(spec.n);
    truth.c.resize(spec.n);
    std::vector<double> row(std::size_t(spec.input_dim()));
    for (std::size_t i = 0; i < spec.n; ++i) {
        std::fill(row.begin(), row.end(), 0.0);
        const int y = rng.uniform_int(2);
        const int z = rng.bernoulli(spec.eta) ? y : 1 - y;
        detail::write_stable_block(row, spec, y, rng);
        detail::write_unstable_block(row, spec, z);
        std::copy(row.begin(), row.end(), x.row(i));
        ys[i] = y;
        truth.z[i] = z;
        truth.c[i] = y;
    }
    return Environment(spec, role, std::move(x), std::move(ys), std::move(truth));
}

// Multiclass colored task: causal class uniform, observed label keeps the
// causal class with probability label_noise_keep, color agrees with the
// observed label with probability eta (uniform other value otherwise).
// A restricted color support (base_color/alt_colors) replaces the default
// identity map for the multi-source suite.
inline Environment gen_multiclass_colored_task(const EnvironmentSpec& spec, Role role) {
    if (spec.eta < 0.0 || spec.eta > 1.0)
        throw std::invalid_argument("gen_multiclass_colored_task: eta outside [0,1]");
    if (spec.label_noise_keep <= 0.0 || spec.label_noise_keep > 1.0)
        throw std::invalid_argument("gen_multiclass_colored_task: keep probability outside (0,1]");
    const bool mapped = !spec.base_color.empty();
    if (!mapped && spec.num_unstable_values != spec.num_classes)
        throw std::invalid_argument("gen_multiclass_colored_task: M must equal K without a color map");
    if (mapped && (spec.base_color.size() != std::size_t(spec.num_classes) ||
                   spec.alt_colors.size() != std::size_t(spec.num_classes)))
        throw std::invalid_argument("gen_multiclass_colored_task: color map size != K");
    Rng rng(spec.seed);
    Mat x(spec.n, std::size_t(spec.input_dim()));
    std::vector<int> ys(spec.n);
    HiddenTruth truth;
    truth.z.resize(spec.n);
    truth.c.resize(spec.n);
    std::vector<double> row(std::size_t(spec.input_dim()));
    for (std::size_t i = 0; i < spec.n; ++i) {
        std::fill(row.begin(), row.end(), 0.0);
        const int c = rng.uniform_int(spec.num_classes);
        const int y = rng.bernoulli(spec.label_noise_keep)
                          ? c
                          : detail::flip_uniform_other(c, spec.num_classes, rng);
        int z;
        if (mapped) {
            if (rng.bernoulli(spec.eta)) {
                z = spec.base_color[std::size_t(y)];
            } else {
                const auto& alts = spec.alt_colors[std::size_t(y)];
                z = alts[std::size_t(rng.uniform_int(int(alts.size())))];
            }
        } else {
            z = rng.bernoulli(spec.eta) ? y : detail::flip_uniform_other(y, spec.num_unstable_values, rng);
        }
        detail::write_stable_block(row, spec, c, rng);
        detail::write_unstable_block(row, spec, z);
        std::copy(row.begin(), row.end(), x.row(i));
        ys[i] = y;
        truth.z[i] = z;
        truth.c[i] = c;
    }
    return Environment(spec, role, std::move(x), std::move(ys), std::move(truth));
}

// Empirical frequency table over (c_hidden, z_hidden, y).
inline DiscreteJoint environment_to_discrete(const Environment& env) {
    if (env.size() == 0) throw std::invalid_argument("environment_to_discrete: empty environment");
    const auto& spec = env.spec();
    DiscreteJoint j(std::size_t(spec.num_classes), std::size_t(spec.num_unstable_values),
                    std::size_t(spec.num_classes));
    const HiddenTruth& t = env.truth();
    const auto& y = env.labels();
    const double w = 1.0 / double(env.size());
    for (std::size_t i = 0; i < env.size(); ++i)
        j.at(std::size_t(t.c[i]), std::size_t(t.z[i]), std::size_t(y[i])) += w;
    return j;
}

// --- suite construction ---------------------------------------------------

struct SuiteDefaults {
    double eta_train1 = 0.8, eta_train2 = 0.9, eta_test = 0.1;
    std::size_t n_train = 5000, n_val = 5000, n_test = 5000;
};

inline std::uint64_t env_seed(std::uint64_t suite_seed, const std::string& task, Role role) {
    return mix_seed(mix_seed(suite_seed, hash_str(task)), hash_str(role_name(role)));
}

// Two binary token tasks with disjoint prototype axes (beer-style pair).
inline std::vector<TaskBundle> make_binary_suite(std::uint64_t seed) {
    std::vector<TaskBundle> out;
    const SuiteDefaults d;
    int offset = 0;
    for (const char* id : {"bin_a", "bin_b"}) {
        EnvironmentSpec base;
        base.task_id = id;
        base.num_classes = 2;
        base.num_unstable_values = 2;
        base.unstable_dim = 2;
        base.label_noise_keep = 1.0;
        base.proto_scale = 0.30;
        base.proto_offset = offset;
        offset += 2;
        auto env = [&](Role role, double eta, std::size_t n) {
            EnvironmentSpec s = base;
            s.eta = eta;
            s.n = n;
            s.seed = env_seed(seed, s.task_id, role);
            return gen_binary_token_task(s, role);
        };
        TaskBundle b;
        b.task_id = id;
        b.generator = "binary_token";
        b.train1 = env(Role::train1, d.eta_train1, d.n_train);
        b.train2 = env(Role::train2, d.eta_train2, d.n_train);
        b.val = env(Role::val, d.eta_train1, d.n_val);
        b.test = env(Role::test, d.eta_test, d.n_test);
        out.push_back(std::move(b));
    }
    return out;
}

// Two 5-class colored tasks with label noise (MNIST-style pair).
inline std::vector<TaskBundle> make_multiclass_suite(std::uint64_t seed) {
    std::vector<TaskBundle> out;
    const SuiteDefaults d;
    int offset = 0;
    for (const char* id : {"mc_a", "mc_b"}) {
        EnvironmentSpec base;
        base.task_id = id;
        base.num_classes = 5;
        base.num_unstable_values = 5;
        base.unstable_dim = 5;
        base.label_noise_keep = 0.75;
        base.proto_scale = 1.5;
        base.proto_offset = offset;
        offset += 5;
        auto env = [&](Role role, double eta, std::size_t n) {
            EnvironmentSpec s = base;
            s.eta = eta;
            s.n = n;
            s.seed = env_seed(seed, s.task_id, role);
            return gen_multiclass_colored_task(s, role);
        };
        TaskBundle b;
        b.task_id = id;
        b.generator = "multiclass_colored";
        b.train1 = env(Role::train1, d.eta_train1, d.n_train);
        b.train2 = env(Role::train2, d.eta_train2, d.n_train);
        b.val = env(Role::val, d.eta_train1, 1250);
        b.test = env(Role::test, d.eta_test, 1250);
        out.push_back(std::move(b));
    }
    return out;
}

// Multi-source suite: three binary sources over color pairs red/blue,
// red/green, blue/green and one 3-class target over all three colors.
// Sources carry two training environments; the target has none to contrast,
// so its bundle exposes exactly train1/val/test.
inline std::vector<TaskBundle> make_multisource_suite(std::uint64_t seed) {
    std::vector<TaskBundle> out;
    struct SourceDef {
        const char* id;
        int proto_offset;
        std::vector<int> colors;  // base color per label
    };
    const std::vector<SourceDef> sources = {
        {"s1", 0, {0, 1}},  // red/blue
        {"s2", 2, {0, 2}},  // red/green
        {"s3", 4, {1, 2}},  // blue/green
    };
    auto spec_for = [&](const std::string& id, int k, int offset, const std::vector<int>& base,
                        Role role, double eta, std::size_t n) {
        EnvironmentSpec s;
        s.task_id = id;
        s.num_classes = k;
        s.num_unstable_values = 3;
        s.unstable_dim = 3;
        s.label_noise_keep = 0.75;
        s.proto_scale = 1.5;
        s.proto_offset = offset;
        s.eta = eta;
        s.n = n;
        s.seed = env_seed(seed, id, role);
        s.base_color = base;
        s.alt_colors.clear();
        for (std::size_t y = 0; y < base.size(); ++y) {
            std::vector<int> alts;
            for (int other : base)
                if (other != base[y]) alts.push_back(other);
            s.alt_colors.push_back(std::move(alts));
        }
        return s;
    };
    for (const auto& sd : sources) {
        TaskBundle b;
        b.task_id = sd.id;
        b.generator = "multisource";
        b.train1 = gen_multiclass_colored_task(
            spec_for(sd.id, 2, sd.proto_offset, sd.colors, Role::train1, 0.9, 5000), Role::train1);
        b.train2 = gen_multiclass_colored_task(
            spec_for(sd.id, 2, sd.proto_offset, sd.colors, Role::train2, 0.8, 5000), Role::train2);
        b.val = gen_multiclass_colored_task(
            spec_for(sd.id, 2, sd.proto_offset, sd.colors, Role::val, 0.9, 1250), Role::val);
        b.test = gen_multiclass_colored_task(
            spec_for(sd.id, 2, sd.proto_offset, sd.colors, Role::test, 0.1, 1250), Role::test);
        out.push_back(std::move(b));
    }
    TaskBundle t;
    t.task_id = "t";
    t.generator = "multisource";
    const std::vector<int> tcolors = {0, 1, 2};
    t.train1 = gen_multiclass_colored_task(spec_for("t", 3, 6, tcolors, Role::train1, 0.8, 5000),
                                           Role::train1);
    t.val = gen_multiclass_colored_task(spec_for("t", 3, 6, tcolors, Role::val, 0.8, 1250), Role::val);
    t.test = gen_multiclass_colored_task(spec_for("t", 3, 6, tcolors, Role::test, 0.2, 1250),
                                         Role::test);
    out.push_back(std::move(t));
    return out;
}

inline std::vector<TaskBundle> gen_multisource_suite(std::uint64_t seed) {
    return make_multisource_suite(seed);
}

}  // namespace tofu
