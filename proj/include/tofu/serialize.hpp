#pragma once
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "tofu/data.hpp"
#include "tofu/nn.hpp"
#include "tofu/pipeline.hpp"
#include "tofu/target.hpp"

namespace tofu {

using json = nlohmann::ordered_json;

// --- base64 (RFC 4648) ------------------------------------------------------

namespace detail {
inline const char* b64_alphabet() {
    return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}
}  // namespace detail

inline std::string base64_encode(const unsigned char* data, std::size_t n) {
    const char* tab = detail::b64_alphabet();
    std::string out;
    out.reserve((n + 2) / 3 * 4);
    for (std::size_t i = 0; i < n; i += 3) {
        unsigned v = unsigned(data[i]) << 16;
        if (i + 1 < n) v |= unsigned(data[i + 1]) << 8;
        if (i + 2 < n) v |= unsigned(data[i + 2]);
        out.push_back(tab[(v >> 18) & 63]);
        out.push_back(tab[(v >> 12) & 63]);
        out.push_back(i + 1 < n ? tab[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < n ? tab[v & 63] : '=');
    }
    return out;
}

inline std::vector<unsigned char> base64_decode(const std::string& s) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        if (c == '=') return -1;
        throw std::invalid_argument("base64: bad character");
    };
    std::vector<unsigned char> out;
    out.reserve(s.size() / 4 * 3);
    for (std::size_t i = 0; i + 3 < s.size(); i += 4) {
        const int a = val(s[i]), b = val(s[i + 1]), c = val(s[i + 2]), d = val(s[i + 3]);
        if (a < 0 || b < 0) throw std::invalid_argument("base64: bad padding");
        out.push_back(static_cast<unsigned char>((a << 2) | (b >> 4)));
        if (c >= 0) out.push_back(static_cast<unsigned char>(((b & 15) << 4) | (c >> 2)));
        if (c >= 0 && d >= 0) out.push_back(static_cast<unsigned char>(((c & 3) << 6) | d));
    }
    return out;
}

// little-endian f64 blob
inline std::string encode_doubles(const std::vector<double>& v) {
    static_assert(sizeof(double) == 8);
    std::vector<unsigned char> bytes(v.size() * 8);
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &v[i], 8);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + std::size_t(b)] = (bits >> (8 * b)) & 0xff;
    }
    return base64_encode(bytes.data(), bytes.size());
}

inline std::vector<double> decode_doubles(const std::string& s) {
    const std::vector<unsigned char> bytes = base64_decode(s);
    if (bytes.size() % 8 != 0) throw std::invalid_argument("model blob: size not a multiple of 8");
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= std::uint64_t(bytes[i * 8 + std::size_t(b)]) << (8 * b);
        std::memcpy(&out[i], &bits, 8);
    }
    return out;
}

// --- model files ------------------------------------------------------------

inline json model_to_json(const ModelParams& p) {
    json j;
    j["format"] = "tofu-model";
    j["version"] = 1;
    j["activation"] = p.activation == Activation::relu ? "relu" : "identity";
    j["input_dim"] = p.input_dim;
    j["output_dim"] = p.output_dim;
    j["dropout_rate"] = p.dropout_rate;
    j["weight_decay"] = p.weight_decay;
    j["layers"] = json::array();
    for (const auto& l : p.layers) {
        json jl;
        jl["rows"] = l.W.rows;
        jl["cols"] = l.W.cols;
        jl["w"] = encode_doubles(l.W.a);
        jl["b"] = encode_doubles(l.b);
        j["layers"].push_back(std::move(jl));
    }
    return j;
}

inline ModelParams model_from_json(const json& j) {
    if (j.value("format", "") != "tofu-model")
        throw std::invalid_argument("model file: wrong format tag");
    if (j.value("version", 0) != 1) throw std::invalid_argument("model file: unsupported version");
    ModelParams p;
    p.activation = j.at("activation").get<std::string>() == "relu" ? Activation::relu
                                                                   : Activation::identity;
    p.input_dim = j.at("input_dim").get<std::size_t>();
    p.output_dim = j.at("output_dim").get<std::size_t>();
    p.dropout_rate = j.at("dropout_rate").get<double>();
    p.weight_decay = j.at("weight_decay").get<double>();
    for (const auto& jl : j.at("layers")) {
        Layer l;
        l.W.rows = jl.at("rows").get<std::size_t>();
        l.W.cols = jl.at("cols").get<std::size_t>();
        l.W.a = decode_doubles(jl.at("w").get<std::string>());
        l.b = decode_doubles(jl.at("b").get<std::string>());
        if (l.W.a.size() != l.W.rows * l.W.cols || l.b.size() != l.W.cols)
            throw std::invalid_argument("model file: blob sizes disagree with shape");
        p.layers.push_back(std::move(l));
    }
    check_shapes(p);
    return p;
}

inline void save_model(const ModelParams& p, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << model_to_json(p).dump(2) << "\n";
}

inline ModelParams load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    json j;
    f >> j;
    return model_from_json(j);
}

// --- environments: newline-delimited JSON records ---------------------------

inline void write_environment_jsonl(const Environment& env, std::ostream& os) {
    const HiddenTruth& t = env.truth();
    for (std::size_t i = 0; i < env.size(); ++i) {
        json rec;
        rec["x"] = std::vector<double>(env.features().row(i), env.features().row(i) + env.features().cols);
        rec["y"] = env.labels()[i];
        rec["z"] = t.z[i];
        rec["c"] = t.c[i];
        rec["role"] = role_name(env.role());
        os << rec.dump() << "\n";
    }
}

struct JsonlRecord {
    std::vector<double> x;
    int y, z, c;
    std::string role;
};

inline std::vector<JsonlRecord> read_environment_jsonl(std::istream& is) {
    std::vector<JsonlRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        out.push_back({rec.at("x").get<std::vector<double>>(), rec.at("y").get<int>(),
                       rec.at("z").get<int>(), rec.at("c").get<int>(),
                       rec.at("role").get<std::string>()});
    }
    return out;
}

inline json spec_to_json(const EnvironmentSpec& s) {
    json j;
    j["task_id"] = s.task_id;
    j["num_classes"] = s.num_classes;
    j["num_unstable_values"] = s.num_unstable_values;
    j["eta"] = s.eta;
    j["label_noise_keep"] = s.label_noise_keep;
    j["n"] = s.n;
    j["stable_dim"] = s.stable_dim;
    j["unstable_dim"] = s.unstable_dim;
    j["stable_noise_sigma"] = s.stable_noise_sigma;
    j["seed"] = s.seed;
    j["proto_offset"] = s.proto_offset;
    j["proto_scale"] = s.proto_scale;
    if (!s.base_color.empty()) {
        j["base_color"] = s.base_color;
        j["alt_colors"] = s.alt_colors;
    }
    return j;
}

// Manifest for one generated TaskBundle: files, specs, seeds.
inline json bundle_manifest(const TaskBundle& b, const std::string& file_prefix) {
    json j;
    j["task_id"] = b.task_id;
    j["generator"] = b.generator;
    j["files"] = json::object();
    j["specs"] = json::object();
    j["seeds"] = json::object();
    for (const Environment* env : b.environments()) {
        const std::string role = role_name(env->role());
        j["files"][role] = file_prefix + "_" + role + ".jsonl";
        j["specs"][role] = spec_to_json(env->spec());
        j["seeds"][role] = env->spec().seed;
    }
    return j;
}

// --- partitions and clusters -------------------------------------------------

inline json partition_to_json(const Partition& p) {
    json j;
    j["source_env"] = p.source_env;
    j["eval_env"] = p.eval_env;
    j["alpha"] = p.alpha_empirical;
    j["labels"] = json::object();
    for (std::size_t y = 0; y < p.per_label.size(); ++y) {
        json slice;
        slice["correct"] = p.per_label[y].correct;
        slice["incorrect"] = p.per_label[y].incorrect;
        j["labels"][std::to_string(y)] = std::move(slice);
    }
    return j;
}

// {label: {cluster_id: [indices]}}
inline json clusters_to_json(const ClusterAssignment& ca) {
    json j = json::object();
    for (const auto& lc : ca.per_label) {
        json per_cluster = json::object();
        std::vector<std::vector<std::size_t>> buckets(lc.centroids.rows);
        for (std::size_t i = 0; i < lc.example_indices.size(); ++i)
            buckets[std::size_t(lc.cluster_of[i])].push_back(lc.example_indices[i]);
        for (std::size_t c = 0; c < buckets.size(); ++c)
            per_cluster[std::to_string(c)] = buckets[c];
        j[std::to_string(lc.label)] = std::move(per_cluster);
    }
    return j;
}

// --- CSV ---------------------------------------------------------------------

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::vector<std::string>> read_csv(std::istream& is) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> row;
        std::string cell;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    cell += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                row.push_back(cell);
                cell.clear();
            } else {
                cell += c;
            }
        }
        row.push_back(cell);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << content;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace tofu
