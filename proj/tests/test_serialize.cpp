#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "tofu/serialize.hpp"

using namespace tofu;

TEST_CASE("base64: byte blobs of every length round-trip") {
    Rng rng(1);
    for (std::size_t n = 0; n < 48; ++n) {
        std::vector<unsigned char> bytes(n);
        for (auto& b : bytes) b = static_cast<unsigned char>(rng.uniform_int(256));
        const std::string enc = base64_encode(bytes.data(), bytes.size());
        CHECK(base64_decode(enc) == bytes);
    }
}

TEST_CASE("base64: rejects bad characters") {
    CHECK_THROWS_AS(base64_decode("ab~d"), std::invalid_argument);
}

TEST_CASE("double blobs are bit-exact through encode/decode") {
    Rng rng(2);
    std::vector<double> v(257);
    for (auto& x : v) x = rng.gaussian() * std::pow(10.0, rng.uniform(-300.0, 300.0));
    v[0] = 0.0;
    v[1] = -0.0;
    v[2] = std::numeric_limits<double>::denorm_min();
    v[3] = std::numeric_limits<double>::max();
    const std::vector<double> back = decode_doubles(encode_doubles(v));
    REQUIRE(back.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint64_t a, b;
        std::memcpy(&a, &v[i], 8);
        std::memcpy(&b, &back[i], 8);
        CHECK(a == b);
    }
}

TEST_CASE("model JSON round-trips bit-exactly") {
    Rng rng(3);
    ModelParams p = make_mlp(7, {9}, 4, rng, Activation::relu, 0.25, 0.01);
    ModelParams q = model_from_json(model_to_json(p));
    CHECK(q.input_dim == p.input_dim);
    CHECK(q.output_dim == p.output_dim);
    CHECK(q.dropout_rate == p.dropout_rate);
    CHECK(q.weight_decay == p.weight_decay);
    REQUIRE(q.layers.size() == p.layers.size());
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        CHECK(q.layers[k].W.a == p.layers[k].W.a);
        CHECK(q.layers[k].b == p.layers[k].b);
    }
}

TEST_CASE("model JSON rejects corrupted payloads") {
    Rng rng(4);
    ModelParams p = make_mlp(3, {}, 2, rng);
    json j = model_to_json(p);
    j["layers"][0]["cols"] = 5;  // shape no longer matches the blob
    CHECK_THROWS_AS(model_from_json(j), std::invalid_argument);
    json j2 = model_to_json(p);
    j2["format"] = "something-else";
    CHECK_THROWS_AS(model_from_json(j2), std::invalid_argument);
}

TEST_CASE("environment JSONL: record count, fields, and byte determinism") {
    EnvironmentSpec s;
    s.task_id = "t";
    s.eta = 0.8;
    s.n = 40;
    s.proto_scale = 0.3;
    s.seed = 9;
    Environment env = gen_binary_token_task(s, Role::val);
    std::ostringstream a, b;
    write_environment_jsonl(env, a);
    write_environment_jsonl(env, b);
    CHECK(a.str() == b.str());

    std::istringstream in(a.str());
    auto records = read_environment_jsonl(in);
    REQUIRE(records.size() == env.size());
    const HiddenTruth& t = env.truth();
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(records[i].y == env.labels()[i]);
        CHECK(records[i].z == t.z[i]);
        CHECK(records[i].c == t.c[i]);
        CHECK(records[i].role == "val");
        REQUIRE(records[i].x.size() == env.features().cols);
        for (std::size_t j = 0; j < records[i].x.size(); ++j)
            CHECK(records[i].x[j] == env.features()(i, j));
    }
}

TEST_CASE("bundle manifest lists all roles with specs and seeds") {
    auto suite = make_binary_suite(5);
    json m = bundle_manifest(suite[0], "bin_a");
    CHECK(m["task_id"] == "bin_a");
    for (const char* role : {"train1", "train2", "val", "test"}) {
        CHECK(m["files"].contains(role));
        CHECK(m["specs"].contains(role));
        CHECK(m["seeds"].contains(role));
    }
    CHECK(m["specs"]["train1"]["eta"] == 0.8);
    CHECK(m["specs"]["test"]["eta"] == 0.1);
}

TEST_CASE("clusters JSON has the {label: {cluster: [indices]}} shape") {
    ClusterAssignment ca;
    ca.n_c = 2;
    LabelClusters lc;
    lc.label = 1;
    lc.centroids = Mat(2, 3);
    lc.example_indices = {4, 9, 11};
    lc.cluster_of = {0, 1, 0};
    ca.per_label.push_back(lc);
    json j = clusters_to_json(ca);
    CHECK(j["1"]["0"] == json::array({4, 11}));
    CHECK(j["1"]["1"] == json::array({9}));
}

TEST_CASE("csv: escaping and parsing round-trip") {
    std::ostringstream os;
    os << csv_escape("plain") << "," << csv_escape("with,comma") << ","
       << csv_escape("with\"quote") << "\n";
    std::istringstream is(os.str());
    auto rows = read_csv(is);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].size() == 3);
    CHECK(rows[0][0] == "plain");
    CHECK(rows[0][1] == "with,comma");
    CHECK(rows[0][2] == "with\"quote");
}

TEST_CASE("fmt_double survives a parse round-trip at full precision") {
    Rng rng(6);
    for (int i = 0; i < 100; ++i) {
        const double v = rng.gaussian() * std::pow(10.0, rng.uniform(-10.0, 10.0));
        CHECK(std::stod(fmt_double(v)) == v);
    }
}
