#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tofu/config.hpp"

using namespace tofu;

TEST_CASE("minimal config parses with the documented defaults") {
    ParsedConfig p = parse_config_text("suite = binary_pairwise\nmethods = erm\n");
    REQUIRE(p.ok());
    const ExperimentConfig& c = p.config;
    CHECK(c.n_clusters == std::vector<std::size_t>{2});
    CHECK(c.margin == 0.3);
    CHECK(c.batch_size == 50);
    CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
    CHECK(c.learning_rates == std::vector<double>{1e-3, 1e-4});
    CHECK(c.dropouts == std::vector<double>{0.1, 0.3, 0.5});  // token suite axis
    CHECK(c.weight_decays.empty());
    CHECK(c.source_tasks == std::vector<std::string>{"bin_a"});
    CHECK(c.target_task == "bin_b");
    CHECK(c.grid().size() == 6);
}

TEST_CASE("colored suites default to the weight-decay axis") {
    ParsedConfig p = parse_config_text("suite = multiclass_colored\nmethods = erm\n");
    REQUIRE(p.ok());
    CHECK(p.config.dropouts.empty());
    CHECK(p.config.weight_decays == std::vector<double>{1e-1, 1e-2, 1e-3});
}

TEST_CASE("unknown key is rejected by name") {
    ParsedConfig p = parse_config_text("suite = binary_pairwise\nmethods = erm\nlearning_rte = 1\n");
    REQUIRE(!p.ok());
    bool found = false;
    for (const auto& e : p.errors)
        if (e.find("learning_rte") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("empty seeds is an error") {
    ParsedConfig p = parse_config_text("suite = binary_pairwise\nmethods = erm\nseeds =\n");
    REQUIRE(!p.ok());
    bool found = false;
    for (const auto& e : p.errors)
        if (e.find("seeds must be nonempty") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("all violations are reported at once") {
    ParsedConfig p = parse_config_text(
        "suite = nowhere\nmethods = erm, zigzag\nseeds =\nbogus_key = 1\nmargin = -2\n");
    CHECK(p.errors.size() >= 4);
}

TEST_CASE("duplicate keys are rejected") {
    ParsedConfig p = parse_config_text("suite = binary_pairwise\nsuite = multisource\nmethods = erm\n");
    REQUIRE(!p.ok());
    bool found = false;
    for (const auto& e : p.errors)
        if (e.find("duplicate") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("multisource rejects the single-source transfer baselines") {
    ParsedConfig p = parse_config_text("suite = multisource\nmethods = erm, reuse\n");
    REQUIRE(!p.ok());
}

TEST_CASE("source task equal to target task is rejected") {
    ParsedConfig p = parse_config_text(
        "suite = binary_pairwise\nmethods = erm\nsource_tasks = bin_b\ntarget_task = bin_b\n");
    REQUIRE(!p.ok());
}

TEST_CASE("unknown task ids are rejected") {
    ParsedConfig p = parse_config_text(
        "suite = binary_pairwise\nmethods = erm\nsource_tasks = beer\ntarget_task = bin_b\n");
    REQUIRE(!p.ok());
}

TEST_CASE("config hash is stable and canonical") {
    ParsedConfig a = parse_config_text("suite = binary_pairwise\nmethods = erm, tofu\n");
    ParsedConfig b = parse_config_text(
        "# comment\nsuite = binary_pairwise\n\nmethods =  erm , tofu \nout_dir = elsewhere\n");
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    // whitespace, comments, and the output directory do not change the hash
    CHECK(config_hash(a.config) == config_hash(b.config));
    ParsedConfig c = parse_config_text("suite = binary_pairwise\nmethods = erm\n");
    CHECK(config_hash(a.config) != config_hash(c.config));
}

TEST_CASE("comments and blank lines are ignored") {
    ParsedConfig p = parse_config_text(
        "# experiment\n\nsuite = binary_pairwise   # trailing comment\nmethods = erm\n");
    REQUIRE(p.ok());
    CHECK(p.config.suite == Suite::binary_pairwise);
}

TEST_CASE("theory suite needs no methods or tasks") {
    ParsedConfig p = parse_config_text("suite = theory\n");
    CHECK(p.ok());
}
