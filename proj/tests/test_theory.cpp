#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "tofu/discrete.hpp"

using namespace tofu;

TEST_CASE("partition: perfect conditional gives alpha 1 and correct == joint") {
    // deterministic joint (all mass on y = z) and the conditional that puts
    // probability 1 exactly there
    DiscreteJoint det(2, 2, 2);
    det.at(0, 0, 0) = 0.25;
    det.at(1, 0, 0) = 0.25;
    det.at(0, 1, 1) = 0.25;
    det.at(1, 1, 1) = 0.25;
    ConditionalY perfect(2, 2, 2);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t z = 0; z < 2; ++z) perfect.at(c, z, z) = 1.0;
    PartitionedJoint part = partition_distribution(det, perfect);
    CHECK(part.alpha == doctest::Approx(1.0));
    CHECK(part.incorrect_degenerate);
    CHECK_FALSE(part.correct_degenerate);
    for (std::size_t i = 0; i < det.p.size(); ++i)
        CHECK(std::abs(part.correct.p[i] - det.p[i]) < 1e-14);
}

TEST_CASE("partition: uninformative 0.5 conditional reproduces the joint on both sides") {
    DiscreteJoint j = make_symmetric_binary_joint(0.75, 0.8);
    ConditionalY cond(2, 2, 2);
    for (auto& v : cond.p) v = 0.5;
    PartitionedJoint part = partition_distribution(j, cond);
    CHECK(part.alpha == doctest::Approx(0.5));
    for (std::size_t i = 0; i < j.p.size(); ++i) {
        CHECK(std::abs(part.correct.p[i] - j.p[i]) < 1e-14);
        CHECK(std::abs(part.incorrect.p[i] - j.p[i]) < 1e-14);
    }
}

TEST_CASE("partition: matches a cell-by-cell hand summation on random joints") {
    for (int t = 0; t < 50; ++t) {
        Rng rng(std::uint64_t(100 + t));
        DiscreteJoint j = fuzz_random_joint(rng);
        ConditionalY cond = fuzz_random_conditional(rng);
        PartitionedJoint part = partition_distribution(j, cond);

        double alpha = 0.0;
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t z = 0; z < 2; ++z)
                for (std::size_t y = 0; y < 2; ++y) alpha += j.at(c, z, y) * cond.at(c, z, y);
        CHECK(std::abs(part.alpha - alpha) < 1e-14);
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t z = 0; z < 2; ++z)
                for (std::size_t y = 0; y < 2; ++y) {
                    CHECK(std::abs(part.correct.at(c, z, y) -
                                   j.at(c, z, y) * cond.at(c, z, y) / alpha) < 1e-14);
                    CHECK(std::abs(part.incorrect.at(c, z, y) -
                                   j.at(c, z, y) * cond.at(c, z, 1 - y) / (1.0 - alpha)) < 1e-14);
                }
    }
}

TEST_CASE("partition: mixture identity holds cellwise on fuzzed joints") {
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        Rng rng(std::uint64_t(5000 + t));
        DiscreteJoint j = fuzz_random_joint(rng);
        ConditionalY cond = fuzz_random_conditional(rng);
        PartitionedJoint part = partition_distribution(j, cond);
        if (part.correct_degenerate || part.incorrect_degenerate) continue;
        for (std::size_t i = 0; i < j.p.size(); ++i) {
            const double mixed =
                part.alpha * part.correct.p[i] + (1.0 - part.alpha) * part.incorrect.p[i];
            worst = std::max(worst, std::abs(mixed - j.p[i]));
        }
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("covariance: product joint has zero covariance") {
    DiscreteJoint j(2, 2, 2);
    const double pz[2] = {0.3, 0.7};
    const double py[2] = {0.5, 0.5};
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t z = 0; z < 2; ++z)
            for (std::size_t y = 0; y < 2; ++y) j.at(c, z, y) = 0.5 * pz[z] * py[y];
    CHECK(std::abs(covariance_zy(j)) < 1e-14);
}

TEST_CASE("covariance: symmetric 0.9 agreement joint, brute force and reduced identity agree") {
    DiscreteJoint j = make_symmetric_binary_joint(0.9, 0.75);
    const double cov = covariance_zy(j);
    CHECK(cov == doctest::Approx(0.9 * 0.5 - 0.25).epsilon(1e-12));

    // brute-force double expectation with explicit sums
    double ezy = 0.0, ez = 0.0, ey = 0.0;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t z = 0; z < 2; ++z)
            for (std::size_t y = 0; y < 2; ++y) {
                ezy += double(z * y) * j.at(c, z, y);
                ez += double(z) * j.at(c, z, y);
                ey += double(y) * j.at(c, z, y);
            }
    CHECK(std::abs(cov - (ezy - ez * ey)) < 1e-14);
    CHECK(std::abs(cov - covariance_zy_uniform_y_identity(j)) < 1e-12);
}

TEST_CASE("covariance: swapping z negates the value") {
    for (int t = 0; t < 20; ++t) {
        Rng rng(std::uint64_t(300 + t));
        DiscreteJoint j = fuzz_random_joint(rng);
        DiscreteJoint swapped = j;
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t y = 0; y < 2; ++y) {
                swapped.at(c, 0, y) = j.at(c, 1, y);
                swapped.at(c, 1, y) = j.at(c, 0, y);
            }
        CHECK(covariance_zy(swapped) == doctest::Approx(-covariance_zy(j)).epsilon(1e-12));
    }
}

TEST_CASE("prop2: agreement 0.9 vs 0.8 pair gives the stated covariance signs") {
    DiscreteJoint p_i = make_symmetric_binary_joint(0.9, 0.75);
    DiscreteJoint p_j = make_symmetric_binary_joint(0.8, 0.75);
    Prop2Report rep = check_prop2(p_i, p_j);
    CHECK(rep.hypotheses.satisfied_prop2());
    CHECK(rep.applicable);
    CHECK(rep.cov_cross_on_j < 0.0);
    CHECK(rep.cov_cross_on_i > 0.0);
    CHECK(rep.holds);
}

TEST_CASE("prop2: identical joints violate the strict covariance gap") {
    DiscreteJoint p = make_symmetric_binary_joint(0.8, 0.7);
    Prop2Report rep = check_prop2(p, p);
    CHECK_FALSE(rep.hypotheses.covariance_gap);
    CHECK_FALSE(rep.applicable);
    CHECK_FALSE(rep.holds);
}

TEST_CASE("prop2: sign property holds on 1000 hypothesis-satisfying fuzzed pairs") {
    int held = 0, applicable = 0;
    for (int t = 0; t < 1000; ++t) {
        Rng rng(std::uint64_t(40000 + t));
        FuzzedPair pair = fuzz_hypothesis_pair(rng);
        Prop2Report rep = check_prop2(pair.p_i, pair.p_j);
        REQUIRE(rep.hypotheses.satisfied_prop2());
        if (rep.applicable) {
            ++applicable;
            if (rep.holds) ++held;
        }
    }
    CHECK(applicable == 1000);
    CHECK(held == applicable);
}

TEST_CASE("cor1: hypothesis-satisfying pair satisfies both inequalities strictly") {
    DiscreteJoint p_i = make_symmetric_binary_joint(0.9, 0.8);
    DiscreteJoint p_j = make_symmetric_binary_joint(0.7, 0.8);
    Cor1Report rep = check_cor1(p_i, p_j);
    CHECK(rep.hypotheses.satisfied_cor1());
    CHECK(rep.applicable);
    // the incorrect slice is depleted of z=1 mass at Y=1 and enriched at Y=0
    CHECK(rep.incorrect_y1 < rep.correct_y1);
    CHECK(rep.incorrect_y1 < 0.25);
    CHECK(rep.correct_y1 > 0.25);
    CHECK(rep.incorrect_y0 > rep.correct_y0);
    CHECK(rep.holds());
}

TEST_CASE("cor1: degenerate alpha=1 partition reports inapplicable") {
    // deterministic joint partitioned by its own Bayes conditional: alpha = 1
    DiscreteJoint det(2, 2, 2);
    det.at(0, 0, 0) = 0.25;
    det.at(1, 0, 0) = 0.25;
    det.at(0, 1, 1) = 0.25;
    det.at(1, 1, 1) = 0.25;
    PartitionedJoint part = partition_distribution(det, bayes_conditional(det));
    CHECK(part.incorrect_degenerate);
    Cor1Report rep = check_cor1(det, det);
    CHECK_FALSE(rep.applicable);
}

TEST_CASE("cor1: holds on 500 fuzzed valid pairs") {
    int held = 0, applicable = 0;
    for (int t = 0; t < 500; ++t) {
        Rng rng(std::uint64_t(70000 + t));
        FuzzedPair pair = fuzz_hypothesis_pair(rng);
        Cor1Report rep = check_cor1(pair.p_i, pair.p_j);
        REQUIRE(rep.hypotheses.satisfied_cor1());
        if (rep.applicable) {
            ++applicable;
            if (rep.holds()) ++held;
        }
    }
    CHECK(applicable == 500);
    CHECK(held == applicable);
}

TEST_CASE("theorem1: disjoint z supports give fraction 1 at any batch size") {
    // correct slice lives on z=1, incorrect on z=0, for both labels
    PartitionedJoint part;
    part.alpha = 0.5;
    part.correct = DiscreteJoint(1, 2, 2);
    part.incorrect = DiscreteJoint(1, 2, 2);
    part.correct.at(0, 1, 0) = 0.5;
    part.correct.at(0, 1, 1) = 0.5;
    part.incorrect.at(0, 0, 0) = 0.5;
    part.incorrect.at(0, 0, 1) = 0.5;
    for (std::size_t bs : {1u, 4u, 32u}) {
        const double frac = simulate_theorem1(part, 0, bs, 500, 42);
        CHECK(frac == 1.0);
    }
}

TEST_CASE("theorem1: batch-size monotonicity and 0.95 pass at 256 on the standard suite") {
    // standard suite: agreement gap >= 0.05 with a_j >= 0.65 so the
    // asymptotic regime is reached at batch 256
    const std::size_t sizes[4] = {4, 16, 64, 256};
    for (int pair_idx = 0; pair_idx < 8; ++pair_idx) {
        Rng rng(std::uint64_t(90000 + pair_idx));
        const double a_j = rng.uniform(0.65, 0.85);
        const double a_i = rng.uniform(a_j + 0.05, 0.95);
        DiscreteJoint p_i = make_symmetric_binary_joint(a_i, rng.uniform(0.6, 0.9));
        DiscreteJoint p_j = make_symmetric_binary_joint(a_j, rng.uniform(0.6, 0.9));
        PartitionedJoint part = partition_distribution(p_j, bayes_conditional(p_i));
        double prev = 0.0;
        for (int s = 0; s < 4; ++s) {
            const double frac =
                simulate_theorem1(part, 1, sizes[s], 2000, mix_seed(7, std::uint64_t(pair_idx * 4 + s)));
            CHECK(frac >= prev - 0.02);
            prev = frac;
            if (sizes[s] == 256) CHECK(frac >= 0.95);
        }
    }
}

TEST_CASE("theorem1: empty conditional slice throws") {
    PartitionedJoint part;
    part.correct = DiscreteJoint(1, 2, 2);
    part.incorrect = DiscreteJoint(1, 2, 2);
    part.correct.at(0, 0, 0) = 1.0;   // no mass at y=1
    part.incorrect.at(0, 1, 0) = 1.0;
    part.alpha = 0.5;
    CHECK_THROWS_AS(simulate_theorem1(part, 1, 8, 10, 1), std::invalid_argument);
}

TEST_CASE("joint validation rejects bad tables") {
    DiscreteJoint j(2, 2, 2);
    j.at(0, 0, 0) = 0.5;
    CHECK_THROWS_AS(j.validate(), std::invalid_argument);  // sums to 0.5
    j.at(0, 0, 1) = 0.5;
    CHECK_NOTHROW(j.validate());
    j.at(0, 0, 1) = -0.5;
    CHECK_THROWS_AS(j.validate(), std::invalid_argument);
}
