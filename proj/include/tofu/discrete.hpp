#pragma once
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tofu/rng.hpp"

namespace tofu {

// Finite probability table P(c, z, y).
struct DiscreteJoint {
    std::size_t nc = 0, nz = 0, ny = 0;
    std::vector<double> p;

    DiscreteJoint() = default;
    DiscreteJoint(std::size_t c, std::size_t z, std::size_t y) : nc(c), nz(z), ny(y), p(c * z * y, 0.0) {}

    double& at(std::size_t c, std::size_t z, std::size_t y) { return p[(c * nz + z) * ny + y]; }
    double at(std::size_t c, std::size_t z, std::size_t y) const { return p[(c * nz + z) * ny + y]; }

    double total() const {
        double s = 0.0;
        for (double v : p) s += v;
        return s;
    }

    void normalize() {
        const double s = total();
        if (s <= 0.0) throw std::invalid_argument("DiscreteJoint: zero total mass");
        for (double& v : p) v /= s;
    }

    void validate() const {
        for (double v : p)
            if (v < 0.0 || !std::isfinite(v))
                throw std::invalid_argument("DiscreteJoint: negative or non-finite entry");
        if (std::abs(total() - 1.0) > 1e-12)
            throw std::invalid_argument("DiscreteJoint: entries do not sum to 1");
    }

    double marginal_y(std::size_t y) const {
        double s = 0.0;
        for (std::size_t c = 0; c < nc; ++c)
            for (std::size_t z = 0; z < nz; ++z) s += at(c, z, y);
        return s;
    }

    double marginal_z(std::size_t z) const {
        double s = 0.0;
        for (std::size_t c = 0; c < nc; ++c)
            for (std::size_t y = 0; y < ny; ++y) s += at(c, z, y);
        return s;
    }

    // P(z, y) marginalized over c.
    double zy(std::size_t z, std::size_t y) const {
        double s = 0.0;
        for (std::size_t c = 0; c < nc; ++c) s += at(c, z, y);
        return s;
    }
};

// Conditional table P(y | c, z), rows indexed by (c, z).
struct ConditionalY {
    std::size_t nc = 0, nz = 0, ny = 0;
    std::vector<double> p;

    ConditionalY() = default;
    ConditionalY(std::size_t c, std::size_t z, std::size_t y) : nc(c), nz(z), ny(y), p(c * z * y, 0.0) {}
    double& at(std::size_t c, std::size_t z, std::size_t y) { return p[(c * nz + z) * ny + y]; }
    double at(std::size_t c, std::size_t z, std::size_t y) const { return p[(c * nz + z) * ny + y]; }
};

// Exact Bayes conditional of a joint; cells with zero marginal mass get a
// uniform row (they never contribute to any product with that joint).
inline ConditionalY bayes_conditional(const DiscreteJoint& j) {
    ConditionalY cond(j.nc, j.nz, j.ny);
    for (std::size_t c = 0; c < j.nc; ++c)
        for (std::size_t z = 0; z < j.nz; ++z) {
            double mass = 0.0;
            for (std::size_t y = 0; y < j.ny; ++y) mass += j.at(c, z, y);
            for (std::size_t y = 0; y < j.ny; ++y)
                cond.at(c, z, y) = mass > 0.0 ? j.at(c, z, y) / mass : 1.0 / double(j.ny);
        }
    return cond;
}

struct PartitionedJoint {
    DiscreteJoint correct;    // P_j^{i ok}
    DiscreteJoint incorrect;  // P_j^{i x}
    double alpha = 0.0;
    bool correct_degenerate = false;    // alpha == 0
    bool incorrect_degenerate = false;  // alpha == 1
};

// Mixture split of a binary-Y joint by a classifier conditional:
//   correct   ~ P_j(c,z,y) * cond(y|c,z)
//   incorrect ~ P_j(c,z,y) * cond(1-y|c,z)
// with alpha = sum P_j * cond. Zero-mass conditional cells follow 0*0=0.
inline PartitionedJoint partition_distribution(const DiscreteJoint& p_j, const ConditionalY& cond) {
    if (p_j.ny != 2) throw std::invalid_argument("partition_distribution: Y must be binary");
    if (cond.nc != p_j.nc || cond.nz != p_j.nz || cond.ny != p_j.ny)
        throw std::invalid_argument("partition_distribution: conditional shape mismatch");
    for (std::size_t c = 0; c < cond.nc; ++c)
        for (std::size_t z = 0; z < cond.nz; ++z) {
            double row = 0.0;
            for (std::size_t y = 0; y < cond.ny; ++y) row += cond.at(c, z, y);
            if (std::abs(row - 1.0) > 1e-9)
                throw std::invalid_argument("partition_distribution: conditional row does not sum to 1");
        }

    PartitionedJoint out;
    out.correct = DiscreteJoint(p_j.nc, p_j.nz, p_j.ny);
    out.incorrect = DiscreteJoint(p_j.nc, p_j.nz, p_j.ny);
    double alpha = 0.0;
    for (std::size_t c = 0; c < p_j.nc; ++c)
        for (std::size_t z = 0; z < p_j.nz; ++z)
            for (std::size_t y = 0; y < 2; ++y) {
                const double ok = p_j.at(c, z, y) * cond.at(c, z, y);
                const double bad = p_j.at(c, z, y) * cond.at(c, z, 1 - y);
                out.correct.at(c, z, y) = ok;
                out.incorrect.at(c, z, y) = bad;
                alpha += ok;
            }
    out.alpha = alpha;
    out.correct_degenerate = alpha <= 0.0;
    out.incorrect_degenerate = alpha >= 1.0;
    if (!out.correct_degenerate)
        for (double& v : out.correct.p) v /= alpha;
    if (!out.incorrect_degenerate)
        for (double& v : out.incorrect.p) v /= (1.0 - alpha);
    return out;
}

// Cov(Z, Y) with Z, Y taking their integer index values. When Y is binary
// and uniform this agrees with the reduced identity
//   0.5 * sum_z z P(z, Y=1) - 0.5 * sum_z z P(z, Y=0).
inline double covariance_zy(const DiscreteJoint& p) {
    double ezy = 0.0, ez = 0.0, ey = 0.0;
    for (std::size_t c = 0; c < p.nc; ++c)
        for (std::size_t z = 0; z < p.nz; ++z)
            for (std::size_t y = 0; y < p.ny; ++y) {
                const double v = p.at(c, z, y);
                ezy += double(z) * double(y) * v;
                ez += double(z) * v;
                ey += double(y) * v;
            }
    return ezy - ez * ey;
}

inline double covariance_zy_uniform_y_identity(const DiscreteJoint& p) {
    if (p.ny != 2) throw std::invalid_argument("reduced covariance identity requires binary Y");
    double s1 = 0.0, s0 = 0.0;
    for (std::size_t z = 0; z < p.nz; ++z) {
        s1 += double(z) * p.zy(z, 1);
        s0 += double(z) * p.zy(z, 0);
    }
    return 0.5 * s1 - 0.5 * s0;
}

struct HypothesisReport {
    bool z_indep_c_given_y_i = false, z_indep_c_given_y_j = false;
    bool uniform_y_i = false, uniform_y_j = false;
    bool equal_z_sums = false;       // sum_y P_i(z|y) == sum_y P_j(z|y) for all z
    bool covariance_gap = false;     // Cov_i > Cov_j
    bool both_positive = false;      // Cov_i > Cov_j > 0 (Corollary hypotheses)
    bool satisfied_prop2() const {
        return z_indep_c_given_y_i && z_indep_c_given_y_j && uniform_y_i && uniform_y_j &&
               equal_z_sums && covariance_gap;
    }
    bool satisfied_cor1() const { return satisfied_prop2() && both_positive; }
};

namespace detail {

inline bool z_indep_c_given_y(const DiscreteJoint& p, double tol = 1e-9) {
    for (std::size_t y = 0; y < p.ny; ++y) {
        const double py = p.marginal_y(y);
        if (py <= 0.0) continue;
        for (std::size_t c = 0; c < p.nc; ++c)
            for (std::size_t z = 0; z < p.nz; ++z) {
                double pc = 0.0, pz = 0.0;
                for (std::size_t zz = 0; zz < p.nz; ++zz) pc += p.at(c, zz, y);
                for (std::size_t cc = 0; cc < p.nc; ++cc) pz += p.at(cc, z, y);
                if (std::abs(p.at(c, z, y) / py - (pc / py) * (pz / py)) > tol) return false;
            }
    }
    return true;
}

inline bool uniform_y(const DiscreteJoint& p, double tol = 1e-9) {
    for (std::size_t y = 0; y < p.ny; ++y)
        if (std::abs(p.marginal_y(y) - 1.0 / double(p.ny)) > tol) return false;
    return true;
}

inline double z_sum_over_y(const DiscreteJoint& p, std::size_t z) {
    double s = 0.0;
    for (std::size_t y = 0; y < p.ny; ++y) {
        const double py = p.marginal_y(y);
        if (py > 0.0) s += p.zy(z, y) / py;
    }
    return s;
}

}  // namespace detail

inline HypothesisReport check_hypotheses(const DiscreteJoint& p_i, const DiscreteJoint& p_j) {
    HypothesisReport h;
    h.z_indep_c_given_y_i = detail::z_indep_c_given_y(p_i);
    h.z_indep_c_given_y_j = detail::z_indep_c_given_y(p_j);
    h.uniform_y_i = detail::uniform_y(p_i);
    h.uniform_y_j = detail::uniform_y(p_j);
    h.equal_z_sums = true;
    for (std::size_t z = 0; z < p_i.nz; ++z)
        if (std::abs(detail::z_sum_over_y(p_i, z) - detail::z_sum_over_y(p_j, z)) > 1e-9)
            h.equal_z_sums = false;
    const double cov_i = covariance_zy(p_i), cov_j = covariance_zy(p_j);
    h.covariance_gap = cov_i > cov_j;
    h.both_positive = cov_i > cov_j && cov_j > 0.0;
    return h;
}

struct Prop2Report {
    HypothesisReport hypotheses;
    double cov_cross_on_j = 0.0;  // Cov(Z, Y; P_j^{i x})
    double cov_cross_on_i = 0.0;  // Cov(Z, Y; P_i^{j x})
    bool holds = false;           // both signs as stated
    bool applicable = false;      // hypotheses satisfied and partitions non-degenerate
};

// Cross-partition covariance signs, with Bayes-optimal conditionals derived
// from each joint.
inline Prop2Report check_prop2(const DiscreteJoint& p_i, const DiscreteJoint& p_j) {
    Prop2Report rep;
    rep.hypotheses = check_hypotheses(p_i, p_j);
    if (!rep.hypotheses.satisfied_prop2()) return rep;
    const PartitionedJoint on_j = partition_distribution(p_j, bayes_conditional(p_i));
    const PartitionedJoint on_i = partition_distribution(p_i, bayes_conditional(p_j));
    if (on_j.incorrect_degenerate || on_i.incorrect_degenerate) return rep;
    rep.applicable = true;
    rep.cov_cross_on_j = covariance_zy(on_j.incorrect);
    rep.cov_cross_on_i = covariance_zy(on_i.incorrect);
    rep.holds = rep.cov_cross_on_j < 0.0 && rep.cov_cross_on_i > 0.0;
    return rep;
}

// The four conditional-mean comparisons behind the batch-mean separation
// result. Under the hypotheses, the incorrect slice's z-mass at Y=1 falls
// strictly below 0.25 while the correct slice's rises above it (and the
// reverse at Y=0); exact evaluation on valid pairs confirms these directions
// and refutes the swapped form.
struct Cor1Report {
    HypothesisReport hypotheses;
    // sum_z z P(Z=z, Y=y) under each side of the partition of E_j by f_i
    double incorrect_y1 = 0.0, correct_y1 = 0.0;
    double incorrect_y0 = 0.0, correct_y0 = 0.0;
    bool holds_y1 = false;  // incorrect_y1 < correct_y1
    bool holds_y0 = false;  // incorrect_y0 > correct_y0
    bool applicable = false;
    bool holds() const { return holds_y1 && holds_y0; }
};

inline Cor1Report check_cor1(const DiscreteJoint& p_i, const DiscreteJoint& p_j) {
    Cor1Report rep;
    rep.hypotheses = check_hypotheses(p_i, p_j);
    if (!rep.hypotheses.satisfied_cor1()) return rep;
    const PartitionedJoint part = partition_distribution(p_j, bayes_conditional(p_i));
    if (part.correct_degenerate || part.incorrect_degenerate) return rep;
    rep.applicable = true;
    for (std::size_t z = 0; z < p_j.nz; ++z) {
        rep.incorrect_y1 += double(z) * part.incorrect.zy(z, 1);
        rep.correct_y1 += double(z) * part.correct.zy(z, 1);
        rep.incorrect_y0 += double(z) * part.incorrect.zy(z, 0);
        rep.correct_y0 += double(z) * part.correct.zy(z, 0);
    }
    rep.holds_y1 = rep.incorrect_y1 < rep.correct_y1;
    rep.holds_y0 = rep.incorrect_y0 > rep.correct_y0;
    return rep;
}

// Monte Carlo check of the batch-mean separation claim: sample two batches
// of Z values from correct|y and one from incorrect|y, count how often the
// within-partition mean distance is strictly smaller.
inline double simulate_theorem1(const PartitionedJoint& part, std::size_t y, std::size_t batch_size,
                                std::size_t trials, std::uint64_t seed) {
    if (part.correct_degenerate || part.incorrect_degenerate)
        throw std::invalid_argument("simulate_theorem1: degenerate partition");
    const DiscreteJoint& pc = part.correct;
    const DiscreteJoint& px = part.incorrect;
    const double mass_c = pc.marginal_y(y), mass_x = px.marginal_y(y);
    if (mass_c <= 0.0 || mass_x <= 0.0)
        throw std::invalid_argument("simulate_theorem1: empty conditional slice");

    // cumulative P(z | y) for each side
    auto cdf_z = [&](const DiscreteJoint& p, double mass) {
        std::vector<double> cdf(p.nz, 0.0);
        double acc = 0.0;
        for (std::size_t z = 0; z < p.nz; ++z) {
            acc += p.zy(z, y) / mass;
            cdf[z] = acc;
        }
        cdf.back() = 1.0;
        return cdf;
    };
    const std::vector<double> cdf_c = cdf_z(pc, mass_c);
    const std::vector<double> cdf_x = cdf_z(px, mass_x);
    auto draw = [](const std::vector<double>& cdf, Rng& rng) {
        const double u = rng.uniform();
        for (std::size_t z = 0; z < cdf.size(); ++z)
            if (u <= cdf[z]) return double(z);
        return double(cdf.size() - 1);
    };

    Rng rng(seed);
    std::size_t satisfied = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        double m1 = 0.0, m2 = 0.0, m3 = 0.0;
        for (std::size_t b = 0; b < batch_size; ++b) m1 += draw(cdf_c, rng);
        for (std::size_t b = 0; b < batch_size; ++b) m2 += draw(cdf_c, rng);
        for (std::size_t b = 0; b < batch_size; ++b) m3 += draw(cdf_x, rng);
        m1 /= double(batch_size);
        m2 /= double(batch_size);
        m3 /= double(batch_size);
        if (std::abs(m1 - m2) < std::abs(m1 - m3)) ++satisfied;
    }
    return double(satisfied) / double(trials);
}

// --- fuzzers ------------------------------------------------------------

// Binary joint with Z independent of C given Y and uniform Y by construction:
//   P(c,z,y) = 0.5 * P(c|y) * P(z|y),  P(z=y|y) = a,  P(c=y|y) = s.
// The symmetric construction makes sum_y P(z|y) = 1 for every z, so the
// equal-sum hypothesis holds for any pair of such joints.
inline DiscreteJoint make_symmetric_binary_joint(double agreement, double stable_rate) {
    if (agreement < 0.0 || agreement > 1.0 || stable_rate < 0.0 || stable_rate > 1.0)
        throw std::invalid_argument("make_symmetric_binary_joint: rates outside [0,1]");
    DiscreteJoint j(2, 2, 2);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t z = 0; z < 2; ++z)
            for (std::size_t y = 0; y < 2; ++y) {
                const double pz = (z == y) ? agreement : 1.0 - agreement;
                const double pc = (c == y) ? stable_rate : 1.0 - stable_rate;
                j.at(c, z, y) = 0.5 * pc * pz;
            }
    return j;
}

struct FuzzedPair {
    DiscreteJoint p_i, p_j;
    double agreement_i = 0.0, agreement_j = 0.0;
};

// Hypothesis-satisfying pair: the joint with the larger agreement rate is
// labeled i so that Cov_i > Cov_j > 0. Draws with no strict gap are rejected.
// The stable-signal rate s is shared within a pair: the stable channel is by
// definition invariant across environments, only the unstable rate varies.
inline FuzzedPair fuzz_hypothesis_pair(Rng& rng, double a_lo = 0.55, double a_hi = 0.95,
                                       double s_lo = 0.6, double s_hi = 0.9) {
    for (;;) {
        double a1 = rng.uniform(a_lo, a_hi);
        double a2 = rng.uniform(a_lo, a_hi);
        if (std::abs(a1 - a2) < 1e-3) continue;
        if (a1 < a2) std::swap(a1, a2);
        const double s = rng.uniform(s_lo, s_hi);
        FuzzedPair out;
        out.agreement_i = a1;
        out.agreement_j = a2;
        out.p_i = make_symmetric_binary_joint(a1, s);
        out.p_j = make_symmetric_binary_joint(a2, s);
        return out;
    }
}

// Arbitrary normalized random joint (for the unconditional mixture identity).
inline DiscreteJoint fuzz_random_joint(Rng& rng, std::size_t nc = 2, std::size_t nz = 2,
                                       std::size_t ny = 2) {
    DiscreteJoint j(nc, nz, ny);
    for (double& v : j.p) v = rng.uniform() + 1e-6;
    j.normalize();
    return j;
}

inline ConditionalY fuzz_random_conditional(Rng& rng, std::size_t nc = 2, std::size_t nz = 2) {
    ConditionalY cond(nc, nz, 2);
    for (std::size_t c = 0; c < nc; ++c)
        for (std::size_t z = 0; z < nz; ++z) {
            const double p1 = rng.uniform();
            cond.at(c, z, 0) = 1.0 - p1;
            cond.at(c, z, 1) = p1;
        }
    return cond;
}

}  // namespace tofu
