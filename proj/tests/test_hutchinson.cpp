#include "adahessian/hutchinson.hpp"
#include "adahessian/oracle.hpp"
#include "adahessian/problems/quadratic.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>

namespace ah = adahessian;
using ah::ParamVector;

namespace {

ah::QuadraticProblem coupled() {
    Eigen::MatrixXd A(2, 2);
    A << 2, 1, 1, 3;
    return ah::QuadraticProblem("coupled", A);
}

// All 2^d sign vectors, bit i of the index selects coordinate i.
std::vector<ParamVector> all_sign_vectors(ah::Index d) {
    std::vector<ParamVector> out;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
        ParamVector z(d);
        for (ah::Index i = 0; i < d; ++i) z(i) = ((mask >> i) & 1u) ? 1.0 : -1.0;
        out.push_back(z);
    }
    return out;
}

}  // namespace

TEST(Rademacher, EntriesAreSignsAndReproducible) {
    ah::Rng a(1234);
    ah::Rng b(1234);
    ParamVector z1 = ah::rademacher(4, a);
    ParamVector z2 = ah::rademacher(4, b);
    EXPECT_EQ(z1, z2);
    for (ah::Index i = 0; i < 4; ++i) EXPECT_TRUE(z1(i) == 1.0 || z1(i) == -1.0);
    EXPECT_EQ(z1.cwiseProduct(z1), ParamVector::Ones(4));
    EXPECT_THROW(ah::rademacher(0, a), ah::ContractViolation);
}

TEST(Rademacher, CoordinateMeansAreNearZero) {
    const ah::Index d = 70;  // crosses a 64-bit word boundary
    ah::Rng rng(77);
    ParamVector sum = ParamVector::Zero(d);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) sum += ah::rademacher(d, rng);
    EXPECT_LE((sum / draws).cwiseAbs().maxCoeff(), 0.02);
}

TEST(EstimateDiag, DiagonalHessianIsExactForEveryProbe) {
    auto q = ah::make_fig1_quadratic();
    ah::HutchinsonConfig cfg;
    ah::Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        auto est = ah::estimate_diag(q, ParamVector::Ones(2), ah::Batch::full(), cfg, rng);
        EXPECT_EQ(est.values(0), 20.0);
        EXPECT_EQ(est.values(1), 2.0);
    }
}

TEST(EstimateDiag, SingleProbeArithmetic) {
    auto q = coupled();
    ParamVector z(2);
    z << 1.0, -1.0;
    ParamVector hz = q.hvp(ParamVector::Zero(2), z);
    ParamVector d = ah::combine_probes(std::span<const ParamVector>(&z, 1), std::span<const ParamVector>(&hz, 1));
    EXPECT_DOUBLE_EQ(d(0), 1.0);
    EXPECT_DOUBLE_EQ(d(1), 2.0);
}

TEST(EstimateDiag, EnumerationOfAllSignsGivesTheDiagonal) {
    auto q = coupled();
    auto probes = all_sign_vectors(2);
    auto eval = q.second_order(ParamVector::Zero(2), probes);
    ParamVector d = ah::combine_probes(probes, eval.hvps);
    EXPECT_DOUBLE_EQ(d(0), 2.0);
    EXPECT_DOUBLE_EQ(d(1), 3.0);
}

TEST(EstimateDiag, UnbiasedOverAllSignVectorsForRandomSymmetricMatrices) {
    ah::Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const ah::Index d = 1 + static_cast<ah::Index>(rng.below(12));
        Eigen::MatrixXd H = ah::testing::random_symmetric(d, rng);
        ah::QuadraticProblem q("sym", H);
        auto probes = all_sign_vectors(d);
        auto eval = q.second_order(ah::testing::random_vector(d, rng), probes);
        ParamVector est = ah::combine_probes(probes, eval.hvps);
        EXPECT_LE((est - H.diagonal()).cwiseAbs().maxCoeff(), 1e-12) << "d=" << d;
        EXPECT_LE((est - ah::oracle::exact_hutchinson_expectation(H)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(EstimateDiag, VarianceMatchesOffDiagonalMass) {
    // Var[z_i (Hz)_i] = sum_{j != i} H_ij^2 for Rademacher z.
    ah::Rng mrng(8);
    Eigen::MatrixXd H = ah::testing::random_symmetric(8, mrng);
    ah::QuadraticProblem q("sym8", H);
    ah::HutchinsonConfig cfg;
    ah::Rng rng(31337);
    const int draws = 40000;
    ParamVector sum = ParamVector::Zero(8);
    ParamVector sum_sq = ParamVector::Zero(8);
    for (int i = 0; i < draws; ++i) {
        ParamVector e = ah::estimate_diag(q, ParamVector::Zero(8), ah::Batch::full(), cfg, rng).values;
        sum += e;
        sum_sq += e.cwiseProduct(e);
    }
    ParamVector mean = sum / draws;
    ParamVector var = (sum_sq - draws * mean.cwiseProduct(mean)) / (draws - 1);
    for (ah::Index i = 0; i < 8; ++i) {
        const double expected = H.row(i).squaredNorm() - H(i, i) * H(i, i);
        EXPECT_NEAR(var(i), expected, 0.05 * expected) << "coordinate " << i;
    }
}

TEST(EstimateDiag, MultipleSamplesAreTheMeanOfSingleProbeEstimates) {
    ah::Rng mrng(9);
    Eigen::MatrixXd H = ah::testing::random_symmetric(6, mrng);
    ah::QuadraticProblem q("sym6", H);
    ah::HutchinsonConfig cfg;
    cfg.samples_per_estimate = 4;
    ah::Rng r1(10);
    ah::Rng r2(10);
    auto multi = ah::estimate_diag(q, ParamVector::Zero(6), ah::Batch::full(), cfg, r1);
    ParamVector manual = ParamVector::Zero(6);
    for (int j = 0; j < 4; ++j) {
        ParamVector z = ah::rademacher(6, r2);
        manual += z.cwiseProduct(H * z);
    }
    EXPECT_LE((multi.values - manual / 4.0).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(EstimateDiag, NegativeEntriesArePreserved) {
    Eigen::MatrixXd H = Eigen::Vector3d(-4.0, 1.0, -0.5).asDiagonal();
    ah::QuadraticProblem q("indef", H);
    ah::Rng rng(1);
    auto est = ah::estimate_diag(q, ParamVector::Zero(3), ah::Batch::full(), ah::HutchinsonConfig{}, rng);
    EXPECT_EQ(est.values(0), -4.0);
    EXPECT_EQ(est.values(2), -0.5);
}

TEST(EstimateDiag, DeterministicForIdenticalInputs) {
    auto q = ah::make_random_spd_quadratic(10, 30.0, 4);
    ah::HutchinsonConfig cfg;
    cfg.seed = 99;
    cfg.samples_per_estimate = 3;
    for (std::uint64_t t = 1; t < 5; ++t) {
        ah::Rng a = ah::probe_stream(cfg, t);
        ah::Rng b = ah::probe_stream(cfg, t);
        auto e1 = ah::estimate_diag(q, q.initial_point(0), ah::Batch::full(), cfg, a);
        auto e2 = ah::estimate_diag(q, q.initial_point(0), ah::Batch::full(), cfg, b);
        EXPECT_EQ(0, std::memcmp(e1.values.data(), e2.values.data(), sizeof(double) * 10));
    }
}

TEST(ShouldCompute, EveryIterationByDefault) {
    ah::HutchinsonConfig cfg;
    for (int t = 1; t < 50; ++t) EXPECT_TRUE(ah::should_compute(t, cfg));
}

TEST(ShouldCompute, FrequencyTwoAlternates) {
    ah::HutchinsonConfig cfg;
    cfg.frequency = 2;
    for (int t = 1; t < 20; ++t) EXPECT_EQ(ah::should_compute(t, cfg), t % 2 == 1) << t;
}

TEST(ShouldCompute, WarmupThenEveryFifth) {
    ah::HutchinsonConfig cfg;
    cfg.warmup_steps = 3;
    cfg.frequency = 5;
    std::vector<int> hits;
    for (int t = 1; t <= 20; ++t)
        if (ah::should_compute(t, cfg)) hits.push_back(t);
    EXPECT_EQ(hits, (std::vector<int>{1, 2, 3, 4, 9, 14, 19}));
}

TEST(ShouldCompute, RejectsBadInput) {
    ah::HutchinsonConfig cfg;
    EXPECT_THROW(ah::should_compute(0, cfg), ah::ContractViolation);
    cfg.frequency = 0;
    EXPECT_THROW(ah::should_compute(1, cfg), ah::ContractViolation);
    cfg.frequency = 1;
    cfg.samples_per_estimate = 0;
    EXPECT_THROW(cfg.validate(), ah::ContractViolation);
}
