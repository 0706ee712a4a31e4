#include "adahessian/oracle.hpp"
#include "adahessian/problems/quadratic.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

namespace ah = adahessian;
namespace oc = adahessian::oracle;
using ah::ParamVector;

TEST(ExactExpectation, SmallExamples) {
    Eigen::MatrixXd A(2, 2);
    A << 2, 1, 1, 3;
    ParamVector e = oc::exact_hutchinson_expectation(A);
    EXPECT_DOUBLE_EQ(e(0), 2.0);
    EXPECT_DOUBLE_EQ(e(1), 3.0);
    EXPECT_EQ(oc::exact_hutchinson_expectation(Eigen::MatrixXd::Zero(3, 3)), ParamVector::Zero(3));
}

TEST(ExactExpectation, EqualsDiagonalUpToTwelveDimensions) {
    ah::Rng rng(12);
    for (ah::Index d = 1; d <= 12; ++d) {
        Eigen::MatrixXd H = ah::testing::random_symmetric(d, rng);
        EXPECT_LE((oc::exact_hutchinson_expectation(H) - H.diagonal()).cwiseAbs().maxCoeff(), 1e-12) << d;
    }
}

TEST(ExactExpectation, RejectsLargeOrNonSquare) {
    EXPECT_THROW(oc::exact_hutchinson_expectation(Eigen::MatrixXd::Identity(13, 13)), ah::ContractViolation);
    EXPECT_THROW(oc::exact_hutchinson_expectation(Eigen::MatrixXd::Zero(2, 3)), ah::ContractViolation);
}

TEST(FdHessian, RejectsLargeDimension) {
    auto q = ah::make_random_spd_quadratic(64, 10.0, 1);
    EXPECT_NO_THROW(oc::fd_hessian(q, ParamVector::Zero(64)));
    EXPECT_THROW(oc::fd_hessian(ah::make_random_spd_quadratic(65, 10.0, 1), ParamVector::Zero(65)),
                 ah::ContractViolation);
}

TEST(DescentCheck, Fig1FullHessianPowerOne) {
    auto q = ah::make_fig1_quadratic();
    EXPECT_DOUBLE_EQ(q.alpha(), 2.0);
    EXPECT_DOUBLE_EQ(q.beta(), 20.0);
    // eta = 0.1, dw = w, f(0.9 w) - f(w) = (0.81 - 1) * 11; bound -2/800 * 404.
    auto r = oc::reference_descent_check(q, ParamVector::Ones(2), 1.0);
    EXPECT_TRUE(r.passed);
    EXPECT_NEAR(r.decrease, -2.09, 1e-12);
    EXPECT_NEAR(r.bound, -1.01, 1e-12);
    EXPECT_GT(r.slack, 0.0);
}

TEST(DescentCheck, PowerZeroIsGradientDescentWithStepOneOverBeta) {
    auto q = ah::make_fig1_quadratic();
    ParamVector w = ParamVector::Ones(2);
    auto r = oc::reference_descent_check(q, w, 0.0);
    ParamVector g = q.gradient(w);
    const double direct = q.value(w - g / 20.0) - q.value(w);
    EXPECT_NEAR(r.decrease, direct, 1e-12);
    EXPECT_NEAR(r.bound, -g.squaredNorm() / 40.0, 1e-12);
    EXPECT_TRUE(r.passed);
}

TEST(DescentCheck, DecreaseAgreesWithFunctionValues) {
    auto q = ah::make_random_spd_quadratic(6, 50.0, 3);
    ah::Rng rng(8);
    for (auto kind : {oc::Preconditioner::full_hessian, oc::Preconditioner::diagonal}) {
        ParamVector w = ah::testing::random_vector(6, rng);
        auto r = oc::reference_descent_check(q, w, 0.5, kind);
        // Recompute the step from scratch for the diagonal case only.
        if (kind == oc::Preconditioner::diagonal) {
            ParamVector g = q.gradient(w);
            const double eta = std::sqrt(q.alpha()) / q.beta();
            ParamVector dw = (q.matrix().diagonal().array().pow(-0.5) * g.array()).matrix();
            EXPECT_NEAR(r.decrease, q.value(w - eta * dw) - q.value(w), 1e-10);
        }
        EXPECT_TRUE(r.passed);
    }
}

struct SweepCase {
    oc::Preconditioner kind;
    ah::Index block;
    const char* label;
};

class DescentSweep : public ::testing::TestWithParam<SweepCase> {};

TEST_P(DescentSweep, HoldsOnRandomSpdQuadratics) {
    const auto& c = GetParam();
    ah::Rng rng(1000 + static_cast<std::uint64_t>(c.kind) * 10 + static_cast<std::uint64_t>(c.block));
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto d = static_cast<ah::Index>(2 + rng.below(15));
        const double cond = std::pow(10.0, rng.uniform(0.0, 4.0));
        auto q = ah::make_random_spd_quadratic(d, cond, rng.next_u64());
        for (double k : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            ParamVector w = ah::testing::random_vector(d, rng, 3.0);
            auto r = oc::reference_descent_check(q, w, k, c.kind, c.block);
            ASSERT_TRUE(r.precondition_ok) << r.detail;
            EXPECT_TRUE(r.passed) << c.label << " d=" << d << " cond=" << cond << " k=" << k
                                  << " decrease=" << r.decrease << " bound=" << r.bound;
            ++checked;
        }
    }
    EXPECT_EQ(checked, 500);
}

INSTANTIATE_TEST_SUITE_P(Preconditioners, DescentSweep,
                         ::testing::Values(SweepCase{oc::Preconditioner::full_hessian, 1, "full"},
                                           SweepCase{oc::Preconditioner::diagonal, 1, "diag"},
                                           SweepCase{oc::Preconditioner::block_diagonal, 2, "block2"},
                                           SweepCase{oc::Preconditioner::block_diagonal, 3, "block3"},
                                           SweepCase{oc::Preconditioner::block_diagonal, 5, "block5"}),
                         [](const auto& info) { return std::string(info.param.label); });

TEST(DescentCheck, DetectsAnOverlongStep) {
    // Sanity check on the checker itself: with the step doubled past 2/beta the
    // quadratic increases along the top eigenvector, so the same arithmetic fails.
    auto q = ah::make_fig1_quadratic();
    ParamVector w(2);
    w << 1.0, 0.0;
    ParamVector g = q.gradient(w);
    const double eta = 2.5 / q.beta();
    const double decrease = -eta * g.dot(g) + 0.5 * eta * eta * g.dot(q.matrix() * g);
    const double bound = -g.squaredNorm() / (2.0 * q.beta());
    EXPECT_GT(decrease, bound);
    EXPECT_TRUE(oc::reference_descent_check(q, w, 0.0).passed);
}

TEST(DescentCheck, RequiresSpdInput) {
    Eigen::MatrixXd A(2, 2);
    A << 1, 0, 0, -1;
    ah::QuadraticProblem q("indefinite", A);
    EXPECT_THROW(oc::reference_descent_check(q, ParamVector::Ones(2), 1.0), ah::ContractViolation);
    EXPECT_THROW(oc::reference_descent_check(ah::make_fig1_quadratic(), ParamVector::Ones(2), 1.5),
                 ah::ContractViolation);
}

TEST(BlockMeans, Examples) {
    ParamVector d(5);
    d << 1, 2, 3, 4, 5;
    ParamVector expected(5);
    expected << 1.5, 1.5, 3.5, 3.5, 5.0;
    EXPECT_EQ(oc::block_means(d, 2), expected);
    EXPECT_EQ(oc::block_means(d, 1), d);
    EXPECT_EQ(oc::block_means(d, 10), ParamVector::Constant(5, 3.0));
}

TEST(ReferenceMoments, FirstStepIsTheInput) {
    std::vector<ParamVector> g{ParamVector::Constant(2, 3.0)};
    std::vector<ParamVector> s{ParamVector::Constant(2, -4.0)};
    auto m = oc::reference_moments(g, s, 0.9, 0.999, 1.0);
    EXPECT_NEAR(m.m(0), 3.0, 1e-14);
    EXPECT_NEAR(m.v(0), 4.0, 1e-12);
    auto half = oc::reference_moments(g, s, 0.9, 0.999, 0.5);
    EXPECT_NEAR(half.v(0), 2.0, 1e-12);
}
