#include "adahessian/oracle.hpp"
#include "adahessian/tape.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace ah = adahessian;
namespace ad = adahessian::ad;
using ah::Matrix;
using ah::ParamVector;
using ah::testing::LambdaProblem;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<ah::Index>(rows.size()), static_cast<ah::Index>(rows.begin()->size()));
    ah::Index i = 0;
    for (auto r : rows) {
        ah::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

// A smooth function touching every differentiable primitive.
LambdaProblem all_ops_problem() {
    return LambdaProblem({{"A", 3, 2}, {"b", 1, 2}}, [](ad::Tape& t, std::span<const ad::Var> p) {
        Matrix x(4, 3);
        x << 0.3, -0.2, 0.5, 1.1, 0.4, -0.7, -0.6, 0.9, 0.2, 0.05, -0.3, 0.8;
        ad::Var X = t.constant(x);
        ad::Var z = ad::add_row(ad::matmul(X, p[0]), p[1]);
        ad::Var a = ad::tanh(z) + ad::sigmoid(z) * ad::softplus(z);
        ad::Var c = ad::sin(z) * ad::cos(z * 0.5) + ad::exp(z * 0.3);
        ad::Var d = ad::log(ad::exp(z) + 2.0) + ad::reciprocal(z * z + 1.0);
        ad::Var e = ad::transpose(ad::sum_cols(a * c));
        ad::Var f = ad::broadcast_rows(ad::sum_rows(d), 4) * (-1.0);
        return ad::sum(e * e) * 0.1 + ad::mean(f * a) - ad::sum(c);
    });
}

}  // namespace

TEST(Tape, ForwardValuesOfFig1Function) {
    ad::Tape t;
    ad::Var w = t.leaf(mat({{1.0}, {1.0}}));
    ad::Var A = t.constant(mat({{20.0, 0.0}, {0.0, 2.0}}));
    ad::Var f = ad::sum(w * ad::matmul(A, w)) * 0.5;
    EXPECT_DOUBLE_EQ(f.item(), 11.0);
}

TEST(Tape, GradientOfQuadratic) {
    ad::Tape t;
    ad::Var w = t.leaf(mat({{1.0}, {0.0}}));
    ad::Var A = t.constant(mat({{2.0, 1.0}, {1.0, 3.0}}));
    ad::Var f = ad::sum(w * ad::matmul(A, w)) * 0.5;
    auto g = t.gradients(f, {w});
    EXPECT_DOUBLE_EQ(g[0].value()(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(g[0].value()(1, 0), 1.0);
}

TEST(Tape, DoubleBackpropGivesHessianVectorProduct) {
    ad::Tape t;
    ad::Var w = t.leaf(mat({{0.7}, {-1.3}}));
    ad::Var A = t.constant(mat({{2.0, 1.0}, {1.0, 3.0}}));
    ad::Var f = ad::sum(w * ad::matmul(A, w)) * 0.5;
    auto g = t.gradients(f, {w});
    ad::Var gz = ad::sum(g[0] * t.constant(mat({{1.0}, {-1.0}})));
    auto hz = t.gradients(gz, {w});
    EXPECT_DOUBLE_EQ(hz[0].value()(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(hz[0].value()(1, 0), -2.0);
}

TEST(Tape, UnusedInputGetsZeroGradient) {
    ad::Tape t;
    ad::Var a = t.leaf(mat({{1.0, 2.0}}));
    ad::Var b = t.leaf(mat({{3.0}}));
    ad::Var f = ad::sum(a * a);
    auto g = t.gradients(f, {a, b});
    EXPECT_DOUBLE_EQ(g[1].value()(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(g[0].value()(0, 1), 4.0);
}

TEST(Tape, NodesAreTopologicallyOrdered) {
    ad::Tape t;
    ad::Var w = t.leaf(mat({{0.5, -0.25}}));
    ad::Var f = ad::sum(ad::tanh(w) * w);
    auto g = t.gradients(f, {w});
    auto h = t.gradients(ad::sum(g[0]), {w});
    (void)h;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto& n = t.node(static_cast<ad::NodeId>(i));
        if (n.lhs != ad::no_node) EXPECT_LT(n.lhs, static_cast<ad::NodeId>(i));
        if (n.rhs != ad::no_node) EXPECT_LT(n.rhs, static_cast<ad::NodeId>(i));
    }
}

TEST(Tape, ShapeMismatchIsAContractViolation) {
    ad::Tape t;
    ad::Var a = t.leaf(Matrix::Ones(2, 3));
    ad::Var b = t.leaf(Matrix::Ones(3, 2));
    EXPECT_THROW(t.add(a, b), ah::ContractViolation);
    EXPECT_THROW(t.matmul(a, a), ah::ContractViolation);
    EXPECT_THROW(t.gradients(a, {a}), ah::ContractViolation);
}

TEST(Tape, VarsFromAnotherTapeAreRejected) {
    ad::Tape t1;
    ad::Tape t2;
    ad::Var a = t1.leaf(Matrix::Ones(1, 1));
    ad::Var b = t2.leaf(Matrix::Ones(1, 1));
    EXPECT_THROW(t1.add(a, b), ah::ContractViolation);
}

TEST(Tape, NonFiniteResultNamesTheOp) {
    ad::Tape t;
    ad::Var a = t.leaf(Matrix::Constant(1, 1, 800.0));
    try {
        (void)ad::exp(a);
        FAIL() << "expected NumericError";
    } catch (const ah::NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("'exp'"), std::string::npos) << e.what();
    }
    ad::Var zero = t.leaf(Matrix::Zero(1, 1));
    EXPECT_THROW((void)ad::log(zero), ah::NumericError);
}

TEST(Tape, ReluHasZeroCurvatureAndZeroSlopeAtOrigin) {
    ad::Tape t;
    ad::Var x = t.leaf(mat({{-1.0, 0.0, 2.0}}));
    ad::Var f = ad::sum(ad::relu(x) * ad::relu(x) * 0.5 + ad::relu(x));
    auto g = t.gradients(f, {x});
    EXPECT_DOUBLE_EQ(g[0].value()(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(g[0].value()(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(g[0].value()(0, 2), 3.0);
    // relu(x)^2 / 2 has second derivative 1 where x > 0 (through mul), relu itself contributes 0.
    auto h = t.gradients(ad::sum(g[0]), {x});
    EXPECT_DOUBLE_EQ(h[0].value()(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(h[0].value()(0, 2), 1.0);
}

TEST(Tape, SoftmaxCrossEntropyIsShiftStable) {
    ad::Tape t;
    ad::Var z = t.leaf(mat({{1000.0, 1001.0}, {-5.0, -5.0}}));
    Matrix onehot = mat({{0.0, 1.0}, {1.0, 0.0}});
    ad::Var loss = ad::softmax_cross_entropy(z, onehot);
    const double expected = 0.5 * (std::log1p(std::exp(-1.0)) + std::log(2.0));
    EXPECT_NEAR(loss.item(), expected, 1e-12);
}

TEST(Tape, EveryPrimitiveMatchesFiniteDifferences) {
    auto p = all_ops_problem();
    ah::Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        ParamVector theta = ah::testing::random_vector(p.dim(), rng, 0.5);
        ParamVector g = p.gradient(theta);
        ParamVector fd = ah::oracle::fd_gradient(p, theta, 1e-5);
        EXPECT_LT((g - fd).cwiseAbs().maxCoeff(), 1e-6);

        ParamVector z = ah::testing::random_vector(p.dim(), rng);
        ParamVector hz = p.hvp(theta, z);
        ParamVector fd_hz = ah::oracle::fd_hvp(p, theta, z, 1e-5);
        EXPECT_LT(ah::testing::rel_error(hz, fd_hz), 1e-6);
    }
}

TEST(Tape, HvpIsLinearAndSymmetric) {
    auto p = all_ops_problem();
    ah::Rng rng(11);
    ParamVector theta = ah::testing::random_vector(p.dim(), rng, 0.5);
    for (int trial = 0; trial < 10; ++trial) {
        ParamVector z1 = ah::testing::random_vector(p.dim(), rng);
        ParamVector z2 = ah::testing::random_vector(p.dim(), rng);
        const double a = rng.normal();
        const double b = rng.normal();
        ParamVector lhs = p.hvp(theta, a * z1 + b * z2);
        ParamVector rhs = a * p.hvp(theta, z1) + b * p.hvp(theta, z2);
        EXPECT_LE((lhs - rhs).norm(), 1e-10 * std::max(1.0, rhs.norm()));

        const double s12 = z1.dot(p.hvp(theta, z2));
        const double s21 = z2.dot(p.hvp(theta, z1));
        EXPECT_LE(std::abs(s12 - s21), 1e-8 * std::max(1.0, std::abs(s12)));
    }
}

TEST(Tape, ThirdOrderThroughTripleBackprop) {
    // f = x^4 / 4 : f' = x^3, f'' = 3x^2, f''' = 6x.
    ad::Tape t;
    ad::Var x = t.leaf(Matrix::Constant(1, 1, 1.5));
    ad::Var f = ad::sum(x * x * x * x) * 0.25;
    auto g1 = t.gradients(f, {x});
    auto g2 = t.gradients(ad::sum(g1[0]), {x});
    auto g3 = t.gradients(ad::sum(g2[0]), {x});
    EXPECT_NEAR(g1[0].item(), 3.375, 1e-12);
    EXPECT_NEAR(g2[0].item(), 6.75, 1e-12);
    EXPECT_NEAR(g3[0].item(), 9.0, 1e-12);
}
