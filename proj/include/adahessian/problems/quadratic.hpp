#pragma once

#include "adahessian/problem.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace adahessian {

// f(w) = 1/2 w^T A w + c^T w with symmetric A.
class QuadraticProblem final : public DifferentiableProblem {
public:
    QuadraticProblem(std::string name, Eigen::MatrixXd A, std::optional<ParamVector> linear = std::nullopt,
                     std::optional<ParamVector> start = std::nullopt)
        : name_(std::move(name)), A_(std::move(A)) {
        require(A_.rows() == A_.cols() && A_.rows() >= 1, "QuadraticProblem: A must be square");
        require(A_.rows() <= 64, "QuadraticProblem: dense quadratics are limited to d <= 64");
        require(A_.allFinite(), "QuadraticProblem: A must be finite");
        const double asym = (A_ - A_.transpose()).cwiseAbs().maxCoeff();
        require(asym <= 1e-12 * std::max(1.0, A_.cwiseAbs().maxCoeff()), "QuadraticProblem: A must be symmetric");
        A_ = 0.5 * (A_ + A_.transpose()).eval();
        const Index d = A_.rows();
        linear_ = linear.value_or(ParamVector::Zero(d));
        require(linear_.size() == d, "QuadraticProblem: linear term has wrong length");
        start_ = start.value_or(ParamVector::Ones(d));
        require(start_.size() == d, "QuadraticProblem: start point has wrong length");

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A_, Eigen::EigenvaluesOnly);
        alpha_ = eig.eigenvalues().minCoeff();
        beta_ = eig.eigenvalues().maxCoeff();
        layout_ = {ParamGroup{"w", d, 1}};
    }

    [[nodiscard]] std::string name() const override { return name_; }
    [[nodiscard]] const std::vector<ParamGroup>& layout() const override { return layout_; }
    [[nodiscard]] ParamVector initial_point(std::uint64_t) const override { return start_; }

    [[nodiscard]] const Eigen::MatrixXd& matrix() const { return A_; }
    [[nodiscard]] const ParamVector& linear() const { return linear_; }
    // Extreme eigenvalues of A: alpha I <= A <= beta I.
    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] double beta() const { return beta_; }
    [[nodiscard]] bool is_spd() const { return alpha_ > 0.0; }

    ad::Var record_loss(ad::Tape& tape, std::span<const ad::Var> params, const Batch&) const override {
        const ad::Var& w = params[0];
        Matrix A = A_;
        Matrix c = linear_;
        ad::Var quad = ad::sum(w * ad::matmul(tape.constant(std::move(A)), w)) * 0.5;
        return quad + ad::sum(w * tape.constant(std::move(c)));
    }

protected:
    double do_value(const ParamVector& w, const Batch&) const override {
        return 0.5 * w.dot(A_ * w) + linear_.dot(w);
    }
    ParamVector do_gradient(const ParamVector& w, const Batch&) const override { return A_ * w + linear_; }
    ParamVector do_hvp(const ParamVector&, const ParamVector& z, const Batch&) const override { return A_ * z; }
    SecondOrderEval do_second_order(const ParamVector& w, std::span<const ParamVector> probes,
                                    const Batch& batch) const override {
        SecondOrderEval out{do_value(w, batch), do_gradient(w, batch), {}};
        for (const auto& z : probes) out.hvps.push_back(A_ * z);
        return out;
    }

private:
    std::string name_;
    Eigen::MatrixXd A_;
    ParamVector linear_;
    ParamVector start_;
    double alpha_ = 0.0;
    double beta_ = 0.0;
    std::vector<ParamGroup> layout_;
};

// f(x, y) = 10 x^2 + y^2, started at (1, 1).
inline QuadraticProblem make_fig1_quadratic() {
    Eigen::MatrixXd A = Eigen::Vector2d(20.0, 2.0).asDiagonal();
    return QuadraticProblem("fig1-quadratic", A, std::nullopt, ParamVector::Ones(2));
}

// SPD A = Q diag(lambda) Q^T with Q Haar-random orthogonal and eigenvalues
// log-spaced in [1, condition_number], so alpha = 1 and beta = condition_number.
// The start point is a standard normal draw.
inline QuadraticProblem make_random_spd_quadratic(Index d, double condition_number, std::uint64_t seed) {
    require(d >= 2, "make_random_spd_quadratic: d must be >= 2");
    require(condition_number >= 1.0, "make_random_spd_quadratic: condition number must be >= 1");
    Rng rng = make_stream(seed, StreamTag::data);
    Eigen::MatrixXd G(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) G(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ();
    // Sign fix makes Q Haar distributed.
    for (Index j = 0; j < d; ++j) {
        if (qr.matrixQR()(j, j) < 0.0) Q.col(j) *= -1.0;
    }
    ParamVector lambda(d);
    for (Index i = 0; i < d; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(d - 1);
        lambda(i) = std::pow(condition_number, frac);
    }
    lambda(0) = 1.0;
    lambda(d - 1) = condition_number;
    Eigen::MatrixXd A = Q * lambda.asDiagonal() * Q.transpose();
    A = 0.5 * (A + A.transpose()).eval();
    ParamVector start(d);
    for (Index i = 0; i < d; ++i) start(i) = rng.normal();
    return QuadraticProblem("spd-quadratic", A, std::nullopt, start);
}

}  // namespace adahessian
