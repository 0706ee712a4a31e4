#pragma once

#include "adahessian/problem.hpp"
#include "adahessian/problems/dataset.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace adahessian {

// Binary logistic regression, mean loss softplus(z) - y z with z = X w + b.
// Parameter groups: w (p x 1), b (1 x 1). Closed-form gradient and HVP
// override the tape path.
class LogisticRegression final : public DifferentiableProblem {
public:
    explicit LogisticRegression(SyntheticDataset data) : data_(std::move(data)) {
        require(data_.num_classes == 2, "LogisticRegression: needs binary labels");
        layout_ = {ParamGroup{"w", data_.features(), 1}, ParamGroup{"b", 1, 1}};
    }

    [[nodiscard]] std::string name() const override { return "logreg"; }
    [[nodiscard]] const std::vector<ParamGroup>& layout() const override { return layout_; }
    [[nodiscard]] ParamVector initial_point(std::uint64_t) const override { return ParamVector::Zero(dim()); }
    [[nodiscard]] Index num_samples() const override { return data_.size(); }
    [[nodiscard]] const SyntheticDataset& data() const { return data_; }

    ad::Var record_loss(ad::Tape& tape, std::span<const ad::Var> params, const Batch& batch) const override {
        ad::Var X = tape.constant(data_.rows(batch));
        ad::Var y = tape.constant(data_.target_rows(batch));
        ad::Var z = ad::add_row(ad::matmul(X, params[0]), params[1]);
        return ad::mean(ad::softplus(z) - y * z);
    }

protected:
    double do_value(const ParamVector& theta, const Batch& batch) const override {
        const Matrix X = data_.rows(batch);
        const Matrix y = data_.target_rows(batch);
        const Eigen::VectorXd z = logits(X, theta);
        double total = 0.0;
        for (Index i = 0; i < z.size(); ++i) {
            total += std::max(z(i), 0.0) + std::log1p(std::exp(-std::abs(z(i)))) - y(i, 0) * z(i);
        }
        return total / static_cast<double>(z.size());
    }

    ParamVector do_gradient(const ParamVector& theta, const Batch& batch) const override {
        const Matrix X = data_.rows(batch);
        const Matrix y = data_.target_rows(batch);
        Eigen::VectorXd r = logits(X, theta).unaryExpr(&ad::Tape::stable_sigmoid) - y.col(0);
        return pack(X.transpose() * r, r.sum(), X.rows());
    }

    // H = [X 1]^T S [X 1] / n with S = diag(s (1 - s)).
    ParamVector do_hvp(const ParamVector& theta, const ParamVector& v, const Batch& batch) const override {
        const Matrix X = data_.rows(batch);
        const Eigen::VectorXd s = logits(X, theta).unaryExpr(&ad::Tape::stable_sigmoid);
        const Index p = X.cols();
        Eigen::VectorXd Xv = X * v.head(p);
        Xv.array() += v(p);
        const Eigen::VectorXd weighted = (s.array() * (1.0 - s.array()) * Xv.array()).matrix();
        return pack(X.transpose() * weighted, weighted.sum(), X.rows());
    }

    SecondOrderEval do_second_order(const ParamVector& theta, std::span<const ParamVector> probes,
                                    const Batch& batch) const override {
        SecondOrderEval out{do_value(theta, batch), do_gradient(theta, batch), {}};
        for (const auto& z : probes) out.hvps.push_back(do_hvp(theta, z, batch));
        return out;
    }

private:
    static Eigen::VectorXd logits(const Matrix& X, const ParamVector& theta) {
        const Index p = X.cols();
        Eigen::VectorXd z = X * theta.head(p);
        z.array() += theta(p);
        return z;
    }

    static ParamVector pack(const Eigen::VectorXd& w_part, double b_part, Index n) {
        ParamVector out(w_part.size() + 1);
        out << w_part, b_part;
        return out / static_cast<double>(n);
    }

    SyntheticDataset data_;
    std::vector<ParamGroup> layout_;
};

inline LogisticRegression make_logreg(Index n, Index p, std::uint64_t seed) {
    return LogisticRegression(make_logistic_data(n, p, seed));
}

}  // namespace adahessian
