#pragma once

#include "adahessian/problem.hpp"
#include "adahessian/random.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace adahessian::testing {

// Problem defined by a lambda over the parameter leaves; uses only the tape path.
class LambdaProblem final : public DifferentiableProblem {
public:
    using Body = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

    LambdaProblem(std::vector<ParamGroup> layout, Body body) : layout_(std::move(layout)), body_(std::move(body)) {}

    std::string name() const override { return "lambda"; }
    const std::vector<ParamGroup>& layout() const override { return layout_; }
    ParamVector initial_point(std::uint64_t) const override { return ParamVector::Zero(dim()); }
    ad::Var record_loss(ad::Tape& t, std::span<const ad::Var> p, const Batch&) const override { return body_(t, p); }

private:
    std::vector<ParamGroup> layout_;
    Body body_;
};

inline ParamVector random_vector(Index d, Rng& rng, double scale = 1.0) {
    ParamVector v(d);
    for (Index i = 0; i < d; ++i) v(i) = scale * rng.normal();
    return v;
}

inline Eigen::MatrixXd random_symmetric(Index d, Rng& rng) {
    Eigen::MatrixXd M(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) M(i, j) = rng.normal();
    return 0.5 * (M + M.transpose());
}

inline double rel_error(const ParamVector& a, const ParamVector& b) {
    return (a - b).norm() / std::max(1.0, std::max(a.norm(), b.norm()));
}

}  // namespace adahessian::testing
