#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace adahessian {

using Index = Eigen::Index;

// Flat parameter / gradient / curvature vector. Length is fixed for a run.
using ParamVector = Eigen::VectorXd;

// Row-major so that flattening a parameter tensor walks along rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Caller broke a precondition (dimension mismatch, bad hyperparameter, ...).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A computation produced NaN or Inf.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ContractViolation(what);
}

template <typename Derived>
[[nodiscard]] bool all_finite(const Eigen::DenseBase<Derived>& x) {
    return x.allFinite();
}

// Throws NumericError naming the first offending coordinate.
template <typename Derived>
void check_finite(const Eigen::DenseBase<Derived>& x, const std::string& where) {
    for (Index i = 0; i < x.size(); ++i) {
        const double v = x.derived().data()[i];
        if (!std::isfinite(v)) {
            throw NumericError(where + ": non-finite value " + std::to_string(v) +
                               " at coordinate " + std::to_string(i));
        }
    }
}

inline void require_same_length(const ParamVector& a, const ParamVector& b, const char* what) {
    if (a.size() != b.size()) {
        throw ContractViolation(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
    }
}

}  // namespace adahessian
