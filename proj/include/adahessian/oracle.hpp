#pragma once

// Brute-force references. Nothing here goes through the tape's second-order
// path or the optimizer classes; everything is computed from function values,
// gradients, or explicit sums.

#include "adahessian/problem.hpp"
#include "adahessian/problems/quadratic.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace adahessian::oracle {

// Central differences of the loss with per-coordinate step h * max(1, |theta_i|).
inline ParamVector fd_gradient(const DifferentiableProblem& p, const ParamVector& theta, double h = 1e-5,
                               const Batch& batch = Batch::full()) {
    ParamVector g(theta.size());
    ParamVector x = theta;
    for (Index i = 0; i < theta.size(); ++i) {
        const double step = h * std::max(1.0, std::abs(theta(i)));
        x(i) = theta(i) + step;
        const double fp = p.value(x, batch);
        x(i) = theta(i) - step;
        const double fm = p.value(x, batch);
        x(i) = theta(i);
        g(i) = (fp - fm) / (2.0 * step);
    }
    return g;
}

// (grad f(theta + h z) - grad f(theta - h z)) / 2h
inline ParamVector fd_hvp(const DifferentiableProblem& p, const ParamVector& theta, const ParamVector& z,
                          double h = 1e-5, const Batch& batch = Batch::full()) {
    return (p.gradient(theta + h * z, batch) - p.gradient(theta - h * z, batch)) / (2.0 * h);
}

enum class HessianMethod { finite_difference, analytic };

struct DenseHessian {
    Eigen::MatrixXd H;  // symmetrized
    HessianMethod method = HessianMethod::analytic;
    double step = 0.0;
    double asymmetry = 0.0;  // max |H - H^T| before symmetrization
};

inline constexpr Index max_dense_dim = 64;
inline constexpr Index max_enumeration_dim = 12;

inline DenseHessian fd_hessian(const DifferentiableProblem& p, const ParamVector& theta, double h = 1e-5,
                               const Batch& batch = Batch::full()) {
    const Index d = theta.size();
    require(d <= max_dense_dim, "fd_hessian: d must be <= 64");
    require(h > 0.0, "fd_hessian: step must be positive");
    Eigen::MatrixXd H(d, d);
    ParamVector x = theta;
    for (Index j = 0; j < d; ++j) {
        x(j) = theta(j) + h;
        const ParamVector gp = p.gradient(x, batch);
        x(j) = theta(j) - h;
        const ParamVector gm = p.gradient(x, batch);
        x(j) = theta(j);
        H.col(j) = (gp - gm) / (2.0 * h);
    }
    for (Index i = 0; i < d; ++i) {
        for (Index j = 0; j < d; ++j) {
            if (!std::isfinite(H(i, j))) {
                throw NumericError("fd_hessian: non-finite entry at (" + std::to_string(i) + ", " +
                                   std::to_string(j) + ")");
            }
        }
    }
    DenseHessian out;
    out.asymmetry = d > 0 ? (H - H.transpose()).cwiseAbs().maxCoeff() : 0.0;
    out.H = 0.5 * (H + H.transpose());
    out.method = HessianMethod::finite_difference;
    out.step = h;
    return out;
}

inline DenseHessian analytic_hessian(const QuadraticProblem& q) {
    return DenseHessian{q.matrix(), HessianMethod::analytic, 0.0, 0.0};
}

// Mean of z * (H z) over all 2^d sign vectors z.
inline ParamVector exact_hutchinson_expectation(const Eigen::MatrixXd& H) {
    const Index d = H.rows();
    require(H.cols() == d, "exact_hutchinson_expectation: H must be square");
    require(d >= 1 && d <= max_enumeration_dim, "exact_hutchinson_expectation: d must be in [1, 12]");
    const std::uint64_t patterns = std::uint64_t{1} << d;
    ParamVector acc = ParamVector::Zero(d);
    Eigen::VectorXd z(d);
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
        for (Index i = 0; i < d; ++i) z(i) = ((mask >> i) & 1u) ? 1.0 : -1.0;
        acc += z.cwiseProduct(H * z);
    }
    return acc / static_cast<double>(patterns);
}

inline ParamVector exact_hutchinson_expectation(const DenseHessian& H) { return exact_hutchinson_expectation(H.H); }

// ---------------------------------------------------------------------------
// Descent inequality for f = 1/2 w^T A w + c^T w with alpha I <= A <= beta I:
//   f(w - eta dw) - f(w) <= -alpha^k / (2 beta^(1+k)) ||g||^2,  eta = alpha^k / beta.

enum class Preconditioner { full_hessian, diagonal, block_diagonal };

struct DescentCheck {
    bool passed = false;
    bool precondition_ok = true;  // diagonal / block entries inside [alpha, beta]
    double decrease = 0.0;        // f(w - eta dw) - f(w)
    double bound = 0.0;           // -alpha^k / (2 beta^(1+k)) ||g||^2
    double slack = 0.0;           // bound - decrease, >= 0 when the inequality holds
    std::string detail;
};

// Block means over consecutive runs of `block` entries, computed directly.
inline ParamVector block_means(const ParamVector& D, Index block) {
    require(block >= 1, "block_means: block must be >= 1");
    ParamVector out(D.size());
    for (Index start = 0; start < D.size(); start += block) {
        const Index len = std::min(block, D.size() - start);
        double s = 0.0;
        for (Index i = start; i < start + len; ++i) s += D(i);
        for (Index i = start; i < start + len; ++i) out(i) = s / static_cast<double>(len);
    }
    return out;
}

inline DescentCheck reference_descent_check(const QuadraticProblem& q, const ParamVector& w, double k,
                                            Preconditioner kind = Preconditioner::full_hessian,
                                            Index block_size = 1) {
    require(q.is_spd(), "reference_descent_check: quadratic must be SPD");
    require(w.size() == q.dim(), "reference_descent_check: w has the wrong length");
    require(k >= 0.0 && k <= 1.0, "reference_descent_check: k must be in [0, 1]");
    const Eigen::MatrixXd& A = q.matrix();
    const double alpha = q.alpha();
    const double beta = q.beta();
    const ParamVector g = A * w + q.linear();

    DescentCheck out;
    ParamVector dw;
    // Slightly widened range: eigenvalues carry rounding error.
    const double lo = alpha * (1.0 - 1e-12);
    const double hi = beta * (1.0 + 1e-12);
    switch (kind) {
        case Preconditioner::full_hessian: {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
            const ParamVector lam_pow = eig.eigenvalues().array().pow(-k).matrix();
            dw = eig.eigenvectors() * lam_pow.asDiagonal() * (eig.eigenvectors().transpose() * g);
            break;
        }
        case Preconditioner::diagonal:
        case Preconditioner::block_diagonal: {
            ParamVector D = A.diagonal();
            if (kind == Preconditioner::block_diagonal) D = block_means(D, block_size);
            if ((D.array() < lo).any() || (D.array() > hi).any()) {
                out.precondition_ok = false;
                out.detail = "preconditioner entries fall outside [alpha, beta]";
                return out;
            }
            dw = (D.array().pow(-k) * g.array()).matrix();
            break;
        }
    }

    const double eta = std::pow(alpha, k) / beta;
    // Exact for quadratics; avoids cancellation between two large f values.
    out.decrease = -eta * g.dot(dw) + 0.5 * eta * eta * dw.dot(A * dw);
    const double g2 = g.squaredNorm();
    out.bound = -std::pow(alpha, k) / (2.0 * std::pow(beta, 1.0 + k)) * g2;
    out.slack = out.bound - out.decrease;
    out.passed = out.decrease - out.bound <= 1e-12 * std::max(1.0, g2);
    return out;
}

// ---------------------------------------------------------------------------
// Reference trajectories from the explicit-sum moment formulas
//   m_t = (1 - b1) sum_i b1^(t-i) g_i / (1 - b1^t)
//   v_t = ( sqrt((1 - b2) sum_i b2^(t-i) s_i^2 / (1 - b2^t)) )^k
// with s_i the curvature (AdaHessian) or the gradient (Adam). O(t^2) on purpose.

struct ReferenceMoments {
    ParamVector m;
    ParamVector v;
};

inline ReferenceMoments reference_moments(const std::vector<ParamVector>& g, const std::vector<ParamVector>& s,
                                          double beta1, double beta2, double k) {
    require(!g.empty() && g.size() == s.size(), "reference_moments: need matching histories");
    const std::size_t t = g.size();
    const Index d = g.front().size();
    ParamVector m = ParamVector::Zero(d);
    ParamVector v2 = ParamVector::Zero(d);
    for (std::size_t i = 1; i <= t; ++i) {
        const double w1 = (1.0 - beta1) * std::pow(beta1, static_cast<double>(t - i));
        const double w2 = (1.0 - beta2) * std::pow(beta2, static_cast<double>(t - i));
        m += w1 * g[i - 1];
        v2 += w2 * s[i - 1].cwiseProduct(s[i - 1]);
    }
    m /= 1.0 - std::pow(beta1, static_cast<double>(t));
    v2 /= 1.0 - std::pow(beta2, static_cast<double>(t));
    return {m, v2.cwiseSqrt().array().pow(k).matrix()};
}

// theta_t for t = 1..T given the gradient and curvature fed at each step.
inline std::vector<ParamVector> reference_trajectory(const ParamVector& theta0, const std::vector<ParamVector>& g,
                                                     const std::vector<ParamVector>& s, double lr, double beta1,
                                                     double beta2, double k, double eps) {
    std::vector<ParamVector> out;
    ParamVector theta = theta0;
    std::vector<ParamVector> gh;
    std::vector<ParamVector> sh;
    for (std::size_t t = 0; t < g.size(); ++t) {
        gh.push_back(g[t]);
        sh.push_back(s[t]);
        const auto mom = reference_moments(gh, sh, beta1, beta2, k);
        theta = theta - lr * (mom.m.array() / (mom.v.array() + eps)).matrix();
        out.push_back(theta);
    }
    return out;
}

}  // namespace adahessian::oracle
