#pragma once

// Reverse-mode automatic differentiation on a recorded tape of matrix-valued
// nodes.
//
// The backward pass is itself recorded on the same tape: every adjoint is an
// ordinary node built from the same primitive ops. Differentiating a scalar
// built from first-order adjoints therefore yields exact second-order
// quantities. In particular, for a loss L with gradient nodes g and a constant
// probe z, backpropagating s = sum(g * z) produces H z (double backprop).
//
//   ad::Tape tape;
//   auto w = tape.leaf(w0);
//   auto loss = ad::sum(ad::tanh(w) * w);
//   auto g = tape.gradients(loss, {w});
//   auto s = ad::sum(g[0] * tape.constant(z));
//   auto hz = tape.gradients(s, {w});
//
// Node values are owned by the tape. References returned by Var::value() are
// valid until the next node is recorded.

#include "adahessian/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace adahessian::ad {

enum class Op : std::uint8_t {
    leaf,
    constant,
    add,
    sub,
    mul,  // elementwise
    neg,
    scale,       // c * a
    add_scalar,  // a + c
    matmul,
    transpose,
    sum,               // all entries -> 1x1
    sum_rows,          // n x c -> 1 x c
    sum_cols,          // n x c -> n x 1
    broadcast_scalar,  // 1x1 -> r x c
    broadcast_rows,    // 1 x c -> n x c
    broadcast_cols,    // n x 1 -> n x c
    tanh,
    relu,
    sigmoid,
    softplus,
    sin,
    cos,
    exp,
    log,
    reciprocal,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::leaf: return "leaf";
        case Op::constant: return "constant";
        case Op::add: return "add";
        case Op::sub: return "sub";
        case Op::mul: return "mul";
        case Op::neg: return "neg";
        case Op::scale: return "scale";
        case Op::add_scalar: return "add_scalar";
        case Op::matmul: return "matmul";
        case Op::transpose: return "transpose";
        case Op::sum: return "sum";
        case Op::sum_rows: return "sum_rows";
        case Op::sum_cols: return "sum_cols";
        case Op::broadcast_scalar: return "broadcast_scalar";
        case Op::broadcast_rows: return "broadcast_rows";
        case Op::broadcast_cols: return "broadcast_cols";
        case Op::tanh: return "tanh";
        case Op::relu: return "relu";
        case Op::sigmoid: return "sigmoid";
        case Op::softplus: return "softplus";
        case Op::sin: return "sin";
        case Op::cos: return "cos";
        case Op::exp: return "exp";
        case Op::log: return "log";
        case Op::reciprocal: return "reciprocal";
    }
    return "?";
}

using NodeId = std::int32_t;
inline constexpr NodeId no_node = -1;

struct Node {
    Op op = Op::constant;
    NodeId lhs = no_node;
    NodeId rhs = no_node;
    double scalar = 0.0;  // factor for scale, offset for add_scalar
    bool requires_grad = false;
    Matrix value;
};

class Tape;

// Handle to a node on a tape. Cheap to copy.
class Var {
public:
    Var() = default;

    [[nodiscard]] NodeId id() const { return id_; }
    [[nodiscard]] Tape* tape() const { return tape_; }
    [[nodiscard]] bool valid() const { return tape_ != nullptr && id_ != no_node; }

    [[nodiscard]] const Matrix& value() const;
    [[nodiscard]] Index rows() const { return value().rows(); }
    [[nodiscard]] Index cols() const { return value().cols(); }
    [[nodiscard]] double item() const;
    [[nodiscard]] bool requires_grad() const;

private:
    friend class Tape;
    Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    NodeId id_ = no_node;
};

class Tape {
public:
    Tape() { nodes_.reserve(256); }

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    Var leaf(Matrix value) { return push(Op::leaf, no_node, no_node, 0.0, true, std::move(value)); }
    Var constant(Matrix value) { return push(Op::constant, no_node, no_node, 0.0, false, std::move(value)); }
    Var constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }
    [[nodiscard]] const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }

    Var add(Var a, Var b) {
        check_same_shape(a, b, "add");
        Matrix v = val(a) + val(b);
        return push(Op::add, a.id_, b.id_, 0.0, any_grad(a, b), std::move(v));
    }
    Var sub(Var a, Var b) {
        check_same_shape(a, b, "sub");
        Matrix v = val(a) - val(b);
        return push(Op::sub, a.id_, b.id_, 0.0, any_grad(a, b), std::move(v));
    }
    Var mul(Var a, Var b) {
        check_same_shape(a, b, "mul");
        Matrix v = val(a).cwiseProduct(val(b));
        return push(Op::mul, a.id_, b.id_, 0.0, any_grad(a, b), std::move(v));
    }
    Var neg(Var a) {
        own(a);
        Matrix v = -val(a);
        return push(Op::neg, a.id_, no_node, 0.0, grad_of(a), std::move(v));
    }
    Var scale(Var a, double c) {
        own(a);
        Matrix v = c * val(a);
        return push(Op::scale, a.id_, no_node, c, grad_of(a), std::move(v));
    }
    Var add_scalar(Var a, double c) {
        own(a);
        Matrix v = val(a).array() + c;
        return push(Op::add_scalar, a.id_, no_node, c, grad_of(a), std::move(v));
    }
    Var matmul(Var a, Var b) {
        own(a);
        own(b);
        if (val(a).cols() != val(b).rows()) {
            throw ContractViolation("matmul: inner dimensions differ (" + shape(a) + " x " + shape(b) + ")");
        }
        Matrix v = val(a) * val(b);
        return push(Op::matmul, a.id_, b.id_, 0.0, any_grad(a, b), std::move(v));
    }
    Var transpose(Var a) {
        own(a);
        Matrix v = val(a).transpose();
        return push(Op::transpose, a.id_, no_node, 0.0, grad_of(a), std::move(v));
    }
    Var sum(Var a) {
        own(a);
        Matrix v = Matrix::Constant(1, 1, val(a).sum());
        return push(Op::sum, a.id_, no_node, 0.0, grad_of(a), std::move(v));
    }
    Var sum_rows(Var a) {
        own(a);
        Matrix v = val(a).colwise().sum();
        return push(Op::sum_rows, a.id_, no_node, 0.0, grad_of(a), std::move(v));
    }
    Var sum_cols(Var a) {
        own(a);
        Matrix v = val(a).rowwise().sum();
        return push(Op::sum_cols, a.id_, no_node, 0.0, grad_of(a), std::move(v));
    }
    Var broadcast_scalar(Var a, Index rows, Index cols) {
        own(a);
        if (val(a).size() != 1) throw ContractViolation("broadcast_scalar: input must be 1x1, got " + shape(a));
        Matrix v = Matrix::Constant(rows, cols, val(a)(0, 0));
        return push(Op::broadcast_scalar, a.id_, no_node, 0.0, grad_of(a), std::move(v));
    }
    Var broadcast_rows(Var a, Index rows) {
        own(a);
        if (val(a).rows() != 1) throw ContractViolation("broadcast_rows: input must be a row, got " + shape(a));
        Matrix v = val(a).replicate(rows, 1);
        return push(Op::broadcast_rows, a.id_, no_node, 0.0, grad_of(a), std::move(v));
    }
    Var broadcast_cols(Var a, Index cols) {
        own(a);
        if (val(a).cols() != 1) throw ContractViolation("broadcast_cols: input must be a column, got " + shape(a));
        Matrix v = val(a).replicate(1, cols);
        return push(Op::broadcast_cols, a.id_, no_node, 0.0, grad_of(a), std::move(v));
    }
    Var tanh(Var a) { return unary(Op::tanh, a, [](double x) { return std::tanh(x); }); }
    // Derivative at exactly 0 is taken as 0; second derivative is 0 everywhere.
    Var relu(Var a) { return unary(Op::relu, a, [](double x) { return x > 0.0 ? x : 0.0; }); }
    Var sigmoid(Var a) { return unary(Op::sigmoid, a, stable_sigmoid); }
    Var softplus(Var a) {
        return unary(Op::softplus, a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
    }
    Var sin(Var a) { return unary(Op::sin, a, [](double x) { return std::sin(x); }); }
    Var cos(Var a) { return unary(Op::cos, a, [](double x) { return std::cos(x); }); }
    Var exp(Var a) { return unary(Op::exp, a, [](double x) { return std::exp(x); }); }
    Var log(Var a) { return unary(Op::log, a, [](double x) { return std::log(x); }); }
    Var reciprocal(Var a) { return unary(Op::reciprocal, a, [](double x) { return 1.0 / x; }); }

    // Reverse pass from a scalar output. The adjoint computation is recorded on
    // this tape, so the returned Vars can be differentiated again. Inputs the
    // output does not depend on receive a zero constant of matching shape.
    std::vector<Var> gradients(Var output, std::span<const Var> wrt);
    std::vector<Var> gradients(Var output, std::initializer_list<Var> wrt) {
        return gradients(output, std::span<const Var>(wrt.begin(), wrt.size()));
    }

    static double stable_sigmoid(double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    }

private:
    friend class Var;

    const Matrix& val(Var a) const { return nodes_[static_cast<std::size_t>(a.id_)].value; }
    bool grad_of(Var a) const { return nodes_[static_cast<std::size_t>(a.id_)].requires_grad; }
    bool any_grad(Var a, Var b) const { return grad_of(a) || grad_of(b); }

    void own(Var a) const {
        if (a.tape_ != this || a.id_ < 0 || static_cast<std::size_t>(a.id_) >= nodes_.size()) {
            throw ContractViolation("Var does not belong to this tape");
        }
    }

    std::string shape(Var a) const {
        return std::to_string(val(a).rows()) + "x" + std::to_string(val(a).cols());
    }

    void check_same_shape(Var a, Var b, const char* op) const {
        own(a);
        own(b);
        if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols()) {
            throw ContractViolation(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
        }
    }

    template <typename F>
    Var unary(Op op, Var a, F f) {
        own(a);
        Matrix v = val(a).unaryExpr(f);
        return push(op, a.id_, no_node, 0.0, grad_of(a), std::move(v));
    }

    Var push(Op op, NodeId lhs, NodeId rhs, double scalar, bool requires_grad, Matrix value) {
        if (!value.allFinite()) {
            throw NumericError(std::string("non-finite result in op '") + op_name(op) + "' at node " +
                               std::to_string(nodes_.size()));
        }
        nodes_.push_back(Node{op, lhs, rhs, scalar, requires_grad, std::move(value)});
        return Var(this, static_cast<NodeId>(nodes_.size() - 1));
    }

    void accumulate(std::vector<NodeId>& adjoint, NodeId target, Var contribution) {
        if (target == no_node || !nodes_[static_cast<std::size_t>(target)].requires_grad) return;
        auto& slot = adjoint[static_cast<std::size_t>(target)];
        slot = slot == no_node ? contribution.id_ : add(Var(this, slot), contribution).id_;
    }

    std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const {
    if (!valid()) throw ContractViolation("Var::value on an empty handle");
    return tape_->val(*this);
}

inline double Var::item() const {
    const Matrix& v = value();
    if (v.size() != 1) throw ContractViolation("Var::item on a non-scalar node");
    return v(0, 0);
}

inline bool Var::requires_grad() const { return tape_->grad_of(*this); }

inline std::vector<Var> Tape::gradients(Var output, std::span<const Var> wrt) {
    own(output);
    if (val(output).size() != 1) throw ContractViolation("gradients: output must be a 1x1 scalar");
    for (const Var& w : wrt) own(w);

    const NodeId out = output.id_;
    std::vector<NodeId> adjoint(static_cast<std::size_t>(out) + 1, no_node);
    if (grad_of(output)) adjoint[static_cast<std::size_t>(out)] = constant(1.0).id_;

    for (NodeId i = out; i >= 0; --i) {
        const NodeId adj_id = adjoint[static_cast<std::size_t>(i)];
        if (adj_id == no_node) continue;
        // Copy the metadata; recording below may reallocate nodes_.
        const Node& ref = nodes_[static_cast<std::size_t>(i)];
        if (!ref.requires_grad) continue;
        const Op op = ref.op;
        const NodeId lhs = ref.lhs;
        const NodeId rhs = ref.rhs;
        const double c = ref.scalar;
        const Var g(this, adj_id);
        const Var self(this, i);
        const Var a(this, lhs);
        const Var b(this, rhs);

        switch (op) {
            case Op::leaf:
            case Op::constant:
                break;
            case Op::add:
                accumulate(adjoint, lhs, g);
                accumulate(adjoint, rhs, g);
                break;
            case Op::sub:
                accumulate(adjoint, lhs, g);
                if (grad_of(b)) accumulate(adjoint, rhs, neg(g));
                break;
            case Op::mul:
                if (grad_of(a)) accumulate(adjoint, lhs, mul(g, b));
                if (grad_of(b)) accumulate(adjoint, rhs, mul(g, a));
                break;
            case Op::neg:
                accumulate(adjoint, lhs, neg(g));
                break;
            case Op::scale:
                accumulate(adjoint, lhs, scale(g, c));
                break;
            case Op::add_scalar:
                accumulate(adjoint, lhs, g);
                break;
            case Op::matmul:
                if (grad_of(a)) accumulate(adjoint, lhs, matmul(g, transpose(b)));
                if (grad_of(b)) accumulate(adjoint, rhs, matmul(transpose(a), g));
                break;
            case Op::transpose:
                accumulate(adjoint, lhs, transpose(g));
                break;
            case Op::sum:
                accumulate(adjoint, lhs, broadcast_scalar(g, val(a).rows(), val(a).cols()));
                break;
            case Op::sum_rows:
                accumulate(adjoint, lhs, broadcast_rows(g, val(a).rows()));
                break;
            case Op::sum_cols:
                accumulate(adjoint, lhs, broadcast_cols(g, val(a).cols()));
                break;
            case Op::broadcast_scalar:
                accumulate(adjoint, lhs, sum(g));
                break;
            case Op::broadcast_rows:
                accumulate(adjoint, lhs, sum_rows(g));
                break;
            case Op::broadcast_cols:
                accumulate(adjoint, lhs, sum_cols(g));
                break;
            case Op::tanh:
                // d tanh = 1 - tanh^2, expressed through the output node.
                accumulate(adjoint, lhs, mul(g, add_scalar(neg(mul(self, self)), 1.0)));
                break;
            case Op::relu: {
                Matrix mask = (val(a).array() > 0.0).cast<double>();
                accumulate(adjoint, lhs, mul(g, constant(std::move(mask))));
                break;
            }
            case Op::sigmoid:
                accumulate(adjoint, lhs, mul(g, mul(self, add_scalar(neg(self), 1.0))));
                break;
            case Op::softplus:
                accumulate(adjoint, lhs, mul(g, sigmoid(a)));
                break;
            case Op::sin:
                accumulate(adjoint, lhs, mul(g, cos(a)));
                break;
            case Op::cos:
                accumulate(adjoint, lhs, neg(mul(g, sin(a))));
                break;
            case Op::exp:
                accumulate(adjoint, lhs, mul(g, self));
                break;
            case Op::log:
                accumulate(adjoint, lhs, mul(g, reciprocal(a)));
                break;
            case Op::reciprocal:
                accumulate(adjoint, lhs, neg(mul(g, mul(self, self))));
                break;
        }
    }

    std::vector<Var> result;
    result.reserve(wrt.size());
    for (const Var& w : wrt) {
        const NodeId slot = static_cast<std::size_t>(w.id_) < adjoint.size() ? adjoint[static_cast<std::size_t>(w.id_)]
                                                                             : no_node;
        if (slot == no_node) {
            result.push_back(constant(Matrix::Zero(val(w).rows(), val(w).cols())));
        } else {
            result.emplace_back(Var(this, slot));
        }
    }
    return result;
}

// Operator sugar. `*` is elementwise; use matmul() for matrix products.
inline Var operator+(Var a, Var b) { return a.tape()->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape()->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape()->mul(a, b); }
inline Var operator-(Var a) { return a.tape()->neg(a); }
inline Var operator*(double c, Var a) { return a.tape()->scale(a, c); }
inline Var operator*(Var a, double c) { return a.tape()->scale(a, c); }
inline Var operator+(Var a, double c) { return a.tape()->add_scalar(a, c); }
inline Var operator+(double c, Var a) { return a.tape()->add_scalar(a, c); }
inline Var operator-(Var a, double c) { return a.tape()->add_scalar(a, -c); }

inline Var matmul(Var a, Var b) { return a.tape()->matmul(a, b); }
inline Var transpose(Var a) { return a.tape()->transpose(a); }
inline Var sum(Var a) { return a.tape()->sum(a); }
inline Var sum_rows(Var a) { return a.tape()->sum_rows(a); }
inline Var sum_cols(Var a) { return a.tape()->sum_cols(a); }
inline Var broadcast_rows(Var a, Index rows) { return a.tape()->broadcast_rows(a, rows); }
inline Var broadcast_cols(Var a, Index cols) { return a.tape()->broadcast_cols(a, cols); }
inline Var tanh(Var a) { return a.tape()->tanh(a); }
inline Var relu(Var a) { return a.tape()->relu(a); }
inline Var sigmoid(Var a) { return a.tape()->sigmoid(a); }
inline Var softplus(Var a) { return a.tape()->softplus(a); }
inline Var sin(Var a) { return a.tape()->sin(a); }
inline Var cos(Var a) { return a.tape()->cos(a); }
inline Var exp(Var a) { return a.tape()->exp(a); }
inline Var log(Var a) { return a.tape()->log(a); }
inline Var reciprocal(Var a) { return a.tape()->reciprocal(a); }

// X (n x c) + row vector b (1 x c), broadcast over rows.
inline Var add_row(Var x, Var b) { return x + broadcast_rows(b, x.rows()); }

inline Var mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    return sum(a) * (1.0 / n);
}

// Mean over rows of log-sum-exp(logits) - <logits, onehot>. The per-row max
// shift is a constant; log-sum-exp is shift invariant, so derivatives of all
// orders are unaffected.
inline Var softmax_cross_entropy(Var logits, const Matrix& onehot) {
    Tape& t = *logits.tape();
    const Matrix& z = logits.value();
    if (z.rows() != onehot.rows() || z.cols() != onehot.cols()) {
        throw ContractViolation("softmax_cross_entropy: logits and labels differ in shape");
    }
    const Index n = z.rows();
    const Index c = z.cols();
    Matrix shift = z.rowwise().maxCoeff();
    Var shift_col = t.constant(shift);
    Var shifted = logits - broadcast_cols(shift_col, c);
    Var lse = log(sum_cols(exp(shifted))) + shift_col;
    Var picked = sum_cols(logits * t.constant(onehot));
    return sum(lse - picked) * (1.0 / static_cast<double>(n));
}

inline Var mse(Var prediction, const Matrix& target) {
    Tape& t = *prediction.tape();
    Var diff = prediction - t.constant(target);
    return mean(diff * diff);
}

}  // namespace adahessian::ad
