#pragma once

#include "adahessian/random.hpp"
#include "adahessian/tape.hpp"
#include "adahessian/types.hpp"

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace adahessian {

// One parameter tensor. Its entries occupy a contiguous, row-major range of
// the flat ParamVector.
struct ParamGroup {
    std::string name;
    Index rows = 1;
    Index cols = 1;

    [[nodiscard]] Index size() const { return rows * cols; }
};

// Sample indices for one minibatch. Empty means the full dataset (and is the
// only batch analytic problems accept).
struct Batch {
    std::vector<Index> indices;

    [[nodiscard]] bool is_full() const { return indices.empty(); }
    static Batch full() { return {}; }
};

struct SecondOrderEval {
    double loss = 0.0;
    ParamVector gradient;
    std::vector<ParamVector> hvps;  // one per probe, same order
};

// A scalar objective with exact gradients and Hessian-vector products.
//
// Public entry points validate dimensions and finiteness, then dispatch to the
// do_* hooks. The default hooks record the loss on a Tape and differentiate it;
// problems with closed forms may override them, and the tape_* functions below
// stay available as the reference path.
class DifferentiableProblem {
public:
    virtual ~DifferentiableProblem() = default;

    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual const std::vector<ParamGroup>& layout() const = 0;
    [[nodiscard]] virtual ParamVector initial_point(std::uint64_t seed) const = 0;

    // Number of data points; 0 for deterministic objectives without data.
    [[nodiscard]] virtual Index num_samples() const { return 0; }

    // Records the objective for `batch` on `tape`; params follow layout().
    virtual ad::Var record_loss(ad::Tape& tape, std::span<const ad::Var> params, const Batch& batch) const = 0;

    [[nodiscard]] Index dim() const {
        Index d = 0;
        for (const auto& g : layout()) d += g.size();
        return d;
    }

    // Deterministic per (seed, t). batch_size 0 or >= n selects the full batch.
    [[nodiscard]] Batch sample_batch(std::uint64_t seed, std::uint64_t t, Index batch_size) const {
        const Index n = num_samples();
        if (n == 0 || batch_size <= 0 || batch_size >= n) return Batch::full();
        Rng rng = make_stream(seed, StreamTag::batch, t);
        std::vector<Index> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), Index{0});
        // Partial Fisher-Yates: the first batch_size slots are the sample.
        for (Index i = 0; i < batch_size; ++i) {
            const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
        }
        perm.resize(static_cast<std::size_t>(batch_size));
        return Batch{std::move(perm)};
    }

    [[nodiscard]] double value(const ParamVector& theta, const Batch& batch = Batch::full()) const {
        check_input(theta, batch);
        const double v = do_value(theta, batch);
        if (!std::isfinite(v)) throw NumericError(name() + ": non-finite loss");
        return v;
    }

    [[nodiscard]] ParamVector gradient(const ParamVector& theta, const Batch& batch = Batch::full()) const {
        check_input(theta, batch);
        ParamVector g = do_gradient(theta, batch);
        check_finite(g, name() + " gradient");
        return g;
    }

    [[nodiscard]] ParamVector hvp(const ParamVector& theta, const ParamVector& z,
                                  const Batch& batch = Batch::full()) const {
        check_input(theta, batch);
        require_same_length(theta, z, "hvp probe");
        ParamVector hz = do_hvp(theta, z, batch);
        check_finite(hz, name() + " hvp");
        return hz;
    }

    // Loss, gradient and one HVP per probe, all on the same batch.
    [[nodiscard]] SecondOrderEval second_order(const ParamVector& theta, std::span<const ParamVector> probes,
                                               const Batch& batch = Batch::full()) const {
        check_input(theta, batch);
        for (const auto& z : probes) require_same_length(theta, z, "hvp probe");
        SecondOrderEval out = do_second_order(theta, probes, batch);
        if (!std::isfinite(out.loss)) throw NumericError(name() + ": non-finite loss");
        check_finite(out.gradient, name() + " gradient");
        for (const auto& hz : out.hvps) check_finite(hz, name() + " hvp");
        return out;
    }

protected:
    virtual double do_value(const ParamVector& theta, const Batch& batch) const;
    virtual ParamVector do_gradient(const ParamVector& theta, const Batch& batch) const;
    virtual ParamVector do_hvp(const ParamVector& theta, const ParamVector& z, const Batch& batch) const;
    virtual SecondOrderEval do_second_order(const ParamVector& theta, std::span<const ParamVector> probes,
                                            const Batch& batch) const;

    void check_input(const ParamVector& theta, const Batch& batch) const {
        if (theta.size() != dim()) {
            throw ContractViolation(name() + ": expected " + std::to_string(dim()) + " parameters, got " +
                                    std::to_string(theta.size()));
        }
        const Index n = num_samples();
        if (n == 0 && !batch.is_full()) throw ContractViolation(name() + ": problem has no data to batch over");
        for (Index i : batch.indices) {
            if (i < 0 || i >= n) throw ContractViolation(name() + ": batch index out of range");
        }
    }
};

// ---------------------------------------------------------------------------
// Flat <-> per-group conversion

inline std::vector<Matrix> unflatten(const std::vector<ParamGroup>& layout, const ParamVector& flat) {
    std::vector<Matrix> out;
    out.reserve(layout.size());
    Index offset = 0;
    for (const auto& g : layout) {
        out.emplace_back(Eigen::Map<const Matrix>(flat.data() + offset, g.rows, g.cols));
        offset += g.size();
    }
    return out;
}

inline ParamVector flatten(const std::vector<ParamGroup>& layout, std::span<const ad::Var> parts) {
    Index d = 0;
    for (const auto& g : layout) d += g.size();
    ParamVector flat(d);
    Index offset = 0;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const Matrix& m = parts[i].value();
        Eigen::Map<Matrix>(flat.data() + offset, layout[i].rows, layout[i].cols) = m;
        offset += layout[i].size();
    }
    return flat;
}

inline std::vector<ad::Var> make_leaves(ad::Tape& tape, const std::vector<ParamGroup>& layout,
                                        const ParamVector& theta) {
    std::vector<ad::Var> leaves;
    leaves.reserve(layout.size());
    for (auto& m : unflatten(layout, theta)) leaves.push_back(tape.leaf(std::move(m)));
    return leaves;
}

// ---------------------------------------------------------------------------
// Reference tape path. These never call the do_* overrides.

inline double tape_value(const DifferentiableProblem& p, const ParamVector& theta, const Batch& batch) {
    ad::Tape tape;
    auto leaves = make_leaves(tape, p.layout(), theta);
    return p.record_loss(tape, leaves, batch).item();
}

// One forward pass, one recorded backward pass, then one backward pass of
// sum(g * z) per probe: d(g^T z)/d theta = H z for constant z.
inline SecondOrderEval tape_second_order(const DifferentiableProblem& p, const ParamVector& theta,
                                         std::span<const ParamVector> probes, const Batch& batch) {
    const auto& layout = p.layout();
    ad::Tape tape;
    auto leaves = make_leaves(tape, layout, theta);
    ad::Var loss = p.record_loss(tape, leaves, batch);
    auto grads = tape.gradients(loss, leaves);

    SecondOrderEval out;
    out.loss = loss.item();
    out.gradient = flatten(layout, grads);
    out.hvps.reserve(probes.size());
    for (const auto& z : probes) {
        auto zs = unflatten(layout, z);
        ad::Var gz = ad::sum(grads[0] * tape.constant(std::move(zs[0])));
        for (std::size_t j = 1; j < layout.size(); ++j) {
            gz = gz + ad::sum(grads[j] * tape.constant(std::move(zs[j])));
        }
        out.hvps.push_back(flatten(layout, tape.gradients(gz, leaves)));
    }
    return out;
}

inline ParamVector tape_gradient(const DifferentiableProblem& p, const ParamVector& theta, const Batch& batch) {
    return tape_second_order(p, theta, {}, batch).gradient;
}

inline ParamVector tape_hvp(const DifferentiableProblem& p, const ParamVector& theta, const ParamVector& z,
                            const Batch& batch) {
    return tape_second_order(p, theta, std::span<const ParamVector>(&z, 1), batch).hvps.front();
}

inline double DifferentiableProblem::do_value(const ParamVector& theta, const Batch& batch) const {
    return tape_value(*this, theta, batch);
}

inline ParamVector DifferentiableProblem::do_gradient(const ParamVector& theta, const Batch& batch) const {
    return tape_gradient(*this, theta, batch);
}

inline ParamVector DifferentiableProblem::do_hvp(const ParamVector& theta, const ParamVector& z,
                                                 const Batch& batch) const {
    return tape_hvp(*this, theta, z, batch);
}

inline SecondOrderEval DifferentiableProblem::do_second_order(const ParamVector& theta,
                                                              std::span<const ParamVector> probes,
                                                              const Batch& batch) const {
    return tape_second_order(*this, theta, probes, batch);
}

// Free-function spellings of the three core operations.
inline double evaluate(const DifferentiableProblem& p, const ParamVector& theta, const Batch& batch = Batch::full()) {
    return p.value(theta, batch);
}
inline ParamVector gradient(const DifferentiableProblem& p, const ParamVector& theta,
                            const Batch& batch = Batch::full()) {
    return p.gradient(theta, batch);
}
inline ParamVector hvp(const DifferentiableProblem& p, const ParamVector& theta, const ParamVector& z,
                       const Batch& batch = Batch::full()) {
    return p.hvp(theta, z, batch);
}

}  // namespace adahessian
