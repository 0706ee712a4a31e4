#pragma once

#include "adahessian/problem.hpp"

#include <cmath>
#include <numbers>

namespace adahessian {

// f(x) = x^2 + 0.1 x sin(20 pi x): a parabola whose local curvature is
// dominated by the sinusoidal ripple.
class NoisyParabola final : public DifferentiableProblem {
public:
    static constexpr double amplitude = 0.1;
    static constexpr double frequency = 20.0 * std::numbers::pi;

    explicit NoisyParabola(double x0 = 1.0) : x0_(x0) {}

    [[nodiscard]] std::string name() const override { return "noisy-parabola"; }
    [[nodiscard]] const std::vector<ParamGroup>& layout() const override { return layout_; }
    [[nodiscard]] ParamVector initial_point(std::uint64_t) const override { return ParamVector::Constant(1, x0_); }

    static double f(double x) { return x * x + amplitude * x * std::sin(frequency * x); }
    static double df(double x) {
        return 2.0 * x + amplitude * std::sin(frequency * x) + amplitude * frequency * x * std::cos(frequency * x);
    }
    static double d2f(double x) {
        return 2.0 + 2.0 * amplitude * frequency * std::cos(frequency * x) -
               amplitude * frequency * frequency * x * std::sin(frequency * x);
    }

    ad::Var record_loss(ad::Tape&, std::span<const ad::Var> params, const Batch&) const override {
        const ad::Var& x = params[0];
        return x * x + amplitude * (x * ad::sin(x * frequency));
    }

protected:
    double do_value(const ParamVector& x, const Batch&) const override { return f(x(0)); }
    ParamVector do_gradient(const ParamVector& x, const Batch&) const override {
        return ParamVector::Constant(1, df(x(0)));
    }
    ParamVector do_hvp(const ParamVector& x, const ParamVector& z, const Batch&) const override {
        return ParamVector::Constant(1, d2f(x(0)) * z(0));
    }
    SecondOrderEval do_second_order(const ParamVector& x, std::span<const ParamVector> probes,
                                    const Batch& batch) const override {
        SecondOrderEval out{f(x(0)), do_gradient(x, batch), {}};
        for (const auto& z : probes) out.hvps.push_back(do_hvp(x, z, batch));
        return out;
    }

private:
    double x0_;
    std::vector<ParamGroup> layout_{ParamGroup{"x", 1, 1}};
};

inline NoisyParabola make_noisy_parabola(double x0 = 1.0) { return NoisyParabola(x0); }

}  // namespace adahessian
