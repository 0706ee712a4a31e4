#pragma once

// Small fixed experiments shared by `verify`, the demos and the acceptance
// suite. Templated on the AdaHessian implementation so a modified copy can be
// pushed through the same checks.

#include "adahessian/hutchinson.hpp"
#include "adahessian/optim/adahessian.hpp"
#include "adahessian/optim/blocks.hpp"
#include "adahessian/problems/noisy_parabola.hpp"
#include "adahessian/problems/quadratic.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace adahessian::harness {

// One AdaHessian step on f = 10x^2 + y^2 from (1, 1) with the diagonal taken
// from the Hutchinson estimator (exact here: the Hessian is diagonal).
template <typename Ada = AdaHessian>
ParamVector fig1_one_step(double lr = 1.0, double k = 1.0, double eps = 0.0, std::uint64_t seed = 0) {
    const auto q = make_fig1_quadratic();
    AdaHessianOptions o;
    o.lr = lr;
    o.hessian_power = k;
    o.eps = eps;
    Ada opt(q.dim(), o);
    HutchinsonConfig cfg;
    cfg.seed = seed;
    Rng rng = probe_stream(cfg, 1);
    const ParamVector theta = q.initial_point(seed);
    auto cs = sample_curvature(q, theta, Batch::full(), cfg, rng, 1);
    return opt.step(theta, cs.gradient, &cs.diag.values);
}

struct ParabolaRun {
    std::vector<double> x;  // x_0 .. x_T

    [[nodiscard]] double final_abs() const { return std::abs(x.back()); }

    // First t from which |x| stays below `threshold` through the end of the run.
    [[nodiscard]] std::optional<std::int64_t> settled_below(double threshold) const {
        std::optional<std::int64_t> t;
        for (auto i = static_cast<std::int64_t>(x.size()) - 1;
             i >= 0 && std::abs(x[static_cast<std::size_t>(i)]) < threshold; --i) {
            t = i;
        }
        return t;
    }
};

// AdaHessian on the noisy parabola with or without Hessian momentum.
template <typename Ada = AdaHessian>
ParabolaRun noisy_parabola_run(double lr, bool momentum, std::int64_t iters, double beta2 = 0.98, double x0 = 1.0,
                               std::uint64_t seed = 0) {
    const NoisyParabola p(x0);
    AdaHessianOptions o;
    o.lr = lr;
    o.beta2 = beta2;
    o.hessian_momentum = momentum;
    Ada opt(1, o);
    HutchinsonConfig cfg;
    cfg.seed = seed;
    ParabolaRun run;
    ParamVector x = p.initial_point(seed);
    run.x.push_back(x(0));
    for (std::int64_t t = 1; t <= iters; ++t) {
        Rng rng = probe_stream(cfg, static_cast<std::uint64_t>(t));
        auto cs = sample_curvature(p, x, Batch::full(), cfg, rng, t);
        x = opt.step(x, cs.gradient, &cs.diag.values);
        run.x.push_back(x(0));
    }
    return run;
}

// Learning rate used for the momentum comparison; see README.
inline constexpr double noisy_parabola_lr = 1.1;

}  // namespace adahessian::harness
