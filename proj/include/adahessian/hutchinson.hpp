#pragma once

// Stochastic estimation of the Hessian diagonal, D = E[z * (H z)] for
// Rademacher z, using exact HVPs from the problem.

#include "adahessian/problem.hpp"
#include "adahessian/random.hpp"

#include <cstdint>
#include <vector>

namespace adahessian {

struct HutchinsonConfig {
    int samples_per_estimate = 1;
    // Estimate every `frequency` iterations once warmup is over.
    int frequency = 1;
    // Estimate on every iteration t <= warmup_steps.
    int warmup_steps = 0;
    std::uint64_t seed = 0;

    void validate() const {
        require(samples_per_estimate >= 1, "hutchinson: samples_per_estimate must be >= 1");
        require(frequency >= 1, "hutchinson: frequency must be >= 1");
        require(warmup_steps >= 0, "hutchinson: warmup_steps must be >= 0");
    }
};

struct DiagEstimate {
    ParamVector values;  // may contain negative entries; never clamped
    std::int64_t iteration_computed = 0;
};

// i.i.d. +-1 entries, one raw engine bit per coordinate.
inline ParamVector rademacher(Index d, Rng& rng) {
    require(d >= 1, "rademacher: d must be >= 1");
    ParamVector z(d);
    std::uint64_t bits = 0;
    for (Index i = 0; i < d; ++i) {
        if (i % 64 == 0) bits = rng.next_u64();
        z(i) = (bits & 1u) ? 1.0 : -1.0;
        bits >>= 1;
    }
    return z;
}

// The probe stream for iteration t of a run seeded with cfg.seed.
inline Rng probe_stream(const HutchinsonConfig& cfg, std::uint64_t t) {
    return make_stream(cfg.seed, StreamTag::probe, t);
}

inline bool should_compute(std::int64_t t, const HutchinsonConfig& cfg) {
    require(t >= 1, "should_compute: t must be >= 1");
    cfg.validate();
    if (t <= cfg.warmup_steps) return true;
    return (t - cfg.warmup_steps - 1) % cfg.frequency == 0;
}

// Mean of z_j * (H z_j) over the given probes.
inline ParamVector combine_probes(std::span<const ParamVector> probes, std::span<const ParamVector> hvps) {
    require(!probes.empty() && probes.size() == hvps.size(), "combine_probes: need one HVP per probe");
    ParamVector d = probes[0].cwiseProduct(hvps[0]);
    for (std::size_t j = 1; j < probes.size(); ++j) d += probes[j].cwiseProduct(hvps[j]);
    return d / static_cast<double>(probes.size());
}

inline std::vector<ParamVector> draw_probes(Index d, int count, Rng& rng) {
    std::vector<ParamVector> probes;
    probes.reserve(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) probes.push_back(rademacher(d, rng));
    return probes;
}

// Diagonal estimate and gradient from one shared evaluation of the problem.
struct CurvatureSample {
    double loss = 0.0;
    ParamVector gradient;
    DiagEstimate diag;
};

inline CurvatureSample sample_curvature(const DifferentiableProblem& problem, const ParamVector& theta,
                                        const Batch& batch, const HutchinsonConfig& cfg, Rng& rng,
                                        std::int64_t iteration = 0) {
    cfg.validate();
    const auto probes = draw_probes(problem.dim(), cfg.samples_per_estimate, rng);
    SecondOrderEval eval = problem.second_order(theta, probes, batch);
    return CurvatureSample{eval.loss, std::move(eval.gradient),
                           DiagEstimate{combine_probes(probes, eval.hvps), iteration}};
}

inline DiagEstimate estimate_diag(const DifferentiableProblem& problem, const ParamVector& theta, const Batch& batch,
                                  const HutchinsonConfig& cfg, Rng& rng, std::int64_t iteration = 0) {
    return sample_curvature(problem, theta, batch, cfg, rng, iteration).diag;
}

}  // namespace adahessian
