#pragma once

// The property suite behind `verify`. Each property runs in isolation; an
// exception counts as a failure of that property only.

#include "adahessian/harness/experiments.hpp"
#include "adahessian/optim/baselines.hpp"
#include "adahessian/oracle.hpp"
#include "adahessian/problems/registry.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace adahessian::harness {

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct VerifyReport {
    std::vector<PropertyResult> properties;

    [[nodiscard]] bool all_passed() const {
        return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.passed; });
    }

    [[nodiscard]] const PropertyResult* find(const std::string& name) const {
        for (const auto& p : properties)
            if (p.name == name) return &p;
        return nullptr;
    }

    [[nodiscard]] nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["schema"] = "adahessian.verify";
        j["version"] = 1;
        j["passed"] = all_passed();
        auto arr = nlohmann::ordered_json::array();
        for (const auto& p : properties) {
            arr.push_back({{"name", p.name}, {"passed", p.passed}, {"detail", p.detail}, {"seconds", p.seconds}});
        }
        j["properties"] = arr;
        return j;
    }
};

struct VerifyOptions {
    std::uint64_t seed = 1;
};

namespace verify_detail {

struct Outcome {
    bool passed = true;
    std::ostringstream detail;

    void fail_if(bool bad, const std::string& what) {
        if (bad && passed) detail << what;
        if (bad) passed = false;
    }
};

inline PropertyResult timed(const std::string& name, const std::function<void(Outcome&)>& body) {
    PropertyResult r;
    r.name = name;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(o);
        r.passed = o.passed;
        r.detail = o.detail.str();
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (r.passed && r.detail.empty()) r.detail = "ok";
    return r;
}

inline ParamVector normal_vector(Index d, Rng& rng, double scale = 1.0) {
    ParamVector v(d);
    for (Index i = 0; i < d; ++i) v(i) = scale * rng.normal();
    return v;
}

inline Eigen::MatrixXd symmetric_matrix(Index d, Rng& rng) {
    Eigen::MatrixXd M(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) M(i, j) = rng.normal();
    return 0.5 * (M + M.transpose());
}

inline double relative(const ParamVector& a, const ParamVector& b) {
    const double scale = std::max({a.norm(), b.norm(), 1e-12});
    return (a - b).norm() / scale;
}

}  // namespace verify_detail

// HVP fidelity against central differences of the gradient on every
// registered problem, plus the symmetry probe u.Hz == z.Hu. The small FD step
// keeps ReLU kinks from being crossed at these points.
inline PropertyResult verify_hvp_vs_fd(std::uint64_t seed, int pairs = 20) {
    using namespace verify_detail;
    return timed("hvp_vs_finite_differences", [&](Outcome& o) {
        double worst = 0.0;
        double worst_sym = 0.0;
        for (std::size_t idx = 0; idx < problem_names().size(); ++idx) {
            const auto& name = problem_names()[idx];
            auto p = make_problem(name);
            Rng rng = make_stream(seed, StreamTag::verify, 100 + idx);
            const ParamVector base = p->initial_point(seed);
            for (int i = 0; i < pairs; ++i) {
                const ParamVector theta = base + normal_vector(p->dim(), rng, 0.1);
                const ParamVector z = normal_vector(p->dim(), rng);
                const ParamVector u = normal_vector(p->dim(), rng);
                const ParamVector hz = p->hvp(theta, z);
                const double err = relative(hz, oracle::fd_hvp(*p, theta, z, 1e-6));
                worst = std::max(worst, err);
                o.fail_if(err > 1e-5, name + ": hvp vs FD relative error " + std::to_string(err));
                const double uhz = u.dot(hz);
                const double zhu = z.dot(p->hvp(theta, u));
                const double sym = std::abs(uhz - zhu) / std::max(1.0, std::abs(uhz));
                worst_sym = std::max(worst_sym, sym);
                o.fail_if(sym > 1e-8, name + ": hvp asymmetry " + std::to_string(sym));
            }
        }
        if (o.passed) o.detail << "worst relative error " << worst << ", worst asymmetry " << worst_sym;
    });
}

inline PropertyResult verify_gradient_vs_fd(std::uint64_t seed, int points = 5) {
    using namespace verify_detail;
    return timed("gradient_vs_finite_differences", [&](Outcome& o) {
        double worst = 0.0;
        for (std::size_t idx = 0; idx < problem_names().size(); ++idx) {
            const auto& name = problem_names()[idx];
            auto p = make_problem(name);
            Rng rng = make_stream(seed, StreamTag::verify, 200 + idx);
            for (int i = 0; i < points; ++i) {
                const ParamVector theta = p->initial_point(seed) + normal_vector(p->dim(), rng, 0.1);
                const double err = relative(p->gradient(theta), oracle::fd_gradient(*p, theta, 1e-6));
                worst = std::max(worst, err);
                o.fail_if(err > 1e-6, name + ": gradient vs FD relative error " + std::to_string(err));
            }
        }
        if (o.passed) o.detail << "worst relative error " << worst;
    });
}

// All-sign-vector averages of z * Hz equal diag(H) through the problem's HVP.
inline PropertyResult verify_hutchinson_enumeration(std::uint64_t seed, int matrices = 50) {
    using namespace verify_detail;
    return timed("hutchinson_unbiased", [&](Outcome& o) {
        Rng rng = make_stream(seed, StreamTag::verify, 3);
        double worst = 0.0;
        double d12_seconds = 0.0;
        for (int m = 0; m < matrices; ++m) {
            const Index d = 1 + m % oracle::max_enumeration_dim;
            const Eigen::MatrixXd H = symmetric_matrix(d, rng);
            const QuadraticProblem q("enum", H);
            const auto start = std::chrono::steady_clock::now();
            std::vector<ParamVector> probes;
            for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
                ParamVector z(d);
                for (Index i = 0; i < d; ++i) z(i) = ((mask >> i) & 1u) ? 1.0 : -1.0;
                probes.push_back(std::move(z));
            }
            const auto eval = q.second_order(normal_vector(d, rng), probes);
            const ParamVector est = combine_probes(probes, eval.hvps);
            if (d == oracle::max_enumeration_dim) {
                d12_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            }
            const double err = (est - H.diagonal()).cwiseAbs().maxCoeff();
            worst = std::max(worst, err);
            o.fail_if(err > 1e-12, "d=" + std::to_string(d) + ": enumeration error " + std::to_string(err));
        }
        o.fail_if(d12_seconds > 10.0, "d=12 enumeration took " + std::to_string(d12_seconds) + " s");
        if (o.passed) o.detail << "worst error " << worst << ", d=12 enumeration " << d12_seconds << " s";
    });
}

inline PropertyResult verify_hutchinson_diagonal_exact(std::uint64_t seed) {
    using namespace verify_detail;
    return timed("hutchinson_diagonal_exact", [&](Outcome& o) {
        Rng rng = make_stream(seed, StreamTag::verify, 4);
        for (int m = 0; m < 20; ++m) {
            const Index d = 1 + static_cast<Index>(rng.below(30));
            const ParamVector diag = normal_vector(d, rng, 5.0);
            const QuadraticProblem q("diag", Eigen::MatrixXd(diag.asDiagonal()));
            HutchinsonConfig cfg;
            const auto est = estimate_diag(q, ParamVector::Zero(d), Batch::full(), cfg, rng);
            o.fail_if(est.values != diag, "single-sample estimate differs from the diagonal at d=" + std::to_string(d));
        }
    });
}

// Descent inequality at eta = alpha^k / beta. The diagonal and block-averaged
// directions are produced by one step of the optimizer under test from a
// fresh state, then compared with the independent reference.
template <typename Ada = AdaHessian>
PropertyResult verify_descent(std::uint64_t seed, oracle::Preconditioner kind, int instances = 100) {
    using namespace verify_detail;
    const char* names[] = {"descent_full_hessian", "descent_diagonal", "descent_block_diagonal"};
    return timed(names[static_cast<int>(kind)], [&](Outcome& o) {
        Rng rng = make_stream(seed, StreamTag::verify, 10 + static_cast<std::uint64_t>(kind));
        double min_slack = std::numeric_limits<double>::infinity();
        int checks = 0;
        for (int inst = 0; inst < instances; ++inst) {
            const Index d = 2 + static_cast<Index>(rng.below(19));
            const double cond = std::pow(10.0, rng.uniform(0.0, 3.0));
            const auto q = make_random_spd_quadratic(d, cond, rng.next_u64());
            std::vector<Index> blocks{1};
            if (kind == oracle::Preconditioner::block_diagonal) blocks = {1, 2, std::max<Index>(1, d / 2)};
            for (double k : {0.0, 0.5, 1.0}) {
                for (Index b : blocks) {
                    const ParamVector w = normal_vector(d, rng, 2.0);
                    const auto ref = oracle::reference_descent_check(q, w, k, kind, b);
                    ++checks;
                    const double g2 = q.gradient(w).squaredNorm();
                    o.fail_if(!ref.precondition_ok, "preconditioner outside [alpha, beta]");
                    o.fail_if(!ref.passed, "reference inequality violated (d=" + std::to_string(d) +
                                               ", k=" + std::to_string(k) + ")");
                    min_slack = std::min(min_slack, ref.slack / std::max(1.0, g2));
                    if (kind == oracle::Preconditioner::full_hessian) continue;

                    AdaHessianOptions opts;
                    opts.lr = std::pow(q.alpha(), k) / q.beta();
                    opts.hessian_power = k;
                    opts.eps = 0.0;
                    Ada opt(d, opts);
                    const ParamVector ds = spatial_average(q.matrix().diagonal(), BlockSpec::uniform(d, b));
                    const ParamVector next = opt.step(w, q.gradient(w), &ds);
                    const double decrease = q.value(next) - q.value(w);
                    o.fail_if(decrease - ref.bound > 1e-12 * std::max(1.0, std::abs(q.value(w))) +
                                                         1e-12 * std::max(1.0, g2),
                              "optimizer step violates the bound (d=" + std::to_string(d) +
                                  ", k=" + std::to_string(k) + ", b=" + std::to_string(b) + ")");
                    o.fail_if(std::abs(decrease - ref.decrease) > 1e-8 * std::max(1.0, std::abs(q.value(w))),
                              "optimizer step differs from the reference direction (d=" + std::to_string(d) + ")");
                }
            }
        }
        if (o.passed) o.detail << checks << " checks, min scaled slack " << min_slack;
    });
}

// Curvature := gradient turns AdaHessian into Adam.
template <typename Ada = AdaHessian>
PropertyResult verify_adam_reduction(std::uint64_t seed, int seeds = 10, int steps = 200) {
    using namespace verify_detail;
    return timed("adam_reduction", [&](Outcome& o) {
        double worst = 0.0;
        for (int s = 0; s < seeds; ++s) {
            Rng rng = make_stream(seed + static_cast<std::uint64_t>(s), StreamTag::verify, 20);
            const Index d = 1 + static_cast<Index>(rng.below(10));
            AdaHessianOptions ao;
            ao.lr = 0.01;
            BaselineOptions bo;
            bo.lr = ao.lr;
            Ada ada(d, ao);
            BaselineOptimizer adam(BaselineKind::adam, d, bo);
            ParamVector ta = normal_vector(d, rng);
            ParamVector tb = ta;
            for (int t = 0; t < steps; ++t) {
                const ParamVector g = normal_vector(d, rng);
                ta = ada.step(ta, g, &g);
                tb = adam.step(tb, g, nullptr);
                const double err = (ta - tb).cwiseAbs().maxCoeff();
                worst = std::max(worst, err);
            }
        }
        o.fail_if(worst > 1e-12, "max deviation from Adam " + std::to_string(worst));
        if (o.passed) o.detail << "max deviation " << worst;
    });
}

// Recursive moment updates agree with the explicit weighted sums.
template <typename Ada = AdaHessian>
PropertyResult verify_reference_trajectory(std::uint64_t seed) {
    using namespace verify_detail;
    return timed("reference_trajectory", [&](Outcome& o) {
        Rng rng = make_stream(seed, StreamTag::verify, 30);
        double worst = 0.0;
        for (double k : {0.0, 0.5, 1.0}) {
            const Index d = 5;
            AdaHessianOptions opts;
            opts.lr = 0.05;
            opts.beta1 = 0.85;
            opts.beta2 = 0.97;
            opts.hessian_power = k;
            opts.eps = 1e-6;
            std::vector<ParamVector> gs, ds;
            for (int t = 0; t < 50; ++t) {
                gs.push_back(normal_vector(d, rng));
                ds.push_back(normal_vector(d, rng, 2.0));
            }
            const ParamVector theta0 = normal_vector(d, rng);
            const auto ref =
                oracle::reference_trajectory(theta0, gs, ds, opts.lr, opts.beta1, opts.beta2, k, opts.eps);
            Ada opt(d, opts);
            ParamVector theta = theta0;
            for (std::size_t t = 0; t < gs.size(); ++t) {
                theta = opt.step(theta, gs[t], &ds[t]);
                worst = std::max(worst, relative(theta, ref[t]));
            }
        }
        o.fail_if(worst > 1e-10, "max relative deviation " + std::to_string(worst));
        if (o.passed) o.detail << "max relative deviation " << worst;
    });
}

template <typename Ada = AdaHessian>
PropertyResult verify_fig1_one_step() {
    return verify_detail::timed("fig1_one_step", [&](verify_detail::Outcome& o) {
        const ParamVector theta = fig1_one_step<Ada>();
        o.fail_if(!(theta.norm() <= 1e-12), "|theta_1| = " + std::to_string(theta.norm()));
        if (o.passed) o.detail << "|theta_1| = " << theta.norm();
    });
}

// Momentum on must converge: |x| < 1e-2 from some t <= 50 onwards, not just a
// single crossing on the way into a ripple minimum.
template <typename Ada = AdaHessian>
PropertyResult verify_momentum_rescue() {
    return verify_detail::timed("hessian_momentum_rescue", [&](verify_detail::Outcome& o) {
        const auto on = noisy_parabola_run<Ada>(noisy_parabola_lr, true, 1000);
        const auto off = noisy_parabola_run<Ada>(noisy_parabola_lr, false, 1000);
        const auto settled = on.settled_below(1e-2);
        o.fail_if(!settled || *settled > 50, "momentum on did not settle below |x| = 1e-2 within 50 iterations");
        o.fail_if(off.final_abs() <= 5e-2, "momentum off reached |x| = " + std::to_string(off.final_abs()));
        if (o.passed) {
            const auto fine = on.settled_below(1e-3);
            o.detail << "eta=" << noisy_parabola_lr << "; momentum on: |x| < 1e-2 from t=" << *settled
                     << ", < 1e-3 from t=" << (fine ? std::to_string(*fine) : std::string("never"))
                     << ", |x_1000| = " << on.final_abs() << "; momentum off: |x_1000| = " << off.final_abs();
        }
    });
}

inline PropertyResult verify_spatial_average(std::uint64_t seed) {
    using namespace verify_detail;
    return timed("spatial_average", [&](Outcome& o) {
        Rng rng = make_stream(seed, StreamTag::verify, 40);
        for (int trial = 0; trial < 100; ++trial) {
            const Index d = 1 + static_cast<Index>(rng.below(64));
            const Index b = 1 + static_cast<Index>(rng.below(10));
            const ParamVector D = normal_vector(d, rng);
            const double err =
                (spatial_average(D, BlockSpec::uniform(d, b)) - oracle::block_means(D, b)).cwiseAbs().maxCoeff();
            o.fail_if(err > 1e-14, "block average differs from the reference by " + std::to_string(err));
        }
    });
}

template <typename Ada = AdaHessian>
VerifyReport run_verification(const VerifyOptions& options = {}) {
    const auto s = options.seed;
    VerifyReport r;
    r.properties.push_back(verify_gradient_vs_fd(s));
    r.properties.push_back(verify_hvp_vs_fd(s));
    r.properties.push_back(verify_hutchinson_enumeration(s));
    r.properties.push_back(verify_hutchinson_diagonal_exact(s));
    r.properties.push_back(verify_spatial_average(s));
    r.properties.push_back(verify_descent<Ada>(s, oracle::Preconditioner::full_hessian));
    r.properties.push_back(verify_descent<Ada>(s, oracle::Preconditioner::diagonal));
    r.properties.push_back(verify_descent<Ada>(s, oracle::Preconditioner::block_diagonal));
    r.properties.push_back(verify_adam_reduction<Ada>(s));
    r.properties.push_back(verify_reference_trajectory<Ada>(s));
    r.properties.push_back(verify_fig1_one_step<Ada>());
    r.properties.push_back(verify_momentum_rescue<Ada>());
    return r;
}

}  // namespace adahessian::harness
