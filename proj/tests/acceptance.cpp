// Acceptance checks: one PASS/FAIL line per criterion, exit status 0 only when
// all pass. Usage: acceptance [--out DIR]

#include "adahessian/harness/report.hpp"
#include "adahessian/harness/sweep.hpp"
#include "adahessian/harness/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace adahessian;
using namespace adahessian::harness;

namespace {

struct Criterion {
    int id;
    std::string title;
    double budget_seconds;
    std::function<PropertyResult()> body;
};

PropertyResult combine(const std::string& name, const std::vector<PropertyResult>& parts) {
    PropertyResult r;
    r.name = name;
    r.passed = true;
    std::ostringstream detail;
    for (const auto& p : parts) {
        r.passed = r.passed && p.passed;
        r.seconds += p.seconds;
        if (detail.tellp() > 0) detail << "; ";
        detail << p.name << ": " << p.detail;
    }
    r.detail = detail.str();
    return r;
}

PropertyResult check(const std::string& name, const std::function<void(verify_detail::Outcome&)>& body) {
    return verify_detail::timed(name, body);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double median(std::vector<double> v) { return median_of(v); }

// Cost ratio per frequency on tiny-MLP. Repeats are interleaved across
// frequencies so slow drifts in machine load hit every frequency alike.
PropertyResult frequency_trend(const fs::path& out) {
    return check("frequency_trend", [&](verify_detail::Outcome& o) {
        constexpr int repeats = 3;
        const std::vector<int> freqs{1, 2, 3, 4, 5};
        std::map<int, std::vector<double>> ratios;
        std::map<int, double> final_loss;
        for (int rep = 0; rep < repeats; ++rep) {
            for (int f : freqs) {
                RunConfig cfg;
                cfg.problem = "tiny-mlp";
                cfg.problem_params = "spread=0.5";
                cfg.optimizer = "adahessian";
                cfg.hessian_freq = f;
                cfg.iters = 3010;
                cfg.out_dir = (out / "frequency").string();
                const auto res = run_experiment(cfg, RunOptions{false});
                o.fail_if(res.summary.status != "ok", "f=" + std::to_string(f) + ": " + res.summary.message);
                o.fail_if(!res.summary.cost_ratio, "f=" + std::to_string(f) + ": no timing");
                if (!res.summary.cost_ratio) return;
                ratios[f].push_back(*res.summary.cost_ratio);
                final_loss[f] = res.summary.final_loss;
            }
        }
        std::vector<double> r, losses;
        for (int f : freqs) {
            r.push_back(median(ratios[f]));
            losses.push_back(final_loss[f]);
        }
        for (std::size_t i = 1; i < r.size(); ++i) {
            o.fail_if(!(r[i] < r[i - 1]), "ratio not strictly decreasing at f=" + std::to_string(freqs[i]));
        }
        const double excess1 = r.front() - 1.0;
        const double excess5 = r.back() - 1.0;
        o.fail_if(!(excess5 <= 0.6 * excess1), "f=5 excess " + std::to_string(excess5) + " > 60% of f=1 excess " +
                                                    std::to_string(excess1));
        const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
        const double spread = (*hi - *lo) / *lo;
        o.fail_if(!(spread <= 0.2), "final loss varies by " + std::to_string(spread));
        o.detail << (o.passed ? "" : "; ") << "ratios";
        for (std::size_t i = 0; i < r.size(); ++i) o.detail << " f" << freqs[i] << "=" << r[i];
        o.detail << ", f5/f1 excess " << excess5 / excess1 << ", final loss";
        for (double l : losses) o.detail << " " << l;
        o.detail << " (spread " << spread << ")";
    });
}

// Each optimizer's base lr is tuned on a coarse log grid, then the sweep runs
// the multiplier grid around it.
PropertyResult lr_robustness(const fs::path& out) {
    return check("lr_robustness", [&](verify_detail::Outcome& o) {
        RunConfig base;
        base.problem = "logreg";
        base.iters = 60;
        base.sgd_reference = false;
        base.out_dir = out.string();

        SweepSpec spec;
        spec.base = base;
        spec.optimizers = optimizer_names();
        spec.lr_multipliers = {0.5, 1.0, 2.0, 4.0, 10.0};
        spec.block_sizes = {1};
        spec.hessian_freqs = {1};
        spec.seeds = {0, 1, 2};
        spec.jobs = 4;
        spec.name = "lr_robustness";

        const std::vector<double> candidates{1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0, 3.0, 10.0};
        for (const auto& opt : spec.optimizers) {
            double best = std::numeric_limits<double>::infinity();
            for (double lr : candidates) {
                RunConfig cfg = base;
                cfg.optimizer = opt;
                cfg.lr = lr;
                const auto res = run_experiment(cfg, RunOptions{false});
                if (res.summary.status == "ok" && std::isfinite(res.summary.final_loss) &&
                    res.summary.final_loss < best) {
                    best = res.summary.final_loss;
                    spec.base_lrs[opt] = lr;
                }
            }
        }

        const auto res = run_sweep(spec);
        std::printf("  lr grid on logreg (worst final loss over %zu seeds)\n", spec.seeds.size());
        std::printf("  %-11s %8s", "optimizer", "base lr");
        for (double m : spec.lr_multipliers) std::printf(" %10gx", m);
        std::printf("\n");
        for (const auto& opt : spec.optimizers) {
            std::printf("  %-11s %8g", opt.c_str(), spec.base_lr(opt));
            for (const auto& c : res.cells) {
                if (c.cell.optimizer != opt) continue;
                if (c.final_loss_worst) {
                    std::printf(" %11.4g", *c.final_loss_worst);
                } else {
                    std::printf(" %11s", "failed");
                }
                if (opt == "adahessian") {
                    o.fail_if(!c.final_loss_worst || !std::isfinite(*c.final_loss_worst) || c.numeric_failures > 0,
                              "adahessian cell " + c.cell.id() + " not finite");
                }
            }
            std::printf("\n");
        }
        if (o.passed) o.detail << "every adahessian cell finite; grid in " << res.csv_path;
    });
}

PropertyResult determinism(const fs::path& out) {
    return check("determinism", [&](verify_detail::Outcome& o) {
        std::vector<RunConfig> configs;
        RunConfig a;
        a.problem = "tiny-mlp";
        a.hessian_freq = 2;
        a.block_size = 4;
        a.batch_size = 32;
        a.iters = 150;
        a.seed = 7;
        configs.push_back(a);
        RunConfig b;
        b.problem = "logreg";
        b.samples = 2;
        b.warmup = 5;
        b.hessian_freq = 3;
        b.iters = 120;
        b.seed = 3;
        configs.push_back(b);
        RunConfig c;
        c.problem = "noisy-parabola";
        c.optimizer = "adam";
        c.iters = 100;
        configs.push_back(c);

        int compared = 0;
        for (auto cfg : configs) {
            std::string first;
            for (int rep = 0; rep < 2; ++rep) {
                cfg.out_dir = (out / ("determinism_" + std::to_string(rep))).string();
                const auto res = run_experiment(cfg);
                const std::string bytes = read_file(res.trajectory_path);
                o.fail_if(bytes.empty(), "empty trajectory for " + cfg.stem());
                if (rep == 0) {
                    first = bytes;
                } else {
                    o.fail_if(bytes != first, cfg.stem() + ": trajectories differ");
                    ++compared;
                }
            }
        }
        if (o.passed) o.detail << compared << " configurations byte-identical across repeats";
    });
}

}  // namespace

int main(int argc, char** argv) {
    fs::path out = fs::temp_directory_path() / "adahessian-acceptance";
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--out" && i + 1 < argc) {
            out = argv[++i];
        } else {
            std::fprintf(stderr, "usage: %s [--out DIR]\n", argv[0]);
            return 1;
        }
    }
    fs::create_directories(out);
    const std::uint64_t seed = 1;

    const std::vector<Criterion> criteria{
        {1, "one-step quadratic convergence", 1.0, [] { return verify_fig1_one_step(); }},
        {2, "Hutchinson correctness", 30.0,
         [&] {
             return combine("hutchinson",
                            {verify_hutchinson_enumeration(seed, 50), verify_hutchinson_diagonal_exact(seed)});
         }},
        {3, "HVP fidelity", 60.0, [&] { return verify_hvp_vs_fd(seed, 20); }},
        {4, "descent inequalities", 120.0,
         [&] {
             return combine("descent", {verify_descent(seed, oracle::Preconditioner::full_hessian),
                                        verify_descent(seed, oracle::Preconditioner::diagonal),
                                        verify_descent(seed, oracle::Preconditioner::block_diagonal)});
         }},
        {5, "Adam reduction", std::numeric_limits<double>::infinity(),
         [&] { return verify_adam_reduction(seed, 10, 200); }},
        {6, "Hessian-momentum rescue", 30.0, [] { return verify_momentum_rescue(); }},
        {7, "frequency/overhead trend", 300.0, [&] { return frequency_trend(out); }},
        {8, "learning-rate robustness", std::numeric_limits<double>::infinity(),
         [&] { return lr_robustness(out); }},
        {9, "determinism", std::numeric_limits<double>::infinity(), [&] { return determinism(out); }},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        auto r = c.body();
        if (r.passed && r.seconds > c.budget_seconds) {
            r.passed = false;
            r.detail += "; over the " + std::to_string(c.budget_seconds) + " s budget";
        }
        if (!r.passed) ++failed;
        std::printf("%s %d %s (%.2f s): %s\n", r.passed ? "PASS" : "FAIL", c.id, c.title.c_str(), r.seconds,
                    r.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
