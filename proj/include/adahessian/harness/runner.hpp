#pragma once

// The training loop plus its on-disk artifacts:
//
//   <stem>.jsonl         header line, one record per iteration (t = 0 is the
//                        starting point), optional failure line. Contains no
//                        timing, so identical configs give identical bytes.
//   <stem>.timing.jsonl  per-iteration wall time of the run and of the SGD
//                        reference run.
//   <stem>.summary.json  summarize() over the two files above.

#include "adahessian/harness/config.hpp"
#include "adahessian/hutchinson.hpp"
#include "adahessian/optim/blocks.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace adahessian::harness {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* trajectory_schema = "adahessian.trajectory";
inline constexpr const char* timing_schema = "adahessian.timing";
inline constexpr const char* summary_schema = "adahessian.summary";
inline constexpr int artifact_version = 1;
inline constexpr Index theta_snapshot_max_dim = 16;

struct TrajectoryRecord {
    std::int64_t t = 0;
    double loss = 0.0;       // full-batch objective at theta_t
    double grad_norm = 0.0;  // norm of the gradient used for step t (full batch at t = 0)
    double lr = 0.0;         // effective learning rate at step t; 0 at t = 0
    bool hessian_computed = false;
    std::optional<std::vector<double>> theta;
};

inline ordered_json to_json(const TrajectoryRecord& r) {
    ordered_json j;
    j["type"] = "iter";
    j["t"] = r.t;
    j["loss"] = r.loss;
    j["grad_norm"] = r.grad_norm;
    j["lr"] = r.lr;
    j["hessian_computed"] = r.hessian_computed;
    if (r.theta) j["theta"] = *r.theta;
    return j;
}

inline TrajectoryRecord record_from_json(const nlohmann::json& j) {
    TrajectoryRecord r;
    r.t = j.at("t").get<std::int64_t>();
    r.loss = j.at("loss").get<double>();
    r.grad_norm = j.at("grad_norm").get<double>();
    r.lr = j.at("lr").get<double>();
    r.hessian_computed = j.at("hessian_computed").get<bool>();
    if (j.contains("theta")) r.theta = j.at("theta").get<std::vector<double>>();
    return r;
}

// ---------------------------------------------------------------------------
// Timing statistics

struct TimingStats {
    double per_iter = 0.0;  // median over blocks of the block-mean time
    double median = 0.0;    // plain median of per-iteration times
    std::int64_t blocks = 0;
    std::int64_t samples = 0;
};

inline double median_of(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Means over consecutive blocks of `block` iterations after dropping the first
// `skip`. The trailing partial block is dropped unless it is the only one.
inline std::vector<double> block_means(const std::vector<double>& times, std::int64_t skip, std::int64_t block) {
    std::vector<double> out;
    const auto begin = static_cast<std::size_t>(std::min<std::int64_t>(skip, static_cast<std::int64_t>(times.size())));
    const std::size_t n = times.size() - begin;
    const auto b = static_cast<std::size_t>(block);
    if (n == 0) return out;
    if (n < b) {
        double s = 0.0;
        for (std::size_t i = begin; i < times.size(); ++i) s += times[i];
        out.push_back(s / static_cast<double>(n));
        return out;
    }
    for (std::size_t start = begin; start + b <= times.size(); start += b) {
        double s = 0.0;
        for (std::size_t i = start; i < start + b; ++i) s += times[i];
        out.push_back(s / static_cast<double>(b));
    }
    return out;
}

// Iterations within a block alternate between cheap (gradient only) and
// expensive (gradient + HVP) steps, so the per-iteration median would only see
// the cheap ones; the median of block means keeps the average cost while
// staying robust to scheduler noise.
inline TimingStats timing_stats(const std::vector<double>& times, std::int64_t skip, std::int64_t block) {
    TimingStats s;
    const auto means = block_means(times, skip, block);
    s.blocks = static_cast<std::int64_t>(means.size());
    s.per_iter = median_of(means);
    const auto begin = static_cast<std::size_t>(std::min<std::int64_t>(skip, static_cast<std::int64_t>(times.size())));
    s.median = median_of(std::vector<double>(times.begin() + static_cast<std::ptrdiff_t>(begin), times.end()));
    s.samples = static_cast<std::int64_t>(times.size() - begin);
    return s;
}

// Median over paired blocks of (run block mean / reference block mean).
inline std::optional<double> cost_ratio(const std::vector<double>& run, const std::vector<double>& reference,
                                        std::int64_t skip, std::int64_t block) {
    const auto a = block_means(run, skip, block);
    const auto b = block_means(reference, skip, block);
    const std::size_t n = std::min(a.size(), b.size());
    if (n == 0) return std::nullopt;
    std::vector<double> ratios;
    for (std::size_t i = 0; i < n; ++i) {
        if (b[i] > 0.0) ratios.push_back(a[i] / b[i]);
    }
    if (ratios.empty()) return std::nullopt;
    return median_of(ratios);
}

// ---------------------------------------------------------------------------
// Summary

struct RunSummary {
    std::string problem;
    std::string optimizer;
    std::string status = "ok";  // ok | numeric_failure
    std::string message;
    std::int64_t iterations = 0;  // completed optimizer steps
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double best_loss = 0.0;
    double threshold = 0.0;
    std::optional<std::int64_t> iterations_to_threshold;
    std::int64_t hessian_evaluations = 0;
    std::optional<double> time_per_iter;
    std::optional<double> time_per_iter_median;
    std::optional<double> reference_time_per_iter;
    std::optional<double> cost_ratio;
};

template <typename J>
void put_optional(J& j, const char* key, const std::optional<double>& v) {
    if (v) {
        j[key] = *v;
    } else {
        j[key] = nullptr;
    }
}

inline ordered_json to_json(const RunSummary& s) {
    ordered_json j;
    j["schema"] = summary_schema;
    j["version"] = artifact_version;
    j["problem"] = s.problem;
    j["optimizer"] = s.optimizer;
    j["status"] = s.status;
    j["message"] = s.message;
    j["iterations"] = s.iterations;
    j["initial_loss"] = s.initial_loss;
    j["final_loss"] = s.final_loss;
    j["best_loss"] = s.best_loss;
    j["threshold"] = s.threshold;
    if (s.iterations_to_threshold) {
        j["iterations_to_threshold"] = *s.iterations_to_threshold;
    } else {
        j["iterations_to_threshold"] = nullptr;
    }
    j["hessian_evaluations"] = s.hessian_evaluations;
    put_optional(j, "time_per_iter", s.time_per_iter);
    put_optional(j, "time_per_iter_median", s.time_per_iter_median);
    put_optional(j, "reference_time_per_iter", s.reference_time_per_iter);
    put_optional(j, "cost_ratio", s.cost_ratio);
    return j;
}

struct TimingLog {
    std::vector<double> run;        // seconds for t = 1..n
    std::vector<double> reference;  // SGD reference, same indexing
    std::int64_t skip = 10;
    std::int64_t block = 60;
};

// Everything here derives from the trajectory header and records plus the
// timing log, which is what makes `report` able to recompute it.
inline RunSummary summarize(const ordered_json& header, const std::vector<TrajectoryRecord>& records,
                            const std::optional<std::string>& failure, const TimingLog* timing) {
    RunSummary s;
    s.problem = header.at("problem").get<std::string>();
    s.optimizer = header.at("optimizer").get<std::string>();
    s.threshold = header.at("threshold").get<double>();
    if (failure) {
        s.status = "numeric_failure";
        s.message = *failure;
    }
    if (!records.empty()) {
        s.iterations = records.back().t;
        s.initial_loss = records.front().loss;
        s.final_loss = records.back().loss;
        s.best_loss = records.front().loss;
        for (const auto& r : records) {
            s.best_loss = std::min(s.best_loss, r.loss);
            if (r.hessian_computed) ++s.hessian_evaluations;
            if (!s.iterations_to_threshold && r.loss <= s.threshold) s.iterations_to_threshold = r.t;
        }
    }
    if (timing != nullptr) {
        const auto st = timing_stats(timing->run, timing->skip, timing->block);
        if (st.samples > 0) {
            s.time_per_iter = st.per_iter;
            s.time_per_iter_median = st.median;
        }
        const auto rt = timing_stats(timing->reference, timing->skip, timing->block);
        if (rt.samples > 0) s.reference_time_per_iter = rt.per_iter;
        s.cost_ratio = cost_ratio(timing->run, timing->reference, timing->skip, timing->block);
    }
    return s;
}

// ---------------------------------------------------------------------------
// The loop

// One optimizer advancing on one problem, one iteration at a time.
class Trainer {
public:
    Trainer(const DifferentiableProblem& problem, std::unique_ptr<Optimizer> opt, const RunConfig& cfg)
        : problem_(problem),
          opt_(std::move(opt)),
          cfg_(cfg),
          blocks_(BlockSpec::from_layout(problem.layout(), cfg.block_size)),
          hutch_{cfg.samples, cfg.hessian_freq, cfg.warmup, cfg.seed},
          theta_(problem.initial_point(cfg.seed)) {}

    [[nodiscard]] const ParamVector& theta() const { return theta_; }
    [[nodiscard]] std::int64_t t() const { return t_; }

    TrajectoryRecord initial_record() const {
        TrajectoryRecord r;
        r.t = 0;
        r.loss = problem_.value(theta_);
        r.grad_norm = problem_.gradient(theta_).norm();
        attach_theta(r);
        return r;
    }

    // Returns the wall time of the step itself; `last_` keeps what the record needs.
    double step() {
        const auto start = std::chrono::steady_clock::now();
        const std::int64_t t = t_ + 1;
        const Batch batch = problem_.sample_batch(cfg_.seed, static_cast<std::uint64_t>(t), cfg_.batch_size);
        ParamVector g;
        ParamVector ds;
        const bool curvature = opt_->uses_curvature() && should_compute(t, hutch_);
        if (curvature) {
            Rng rng = probe_stream(hutch_, static_cast<std::uint64_t>(t));
            CurvatureSample cs = sample_curvature(problem_, theta_, batch, hutch_, rng, t);
            g = std::move(cs.gradient);
            ds = blocks_.block_size() == 1 ? std::move(cs.diag.values) : spatial_average(cs.diag.values, blocks_);
        } else {
            g = problem_.gradient(theta_, batch);
        }
        const double scale = cfg_.schedule.multiplier(t);
        theta_ = opt_->step(theta_, g, curvature ? &ds : nullptr, scale);
        const auto stop = std::chrono::steady_clock::now();
        t_ = t;
        last_grad_norm_ = g.norm();
        last_lr_ = cfg_.effective_lr() * scale;
        last_curvature_ = curvature;
        return std::chrono::duration<double>(stop - start).count();
    }

    TrajectoryRecord record() const {
        TrajectoryRecord r;
        r.t = t_;
        r.loss = problem_.value(theta_);
        r.grad_norm = last_grad_norm_;
        r.lr = last_lr_;
        r.hessian_computed = last_curvature_;
        attach_theta(r);
        return r;
    }

private:
    void attach_theta(TrajectoryRecord& r) const {
        if (theta_.size() <= theta_snapshot_max_dim) {
            r.theta = std::vector<double>(theta_.data(), theta_.data() + theta_.size());
        }
    }

    const DifferentiableProblem& problem_;
    std::unique_ptr<Optimizer> opt_;
    RunConfig cfg_;
    BlockSpec blocks_;
    HutchinsonConfig hutch_;
    ParamVector theta_;
    std::int64_t t_ = 0;
    double last_grad_norm_ = 0.0;
    double last_lr_ = 0.0;
    bool last_curvature_ = false;
};

struct RunResult {
    RunSummary summary;
    std::vector<TrajectoryRecord> records;
    TimingLog timing;
    std::optional<std::string> failure;
    std::string trajectory_path;  // empty when nothing was written
    std::string timing_path;
    std::string summary_path;
    ordered_json header;
};

inline ordered_json trajectory_header(const RunConfig& cfg, const DifferentiableProblem& problem) {
    ordered_json h;
    h["type"] = "header";
    h["schema"] = trajectory_schema;
    h["version"] = artifact_version;
    h["problem"] = cfg.problem;
    h["optimizer"] = cfg.optimizer;
    h["dim"] = problem.dim();
    h["threshold"] = cfg.threshold;
    ordered_json c = ordered_json::object();
    for (const auto& [k, v] : cfg.to_map()) c[k] = v;
    h["config"] = c;
    return h;
}

inline std::string sibling_path(const std::string& trajectory_path, const std::string& suffix) {
    std::filesystem::path p(trajectory_path);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

// Replaces `path` by unlinking it first: truncating an existing file makes
// ext4 force a writeback on close, which costs far more than the run itself.
inline std::ofstream open_fresh(const std::string& path) {
    std::error_code ignored;
    std::filesystem::remove(path, ignored);
    std::ofstream out(path, std::ios::out | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    return out;
}

struct RunOptions {
    bool write_files = true;
};

// glibc serves large blocks with fresh mmaps and trims the heap on free, so a
// Hessian step taken every few iterations keeps paying page faults that an
// every-iteration one does not. Pinning the thresholds makes the timed cost
// the arithmetic alone.
inline void stabilize_allocator() {
#if defined(__GLIBC__)
    static const bool done = [] {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
        return true;
    }();
    (void)done;
#endif
}

// Builds everything first (config errors surface before any compute), then
// runs the loop. A NumericError ends the run; records up to the last good
// iteration are kept and the failure is reported in the result.
inline RunResult run_experiment(const RunConfig& cfg, const RunOptions& options = {}) {
    cfg.validate();
    stabilize_allocator();
    auto problem = build_problem(cfg);
    Trainer main(*problem, build_optimizer(cfg, problem->dim()), cfg);
    std::optional<Trainer> reference;
    if (cfg.sgd_reference) {
        RunConfig rc = cfg;
        rc.optimizer = "sgd";
        rc.lr = cfg.reference_lr;
        rc.beta1 = 0.9;
        rc.weight_decay = 0.0;
        rc.schedule = LrSchedule{};
        reference.emplace(*problem, build_optimizer(rc, problem->dim()), rc);
    }

    RunResult res;
    res.header = trajectory_header(cfg, *problem);
    res.timing.skip = cfg.timing_skip;
    res.timing.block = cfg.timing_block;

    std::ofstream out;
    if (options.write_files) {
        std::filesystem::create_directories(cfg.output_dir());
        res.trajectory_path = (std::filesystem::path(cfg.output_dir()) / (cfg.stem() + ".jsonl")).string();
        res.timing_path = sibling_path(res.trajectory_path, ".timing.jsonl");
        res.summary_path = sibling_path(res.trajectory_path, ".summary.json");
        out = open_fresh(res.trajectory_path);
        out << res.header.dump() << '\n' << std::flush;
    }
    // Flushed about once a second: long runs stay observable without a write
    // per iteration.
    auto last_flush = std::chrono::steady_clock::now();
    auto emit = [&](const TrajectoryRecord& r) {
        res.records.push_back(r);
        if (!out.is_open()) return;
        out << to_json(r).dump() << '\n';
        if (const auto now = std::chrono::steady_clock::now(); now - last_flush > std::chrono::seconds(1)) {
            out.flush();
            last_flush = now;
        }
    };

    bool reference_ok = reference.has_value();
    auto advance_reference = [&](std::int64_t until) {
        while (reference_ok && reference->t() < until) {
            try {
                res.timing.reference.push_back(reference->step());
            } catch (const NumericError&) {
                reference_ok = false;  // timing up to here is still usable
            }
        }
    };

    try {
        emit(main.initial_record());
        // Main and reference alternate in timing-block chunks so slow drifts
        // in machine speed hit both alike.
        std::int64_t boundary = std::min(cfg.iters, cfg.timing_skip);
        while (main.t() < cfg.iters) {
            if (main.t() == boundary) {
                advance_reference(boundary);
                boundary = std::min(cfg.iters, boundary + cfg.timing_block);
            }
            res.timing.run.push_back(main.step());
            emit(main.record());
        }
        advance_reference(cfg.iters);
    } catch (const NumericError& e) {
        res.failure = e.what();
        if (out.is_open()) {
            ordered_json f;
            f["type"] = "failure";
            f["t"] = res.records.empty() ? 0 : res.records.back().t + 1;
            f["message"] = e.what();
            out << f.dump() << '\n' << std::flush;
        }
    }

    res.summary = summarize(res.header, res.records, res.failure, &res.timing);
    if (options.write_files) {
        out.close();
        auto tf = open_fresh(res.timing_path);
        ordered_json th;
        th["type"] = "header";
        th["schema"] = timing_schema;
        th["version"] = artifact_version;
        th["skip"] = res.timing.skip;
        th["block"] = res.timing.block;
        tf << th.dump() << '\n';
        for (std::size_t i = 0; i < res.timing.run.size(); ++i) {
            tf << ordered_json{{"run", "main"}, {"t", i + 1}, {"seconds", res.timing.run[i]}}.dump() << '\n';
        }
        for (std::size_t i = 0; i < res.timing.reference.size(); ++i) {
            tf << ordered_json{{"run", "sgd_reference"}, {"t", i + 1}, {"seconds", res.timing.reference[i]}}.dump()
               << '\n';
        }
        auto sf = open_fresh(res.summary_path);
        sf << to_json(res.summary).dump(2) << '\n';
    }
    return res;
}

}  // namespace adahessian::harness
