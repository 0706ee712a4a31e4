#pragma once

// Grid runs over optimizers x lr multipliers x block sizes x Hessian
// frequencies, repeated over seeds, aggregated into one CSV row per cell.
// Block size and frequency only apply to AdaHessian; baselines get one cell
// per (optimizer, multiplier).

#include "adahessian/harness/runner.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

namespace adahessian::harness {

struct SweepSpec {
    RunConfig base;
    std::vector<std::string> optimizers;
    std::map<std::string, double> base_lrs;
    std::vector<double> lr_multipliers{1.0};
    std::vector<Index> block_sizes;
    std::vector<int> hessian_freqs;
    std::vector<std::uint64_t> seeds;
    int jobs = 1;
    std::string name = "sweep";

    [[nodiscard]] double base_lr(const std::string& optimizer) const {
        if (auto it = base_lrs.find(optimizer); it != base_lrs.end()) return it->second;
        if (optimizer == base.optimizer && base.lr) return *base.lr;
        return default_lr(optimizer);
    }
};

inline SweepSpec parse_sweep_spec(const KeyValues& kv) {
    using namespace detail;
    SweepSpec s;
    s.base = parse_run_config(kv, /*allow_sweep_keys=*/true);
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    s.optimizers = {s.base.optimizer};
    if (auto v = get("optimizers")) s.optimizers = split(*v, ',');
    for (const auto& o : s.optimizers) {
        if (std::find(optimizer_names().begin(), optimizer_names().end(), o) == optimizer_names().end()) {
            throw ConfigError("unknown optimizer '" + o + "' in 'optimizers'");
        }
    }
    if (auto v = get("base-lrs")) {
        for (const auto& item : split(*v, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw ConfigError("'base-lrs' entries must be optimizer=lr");
            s.base_lrs[item.substr(0, eq)] = parse_double("base-lrs", item.substr(eq + 1));
        }
    }
    if (auto v = get("lr-multipliers")) {
        s.lr_multipliers.clear();
        for (const auto& x : split(*v, ',')) s.lr_multipliers.push_back(parse_double("lr-multipliers", x));
    }
    s.block_sizes = {s.base.block_size};
    if (auto v = get("block-sizes")) {
        s.block_sizes.clear();
        for (const auto& x : split(*v, ',')) s.block_sizes.push_back(static_cast<Index>(parse_int("block-sizes", x)));
    }
    s.hessian_freqs = {s.base.hessian_freq};
    if (auto v = get("hessian-freqs")) {
        s.hessian_freqs.clear();
        for (const auto& x : split(*v, ',')) s.hessian_freqs.push_back(static_cast<int>(parse_int("hessian-freqs", x)));
    }
    s.seeds = {s.base.seed};
    if (auto v = get("seeds")) {
        s.seeds.clear();
        for (const auto& x : split(*v, ',')) {
            const auto seed = parse_int("seeds", x);
            if (seed < 0) throw ConfigError("'seeds' must be >= 0");
            s.seeds.push_back(static_cast<std::uint64_t>(seed));
        }
    }
    if (auto v = get("jobs")) s.jobs = static_cast<int>(parse_int("jobs", *v));
    if (auto v = get("sweep-name")) s.name = *v;

    auto check = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    check(!s.optimizers.empty() && !s.lr_multipliers.empty() && !s.block_sizes.empty() && !s.hessian_freqs.empty() &&
              !s.seeds.empty(),
          "sweep grid axes must be non-empty");
    for (double m : s.lr_multipliers) check(m > 0.0, "'lr-multipliers' must be positive");
    for (Index b : s.block_sizes) check(b >= 1, "'block-sizes' must be >= 1");
    for (int f : s.hessian_freqs) check(f >= 1, "'hessian-freqs' must be >= 1");
    for (const auto& [name, lr] : s.base_lrs) {
        check(std::find(optimizer_names().begin(), optimizer_names().end(), name) != optimizer_names().end(),
              "'base-lrs' names an unknown optimizer");
        check(lr > 0.0, "'base-lrs' must be positive");
    }
    check(s.jobs >= 1, "'jobs' must be >= 1");
    check(!s.name.empty() && s.name.find('/') == std::string::npos, "'sweep-name' must be a plain file name");
    return s;
}

struct SweepCell {
    std::string optimizer;
    double lr_multiplier = 1.0;
    double lr = 0.0;
    std::optional<Index> block_size;  // AdaHessian only
    std::optional<int> hessian_freq;  // AdaHessian only

    [[nodiscard]] std::string id() const {
        std::string s = optimizer + "_lr" + detail::format_double(lr_multiplier) + "x";
        if (block_size) s += "_b" + std::to_string(*block_size);
        if (hessian_freq) s += "_f" + std::to_string(*hessian_freq);
        return s;
    }
};

struct SweepRun {
    std::size_t cell = 0;
    RunConfig config;
    RunSummary summary;
    bool crashed = false;  // non-numeric exception; message in summary.message
};

struct CellStats {
    SweepCell cell;
    int runs = 0;
    int ok = 0;
    int numeric_failures = 0;
    int errors = 0;
    int diverged = 0;  // failed, or ended above the starting loss
    std::optional<double> final_loss_mean, final_loss_std, final_loss_worst;
    std::optional<double> iters_to_threshold_mean;
    std::optional<double> time_per_iter_mean;
    std::optional<double> cost_ratio_mean, cost_ratio_std;
    std::string status;
    std::string message;
};

struct SweepResult {
    std::vector<CellStats> cells;
    std::vector<SweepRun> runs;
    std::string csv_path;
};

inline std::vector<SweepCell> expand_cells(const SweepSpec& s) {
    std::vector<SweepCell> cells;
    for (const auto& opt : s.optimizers) {
        for (double m : s.lr_multipliers) {
            const double lr = s.base_lr(opt) * m;
            if (opt == "adahessian") {
                for (Index b : s.block_sizes)
                    for (int f : s.hessian_freqs) cells.push_back({opt, m, lr, b, f});
            } else {
                cells.push_back({opt, m, lr, std::nullopt, std::nullopt});
            }
        }
    }
    return cells;
}

namespace detail {

inline void mean_std(const std::vector<double>& xs, std::optional<double>& mean, std::optional<double>* sd) {
    if (xs.empty()) return;
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    mean = m;
    if (sd != nullptr) {
        double v = 0.0;
        for (double x : xs) v += (x - m) * (x - m);
        *sd = xs.size() > 1 ? std::sqrt(v / static_cast<double>(xs.size() - 1)) : 0.0;
    }
}

inline std::string csv_number(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline std::string csv_text(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

}  // namespace detail

inline CellStats aggregate(const SweepCell& cell, const std::vector<const SweepRun*>& runs) {
    CellStats st;
    st.cell = cell;
    std::vector<double> finals, iters, times, ratios;
    for (const auto* r : runs) {
        ++st.runs;
        const auto& s = r->summary;
        if (r->crashed) {
            ++st.errors;
            ++st.diverged;
            if (st.message.empty()) st.message = s.message;
            continue;
        }
        if (s.status == "ok") {
            ++st.ok;
        } else {
            ++st.numeric_failures;
            if (st.message.empty()) st.message = s.message;
        }
        const bool finite = std::isfinite(s.final_loss);
        if (s.status != "ok" || !finite || s.final_loss > s.initial_loss) ++st.diverged;
        if (s.status == "ok" && finite) finals.push_back(s.final_loss);
        if (s.iterations_to_threshold) iters.push_back(static_cast<double>(*s.iterations_to_threshold));
        if (s.time_per_iter) times.push_back(*s.time_per_iter);
        if (s.cost_ratio) ratios.push_back(*s.cost_ratio);
    }
    detail::mean_std(finals, st.final_loss_mean, &st.final_loss_std);
    if (!finals.empty()) st.final_loss_worst = *std::max_element(finals.begin(), finals.end());
    detail::mean_std(iters, st.iters_to_threshold_mean, nullptr);
    detail::mean_std(times, st.time_per_iter_mean, nullptr);
    detail::mean_std(ratios, st.cost_ratio_mean, &st.cost_ratio_std);
    if (st.ok == st.runs && st.diverged == 0) {
        st.status = "ok";
    } else if (st.ok == 0) {
        st.status = "failed";
    } else if (st.ok < st.runs) {
        st.status = "partial";
    } else {
        st.status = "diverged";
    }
    return st;
}

inline const char* sweep_csv_header() {
    return "optimizer,lr_multiplier,lr,block_size,hessian_freq,runs,ok,numeric_failures,errors,diverged,"
           "final_loss_mean,final_loss_std,final_loss_worst,iters_to_threshold_mean,time_per_iter_mean,"
           "cost_ratio_mean,cost_ratio_std,status,message";
}

inline std::string to_csv_row(const CellStats& c) {
    using detail::csv_number;
    std::string row = c.cell.optimizer + "," + detail::format_double(c.cell.lr_multiplier) + "," +
                      detail::format_double(c.cell.lr) + "," +
                      (c.cell.block_size ? std::to_string(*c.cell.block_size) : "") + "," +
                      (c.cell.hessian_freq ? std::to_string(*c.cell.hessian_freq) : "") + ",";
    row += std::to_string(c.runs) + "," + std::to_string(c.ok) + "," + std::to_string(c.numeric_failures) + "," +
           std::to_string(c.errors) + "," + std::to_string(c.diverged) + ",";
    row += csv_number(c.final_loss_mean) + "," + csv_number(c.final_loss_std) + "," + csv_number(c.final_loss_worst) +
           "," + csv_number(c.iters_to_threshold_mean) + "," + csv_number(c.time_per_iter_mean) + "," +
           csv_number(c.cost_ratio_mean) + "," + csv_number(c.cost_ratio_std) + ",";
    row += c.status + "," + detail::csv_text(c.message);
    return row;
}

// Every run writes its own artifacts under <out>/<name>/; the CSV is written
// once all runs are done. Failures are recorded per cell and never stop the
// sweep. With jobs > 1 runs execute concurrently, one run per worker.
inline SweepResult run_sweep(const SweepSpec& spec, const RunOptions& options = {}) {
    const auto cells = expand_cells(spec);
    const std::string run_dir = (std::filesystem::path(spec.base.output_dir()) / spec.name).string();

    SweepResult res;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        for (auto seed : spec.seeds) {
            RunConfig rc = spec.base;
            rc.optimizer = cells[c].optimizer;
            rc.lr = cells[c].lr;
            if (cells[c].block_size) rc.block_size = *cells[c].block_size;
            if (cells[c].hessian_freq) rc.hessian_freq = *cells[c].hessian_freq;
            rc.seed = seed;
            rc.out_dir = run_dir;
            rc.run_name = cells[c].id() + "_seed" + std::to_string(seed);
            rc.validate();  // every cell is checked before any run starts
            res.runs.push_back(SweepRun{c, std::move(rc), {}, false});
        }
    }
    build_problem(spec.base);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < res.runs.size(); i = next++) {
            auto& run = res.runs[i];
            try {
                run.summary = run_experiment(run.config, options).summary;
            } catch (const std::exception& e) {
                run.crashed = true;
                run.summary.problem = run.config.problem;
                run.summary.optimizer = run.config.optimizer;
                run.summary.status = "error";
                run.summary.message = e.what();
            }
        }
    };
    const int jobs = std::max(1, std::min<int>(spec.jobs, static_cast<int>(res.runs.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<const SweepRun*> mine;
        for (const auto& r : res.runs)
            if (r.cell == c) mine.push_back(&r);
        res.cells.push_back(aggregate(cells[c], mine));
    }

    if (options.write_files) {
        std::filesystem::create_directories(spec.base.output_dir());
        res.csv_path = (std::filesystem::path(spec.base.output_dir()) / (spec.name + ".csv")).string();
        auto csv = open_fresh(res.csv_path);
        csv << sweep_csv_header() << '\n';
        for (const auto& c : res.cells) csv << to_csv_row(c) << '\n';
    }
    return res;
}

}  // namespace adahessian::harness
