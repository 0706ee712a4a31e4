#pragma once

// Run configuration: a versioned key = value file whose keys are the long CLI
// flag names, e.g.
//
//   # adahessian run config
//   version = 1
//   problem = tiny-mlp
//   problem-params = layers=4:16:3,n=256
//   optimizer = adahessian
//   lr = 0.15
//   hessian-freq = 2
//
// Blank lines and lines starting with '#' are ignored. Flags given on the
// command line replace the file's value for the same key.

#include "adahessian/hutchinson.hpp"
#include "adahessian/optim/adahessian.hpp"
#include "adahessian/optim/baselines.hpp"
#include "adahessian/optim/schedule.hpp"
#include "adahessian/problems/registry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace adahessian::harness {

inline constexpr int config_version = 1;
inline constexpr const char* output_dir_env = "ADAHESSIAN_OUT_DIR";
inline constexpr const char* fallback_output_dir = "adahessian_out";

// Raised for anything wrong with user-supplied configuration.
class ConfigError : public ContractViolation {
public:
    using ContractViolation::ContractViolation;
};

using KeyValues = std::map<std::string, std::string>;

enum class KeyScope { run, sweep };

struct ConfigKey {
    const char* name;
    const char* help;
    KeyScope scope = KeyScope::run;
};

inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"problem", "problem name (see `report --list-problems`)"},
        {"problem-params", "problem parameters, k=v[,k=v...]"},
        {"optimizer", "adahessian | sgd | adagrad | adam | adamw | rmsprop"},
        {"lr", "base learning rate (default depends on the optimizer)"},
        {"beta1", "first-moment decay; SGD momentum"},
        {"beta2", "second-moment decay"},
        {"k", "Hessian power in [0, 1]"},
        {"block-size", "spatial averaging block size"},
        {"eps", "denominator guard"},
        {"weight-decay", "weight decay (decoupled for adahessian/adamw)"},
        {"hessian-momentum", "true: EMA of the curvature; false: current |D| only"},
        {"samples", "Hutchinson probes per estimate"},
        {"hessian-freq", "estimate the diagonal every N iterations"},
        {"warmup", "estimate on every iteration t <= warmup"},
        {"schedule", "constant | step_decay | linear_warmup_then_decay"},
        {"milestones", "step_decay milestones, comma separated"},
        {"decay-factor", "step_decay multiplier"},
        {"lr-warmup", "linear warmup length in iterations"},
        {"total-steps", "linear decay end (0: no decay)"},
        {"min-factor", "linear decay floor"},
        {"iters", "number of iterations"},
        {"batch-size", "minibatch size (0: full batch)"},
        {"seed", "run seed: initialization, batches, probes"},
        {"out", "output directory"},
        {"run-name", "file stem for this run's outputs"},
        {"threshold", "loss threshold for iterations-to-threshold"},
        {"sgd-reference", "also time an SGD run for the cost ratio"},
        {"reference-lr", "learning rate of the SGD reference run"},
        {"timing-skip", "iterations excluded from timing at the start"},
        {"timing-block", "iterations per timing block"},
        {"optimizers", "sweep: optimizers, comma separated", KeyScope::sweep},
        {"base-lrs", "sweep: per-optimizer base lr, name=lr[,name=lr...]", KeyScope::sweep},
        {"lr-multipliers", "sweep: multipliers of the base lr", KeyScope::sweep},
        {"block-sizes", "sweep: block sizes", KeyScope::sweep},
        {"hessian-freqs", "sweep: Hessian frequencies", KeyScope::sweep},
        {"seeds", "sweep: seeds", KeyScope::sweep},
        {"jobs", "sweep: parallel workers", KeyScope::sweep},
        {"sweep-name", "sweep: name of the CSV and run directory", KeyScope::sweep},
    };
    return keys;
}

// ---------------------------------------------------------------------------
// Scalar parsing with errors that name the key

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ConfigError("'" + key + "' expects a number, got '" + s + "'");
    }
    return v;
}

inline long long parse_int(const std::string& key, const std::string& s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("'" + key + "' expects an integer, got '" + s + "'");
    }
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("'" + key + "' expects true or false, got '" + s + "'");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline double default_lr(const std::string& optimizer) {
    if (optimizer == "adahessian") return 0.15;
    if (optimizer == "sgd") return 0.1;
    if (optimizer == "adagrad") return 0.01;
    return 1e-3;  // adam, adamw, rmsprop
}

inline const std::vector<std::string>& optimizer_names() {
    static const std::vector<std::string> names = {"adahessian", "sgd", "adagrad", "adam", "adamw", "rmsprop"};
    return names;
}

inline BaselineKind parse_baseline_kind(const std::string& s) {
    if (s == "sgd") return BaselineKind::sgd;
    if (s == "adagrad") return BaselineKind::adagrad;
    if (s == "adam") return BaselineKind::adam;
    if (s == "adamw") return BaselineKind::adamw;
    if (s == "rmsprop") return BaselineKind::rmsprop;
    throw ConfigError("unknown optimizer '" + s + "'");
}

inline std::string default_output_dir() {
    const char* env = std::getenv(output_dir_env);
    return env != nullptr && *env != '\0' ? std::string(env) : std::string(fallback_output_dir);
}

struct RunConfig {
    std::string problem = "fig1-quadratic";
    std::string problem_params;
    std::string optimizer = "adahessian";
    std::optional<double> lr;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double k = 1.0;
    Index block_size = 1;
    double eps = 1e-8;
    double weight_decay = 0.0;
    bool hessian_momentum = true;
    int samples = 1;
    int hessian_freq = 1;
    int warmup = 0;
    LrSchedule schedule;
    std::int64_t iters = 100;
    Index batch_size = 0;
    std::uint64_t seed = 0;
    std::string out_dir;  // empty: default_output_dir()
    std::string run_name;
    double threshold = 1e-6;
    bool sgd_reference = true;
    double reference_lr = 0.01;
    std::int64_t timing_skip = 10;
    std::int64_t timing_block = 60;  // divisible by every frequency in 1..5

    [[nodiscard]] double effective_lr() const { return lr.value_or(default_lr(optimizer)); }
    [[nodiscard]] std::string output_dir() const { return out_dir.empty() ? default_output_dir() : out_dir; }
    [[nodiscard]] std::string stem() const {
        return run_name.empty() ? problem + "_" + optimizer + "_seed" + std::to_string(seed) : run_name;
    }

    [[nodiscard]] AdaHessianOptions adahessian_options() const {
        AdaHessianOptions o;
        o.lr = effective_lr();
        o.beta1 = beta1;
        o.beta2 = beta2;
        o.hessian_power = k;
        o.eps = eps;
        o.weight_decay = weight_decay;
        o.hessian_momentum = hessian_momentum;
        return o;
    }

    [[nodiscard]] BaselineOptions baseline_options() const {
        BaselineOptions o;
        o.lr = effective_lr();
        o.beta1 = beta1;
        o.beta2 = beta2;
        o.eps = eps;
        o.weight_decay = weight_decay;
        return o;
    }

    // Checks everything that can be checked without building the problem.
    void validate() const {
        auto check = [](bool ok, const std::string& what) {
            if (!ok) throw ConfigError(what);
        };
        check(std::find(optimizer_names().begin(), optimizer_names().end(), optimizer) != optimizer_names().end(),
              "unknown optimizer '" + optimizer + "'");
        check(std::find(problem_names().begin(), problem_names().end(), problem) != problem_names().end(),
              "unknown problem '" + problem + "'");
        check(iters >= 1, "'iters' must be >= 1");
        check(block_size >= 1, "'block-size' must be >= 1");
        check(batch_size >= 0, "'batch-size' must be >= 0");
        check(threshold >= 0.0, "'threshold' must be >= 0");
        check(reference_lr > 0.0, "'reference-lr' must be positive");
        check(timing_skip >= 0, "'timing-skip' must be >= 0");
        check(timing_block >= 1, "'timing-block' must be >= 1");
        try {
            HutchinsonConfig{samples, hessian_freq, warmup, seed}.validate();
            schedule.validate();
            if (optimizer == "adahessian") {
                adahessian_options().validate();
            } else {
                baseline_options().validate(parse_baseline_kind(optimizer));
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const ContractViolation& e) {
            throw ConfigError(e.what());
        }
    }

    // Canonical, fully resolved key/value form (written into trajectory headers).
    [[nodiscard]] KeyValues to_map() const {
        using detail::format_double;
        KeyValues kv;
        kv["problem"] = problem;
        kv["problem-params"] = problem_params;
        kv["optimizer"] = optimizer;
        kv["lr"] = format_double(effective_lr());
        kv["beta1"] = format_double(beta1);
        kv["beta2"] = format_double(beta2);
        kv["k"] = format_double(k);
        kv["block-size"] = std::to_string(block_size);
        kv["eps"] = format_double(eps);
        kv["weight-decay"] = format_double(weight_decay);
        kv["hessian-momentum"] = hessian_momentum ? "true" : "false";
        kv["samples"] = std::to_string(samples);
        kv["hessian-freq"] = std::to_string(hessian_freq);
        kv["warmup"] = std::to_string(warmup);
        kv["schedule"] = to_string(schedule.kind);
        std::string ms;
        for (auto m : schedule.milestones) ms += (ms.empty() ? "" : ",") + std::to_string(m);
        kv["milestones"] = ms;
        kv["decay-factor"] = format_double(schedule.factor);
        kv["lr-warmup"] = std::to_string(schedule.warmup_steps);
        kv["total-steps"] = std::to_string(schedule.total_steps);
        kv["min-factor"] = format_double(schedule.min_factor);
        kv["iters"] = std::to_string(iters);
        kv["batch-size"] = std::to_string(batch_size);
        kv["seed"] = std::to_string(seed);
        kv["threshold"] = format_double(threshold);
        kv["sgd-reference"] = sgd_reference ? "true" : "false";
        kv["reference-lr"] = format_double(reference_lr);
        kv["timing-skip"] = std::to_string(timing_skip);
        kv["timing-block"] = std::to_string(timing_block);
        return kv;
    }
};

// Builds a RunConfig from key/value pairs. Sweep keys are tolerated only when
// `allow_sweep_keys` is set; any other unknown key is an error.
inline RunConfig parse_run_config(const KeyValues& kv, bool allow_sweep_keys = false) {
    using namespace detail;
    RunConfig c;
    for (const auto& [key, value] : kv) {
        auto it = std::find_if(config_keys().begin(), config_keys().end(),
                               [&](const ConfigKey& k) { return key == k.name; });
        if (it == config_keys().end()) throw ConfigError("unknown config key '" + key + "'");
        if (it->scope == KeyScope::sweep && !allow_sweep_keys) {
            throw ConfigError("'" + key + "' is only valid for sweeps");
        }
    }
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    auto uint64 = [&](const char* key, const std::string& s) {
        const long long v = parse_int(key, s);
        if (v < 0) throw ConfigError(std::string("'") + key + "' must be >= 0");
        return static_cast<std::uint64_t>(v);
    };

    if (auto s = get("problem")) c.problem = *s;
    if (auto s = get("problem-params")) c.problem_params = *s;
    if (auto s = get("optimizer")) c.optimizer = *s;
    if (auto s = get("lr")) c.lr = parse_double("lr", *s);
    if (auto s = get("beta1")) c.beta1 = parse_double("beta1", *s);
    if (auto s = get("beta2")) c.beta2 = parse_double("beta2", *s);
    if (auto s = get("k")) c.k = parse_double("k", *s);
    if (auto s = get("block-size")) c.block_size = static_cast<Index>(parse_int("block-size", *s));
    if (auto s = get("eps")) c.eps = parse_double("eps", *s);
    if (auto s = get("weight-decay")) c.weight_decay = parse_double("weight-decay", *s);
    if (auto s = get("hessian-momentum")) c.hessian_momentum = parse_bool("hessian-momentum", *s);
    if (auto s = get("samples")) c.samples = static_cast<int>(parse_int("samples", *s));
    if (auto s = get("hessian-freq")) c.hessian_freq = static_cast<int>(parse_int("hessian-freq", *s));
    if (auto s = get("warmup")) c.warmup = static_cast<int>(parse_int("warmup", *s));
    if (auto s = get("schedule")) {
        try {
            c.schedule.kind = parse_schedule_kind(*s);
        } catch (const ContractViolation& e) {
            throw ConfigError(e.what());
        }
    }
    if (auto s = get("milestones")) {
        for (const auto& m : split(*s, ',')) c.schedule.milestones.push_back(parse_int("milestones", m));
    }
    if (auto s = get("decay-factor")) c.schedule.factor = parse_double("decay-factor", *s);
    if (auto s = get("lr-warmup")) c.schedule.warmup_steps = parse_int("lr-warmup", *s);
    if (auto s = get("total-steps")) c.schedule.total_steps = parse_int("total-steps", *s);
    if (auto s = get("min-factor")) c.schedule.min_factor = parse_double("min-factor", *s);
    if (auto s = get("iters")) c.iters = parse_int("iters", *s);
    if (auto s = get("batch-size")) c.batch_size = static_cast<Index>(parse_int("batch-size", *s));
    if (auto s = get("seed")) c.seed = uint64("seed", *s);
    if (auto s = get("out")) c.out_dir = *s;
    if (auto s = get("run-name")) c.run_name = *s;
    if (auto s = get("threshold")) c.threshold = parse_double("threshold", *s);
    if (auto s = get("sgd-reference")) c.sgd_reference = parse_bool("sgd-reference", *s);
    if (auto s = get("reference-lr")) c.reference_lr = parse_double("reference-lr", *s);
    if (auto s = get("timing-skip")) c.timing_skip = parse_int("timing-skip", *s);
    if (auto s = get("timing-block")) c.timing_block = parse_int("timing-block", *s);
    c.validate();
    return c;
}

inline KeyValues parse_config_text(const std::string& text, const std::string& source = "config") {
    KeyValues kv;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    bool saw_version = false;
    while (std::getline(ss, line)) {
        ++lineno;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        const std::string where = source + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (key == "version") {
            if (detail::parse_int("version", value) != config_version) {
                throw ConfigError(where + ": unsupported config version " + value);
            }
            saw_version = true;
            continue;
        }
        if (kv.count(key) != 0) throw ConfigError(where + ": duplicate key '" + key + "'");
        kv[key] = value;
    }
    if (!saw_version) throw ConfigError(source + ": missing 'version = " + std::to_string(config_version) + "'");
    return kv;
}

inline KeyValues read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

// Later values win.
inline KeyValues merge(KeyValues base, const KeyValues& overrides) {
    for (const auto& [k, v] : overrides) base[k] = v;
    return base;
}

// Problem and optimizer construction; both run before any iteration.
inline std::unique_ptr<DifferentiableProblem> build_problem(const RunConfig& c) {
    try {
        return make_problem(c.problem, ProblemParams::parse(c.problem_params));
    } catch (const NumericError&) {
        throw;
    } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
    }
}

inline std::unique_ptr<Optimizer> build_optimizer(const RunConfig& c, Index d) {
    try {
        if (c.optimizer == "adahessian") return std::make_unique<AdaHessian>(d, c.adahessian_options());
        return std::make_unique<BaselineOptimizer>(parse_baseline_kind(c.optimizer), d, c.baseline_options());
    } catch (const ConfigError&) {
        throw;
    } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace adahessian::harness
