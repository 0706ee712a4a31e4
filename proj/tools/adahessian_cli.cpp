// adahessian: run, sweep, verify and report.
//
// Exit codes: 0 success, 1 configuration error, 2 numeric failure,
// 3 verification failure.

#include "adahessian/harness/config.hpp"
#include "adahessian/harness/report.hpp"
#include "adahessian/harness/runner.hpp"
#include "adahessian/harness/sweep.hpp"
#include "adahessian/harness/verify.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>

namespace ah = adahessian;
namespace hn = adahessian::harness;

namespace {

enum Exit : int { ok = 0, config_error = 1, numeric_failure = 2, verification_failure = 3 };

struct KeyOptions {
    std::string config_file;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App& cmd, bool include_sweep) {
        cmd.add_option("-c,--config", config_file, "key = value config file (version = 1)");
        for (const auto& key : hn::config_keys()) {
            if (key.scope == hn::KeyScope::sweep && !include_sweep) continue;
            options[key.name] = cmd.add_option(std::string("--") + key.name, values[key.name], key.help);
        }
    }

    // File values first, then whatever was given on the command line.
    hn::KeyValues resolve() const {
        hn::KeyValues kv;
        if (!config_file.empty()) kv = hn::read_config_file(config_file);
        hn::KeyValues flags;
        for (const auto& [name, opt] : options)
            if (opt->count() > 0) flags[name] = values.at(name);
        return hn::merge(std::move(kv), flags);
    }
};

int cmd_run(const KeyOptions& keys) {
    const auto cfg = hn::parse_run_config(keys.resolve());
    const auto res = hn::run_experiment(cfg);
    std::cout << hn::to_json(res.summary).dump(2) << '\n';
    std::cerr << "trajectory: " << res.trajectory_path << '\n';
    if (res.failure) {
        std::cerr << "numeric failure: " << *res.failure << '\n';
        return numeric_failure;
    }
    return ok;
}

int cmd_sweep(const KeyOptions& keys) {
    const auto spec = hn::parse_sweep_spec(keys.resolve());
    const auto res = hn::run_sweep(spec);
    std::cout << hn::sweep_csv_header() << '\n';
    for (const auto& c : res.cells) std::cout << hn::to_csv_row(c) << '\n';
    std::cerr << "summary: " << res.csv_path << '\n';
    return ok;
}

int cmd_verify(const std::string& out_dir, std::uint64_t seed) {
    const auto report = hn::run_verification(hn::VerifyOptions{seed});
    for (const auto& p : report.properties) {
        std::cout << (p.passed ? "PASS " : "FAIL ") << p.name << " (" << p.seconds << " s): " << p.detail << '\n';
    }
    const std::string dir = out_dir.empty() ? hn::default_output_dir() : out_dir;
    std::filesystem::create_directories(dir);
    const auto path = (std::filesystem::path(dir) / "verify_report.json").string();
    hn::open_fresh(path) << report.to_json().dump(2) << '\n';
    std::cerr << "report: " << path << '\n';
    return report.all_passed() ? ok : verification_failure;
}

int cmd_report(const std::string& trajectory, const std::string& timing, bool check, bool list) {
    if (list) {
        std::cout << "problems:";
        for (const auto& p : ah::problem_names()) std::cout << ' ' << p;
        std::cout << "\noptimizers:";
        for (const auto& o : hn::optimizer_names()) std::cout << ' ' << o;
        std::cout << '\n';
        if (trajectory.empty()) return ok;
    }
    if (trajectory.empty()) throw hn::ConfigError("report needs a trajectory file");
    const auto res = hn::report_run(trajectory, timing.empty() ? std::nullopt : std::optional<std::string>(timing));
    std::cout << hn::to_json(res.summary).dump(2) << '\n';
    if (!res.timing_found) std::cerr << "note: no timing file; timing fields are null\n";
    if (check) {
        if (!res.matches_saved) {
            std::cerr << "no saved summary next to " << trajectory << '\n';
            return verification_failure;
        }
        if (!*res.matches_saved) {
            std::cerr << "recomputed summary differs from the saved one\n";
            return verification_failure;
        }
        std::cerr << "summary matches\n";
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AdaHessian optimizer toolkit"};
    app.require_subcommand(1);

    KeyOptions run_keys;
    auto* run = app.add_subcommand("run", "run one optimizer on one problem");
    run_keys.attach(*run, false);

    KeyOptions sweep_keys;
    auto* sweep = app.add_subcommand("sweep", "grid of runs aggregated into a CSV");
    sweep_keys.attach(*sweep, true);

    std::string verify_out;
    std::uint64_t verify_seed = 1;
    auto* verify = app.add_subcommand("verify", "run the property suite");
    verify->add_option("--out", verify_out, "output directory for verify_report.json");
    verify->add_option("--seed", verify_seed, "seed for the random instances");

    std::string trajectory, timing;
    bool check = false;
    bool list = false;
    auto* report = app.add_subcommand("report", "recompute a run summary from its trajectory");
    report->add_option("trajectory", trajectory, "trajectory .jsonl file");
    report->add_option("--timing", timing, "timing file (default: <stem>.timing.jsonl)");
    report->add_flag("--check", check, "fail unless the saved summary matches");
    report->add_flag("--list-problems", list, "list problem and optimizer names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_error;
    }

    try {
        if (*run) return cmd_run(run_keys);
        if (*sweep) return cmd_sweep(sweep_keys);
        if (*verify) return cmd_verify(verify_out, verify_seed);
        if (*report) return cmd_report(trajectory, timing, check, list);
    } catch (const hn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const ah::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return numeric_failure;
    } catch (const ah::ContractViolation& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_error;
    }
    return ok;
}
