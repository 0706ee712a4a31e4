#pragma once

// Reads run artifacts back and recomputes the summary from them.

#include "adahessian/harness/runner.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace adahessian::harness {

struct LoadedTrajectory {
    ordered_json header;
    std::vector<TrajectoryRecord> records;
    std::optional<std::string> failure;
};

inline LoadedTrajectory load_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read trajectory '" + path + "'");
    LoadedTrajectory out;
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& what) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            fail("not valid JSON");
        }
        const std::string type = j.value("type", "");
        if (lineno == 1) {
            if (type != "header" || j.value("schema", "") != trajectory_schema ||
                j.value("version", 0) != artifact_version) {
                fail("not an adahessian trajectory (schema " + std::string(trajectory_schema) + " v" +
                     std::to_string(artifact_version) + " expected)");
            }
            out.header = std::move(j);
            continue;
        }
        if (out.failure) fail("records after the failure line");
        if (type == "iter") {
            TrajectoryRecord r;
            try {
                r = record_from_json(j);
            } catch (const nlohmann::json::exception& e) {
                fail(std::string("malformed record: ") + e.what());
            }
            const std::int64_t expected = out.records.empty() ? 0 : out.records.back().t + 1;
            if (r.t != expected) fail("expected t = " + std::to_string(expected));
            out.records.push_back(std::move(r));
        } else if (type == "failure") {
            out.failure = j.value("message", "");
        } else {
            fail("unknown record type '" + type + "'");
        }
    }
    if (lineno == 0) throw ConfigError(path + ": empty trajectory");
    return out;
}

inline std::optional<TimingLog> load_timing(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    TimingLog log;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        if (first) {
            if (j.value("schema", "") != timing_schema || j.value("version", 0) != artifact_version) {
                throw ConfigError(path + ": not an adahessian timing file");
            }
            log.skip = j.at("skip").get<std::int64_t>();
            log.block = j.at("block").get<std::int64_t>();
            first = false;
            continue;
        }
        auto& series = j.at("run").get<std::string>() == "main" ? log.run : log.reference;
        series.push_back(j.at("seconds").get<double>());
    }
    return log;
}

struct ReportResult {
    RunSummary summary;
    bool timing_found = false;
    std::optional<bool> matches_saved;  // set when a saved summary exists
};

// Recomputes the summary of the run stored at `trajectory_path`. The timing
// file defaults to the sibling <stem>.timing.jsonl.
inline ReportResult report_run(const std::string& trajectory_path,
                               const std::optional<std::string>& timing_path = std::nullopt) {
    const auto traj = load_trajectory(trajectory_path);
    const auto timing = load_timing(timing_path.value_or(sibling_path(trajectory_path, ".timing.jsonl")));
    ReportResult out;
    out.timing_found = timing.has_value();
    out.summary = summarize(traj.header, traj.records, traj.failure, timing ? &*timing : nullptr);

    std::ifstream saved(sibling_path(trajectory_path, ".summary.json"));
    if (saved) {
        const auto j = ordered_json::parse(saved);
        out.matches_saved = j == to_json(out.summary);
    }
    return out;
}

}  // namespace adahessian::harness
