#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "retrack/metrics.hpp"
#include "retrack/scenario.hpp"
#include "retrack/tracker.hpp"

namespace retrack {

struct BatchItem {
    std::string path;
    std::string kind;
    std::uint64_t seed = 0;
    RunMetrics metrics;
};

struct BatchReport {
    std::vector<BatchItem> items;  // sorted by scenario path

    double mean_identity_accuracy() const {
        if (items.empty()) return 0.0;
        double s = 0.0;
        for (const auto& i : items) s += i.metrics.identity_accuracy;
        return s / items.size();
    }
    int total_false_commits() const {
        int s = 0;
        for (const auto& i : items) s += i.metrics.false_commit_count;
        return s;
    }
    double mean_frames_to_recover() const {
        double s = 0.0;
        int n = 0;
        for (const auto& i : items) {
            if (i.metrics.occlusions == 0) continue;
            s += i.metrics.mean_frames_to_recover;
            ++n;
        }
        return n == 0 ? 0.0 : s / n;
    }
};

inline std::vector<std::string> list_scenario_files(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
        throw ScenarioError("not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

/// Runs every scenario independently; sequences are distributed over `jobs`
/// worker threads (results land in per-item slots, so parallel output equals
/// serial output). Traces, when requested, go to trace_dir/<scenario>.jsonl.
inline BatchReport run_batch(const std::vector<std::string>& files, const Config& cfg,
                             const RunOptions& options = {},
                             const std::string& trace_dir = "", int jobs = 0) {
    namespace fs = std::filesystem;
    if (jobs <= 0)
        jobs = std::max(1u, std::thread::hardware_concurrency());
    if (!trace_dir.empty()) fs::create_directories(trace_dir);

    BatchReport report;
    report.items.resize(files.size());
    std::atomic<std::size_t> cursor{0};
    std::vector<std::string> errors(files.size());

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= files.size()) return;
            try {
                const ScenarioScript script = load_scenario(files[i]);
                std::string trace_path;
                if (!trace_dir.empty()) {
                    trace_path = (fs::path(trace_dir) /
                                  (fs::path(files[i]).stem().string() + ".jsonl"))
                                     .string();
                }
                BatchItem item;
                item.path = files[i];
                item.kind = script.kind;
                item.seed = script.seed;
                item.metrics = run_sequence(script, cfg, options, trace_path);
                report.items[i] = std::move(item);
            } catch (const std::exception& e) {
                errors[i] = files[i] + ": " + e.what();
            }
        }
    };

    std::vector<std::thread> pool;
    const int threads = std::min<int>(jobs, static_cast<int>(files.size()));
    for (int i = 0; i < std::max(1, threads); ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    for (const auto& err : errors)
        if (!err.empty()) throw std::runtime_error("batch run failed: " + err);
    return report;
}

inline nlohmann::ordered_json to_json(const BatchReport& report) {
    nlohmann::ordered_json j;
    j["sequences"] = nlohmann::ordered_json::array();
    for (const auto& item : report.items) {
        nlohmann::ordered_json ij;
        ij["scenario"] = item.path;
        ij["kind"] = item.kind;
        ij["seed"] = item.seed;
        ij["metrics"] = to_json(item.metrics);
        j["sequences"].push_back(std::move(ij));
    }
    j["summary"] = nlohmann::ordered_json{
        {"sequences", report.items.size()},
        {"mean_identity_accuracy", report.mean_identity_accuracy()},
        {"total_false_commits", report.total_false_commits()},
        {"mean_frames_to_recover", report.mean_frames_to_recover()}};
    return j;
}

}  // namespace retrack
