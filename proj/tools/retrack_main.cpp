// Command-line harness: scenario generation, single-sequence runs with trace
// and metrics output, and parallel batch runs over a scenario directory.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "retrack/retrack.hpp"

namespace {

retrack::Config load_or_default(const std::string& path) {
    if (path.empty()) return retrack::Config{};
    return retrack::load_config(path);
}

void write_json_file(const nlohmann::ordered_json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed writing: " + path);
}

void add_ablation_flags(CLI::App* cmd, retrack::RunOptions& options) {
    cmd->add_flag("--no-branching", options.no_branching,
                  "disable branch recovery (single-path commits)");
    cmd->add_flag("--no-bypass", options.no_bypass,
                  "never bypass native memory selection");
    cmd->add_flag("--no-delayed-drm", options.no_delayed_drm,
                  "promote DRM candidates immediately");
    cmd->add_flag("--no-keep-first", options.no_keep_first,
                  "do not pin frame 0 in the conditioning set");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"retrack: occlusion-aware tracking control layer with a scripted simulator"};
    app.require_subcommand(1);

    // --- scenario gen ---
    auto* scenario = app.add_subcommand("scenario", "scenario file utilities");
    scenario->require_subcommand(1);
    auto* gen = scenario->add_subcommand("gen", "generate a deterministic scenario");
    std::string gen_kind;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    std::string gen_config;
    gen->add_option("--kind", gen_kind,
                    "steady | occlusion | distractor | reappear-small")
        ->required();
    gen->add_option("--seed", gen_seed, "64-bit scenario seed")->required();
    gen->add_option("--out", gen_out, "output scenario file (JSON)")->required();
    gen->add_option("--config", gen_config, "config file (affects scripted gap sizes)");

    // --- track run ---
    auto* track = app.add_subcommand("track", "run the tracker");
    track->require_subcommand(1);
    auto* run = track->add_subcommand("run", "run one scenario");
    std::string run_scenario, run_config, run_trace, run_metrics;
    retrack::RunOptions run_options;
    run->add_option("--scenario", run_scenario, "scenario file")->required();
    run->add_option("--config", run_config, "config file (defaults when omitted)");
    run->add_option("--trace", run_trace, "trace output (JSON lines, one per frame)");
    run->add_option("--metrics", run_metrics, "metrics output (JSON)");
    add_ablation_flags(run, run_options);

    // --- track batch ---
    auto* batch = track->add_subcommand("batch", "run every scenario in a directory");
    std::string batch_dir, batch_config, batch_report, batch_trace_dir;
    int batch_jobs = 0;
    retrack::RunOptions batch_options;
    batch->add_option("--dir", batch_dir, "directory of *.json scenarios")->required();
    batch->add_option("--config", batch_config, "config file (defaults when omitted)");
    batch->add_option("--report", batch_report, "aggregate report output (JSON)")
        ->required();
    batch->add_option("--trace-dir", batch_trace_dir,
                      "write per-sequence traces into this directory");
    batch->add_option("--jobs", batch_jobs, "worker threads (default: hardware)");
    add_ablation_flags(batch, batch_options);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const retrack::Config cfg = load_or_default(gen_config);
            const auto kind = retrack::scenario_kind_from_string(gen_kind);
            const auto script = retrack::generate_scenario(kind, gen_seed, cfg);
            retrack::save_scenario(script, gen_out);
            std::cout << "wrote " << gen_out << " (" << script.kind << ", seed "
                      << script.seed << ", " << script.length << " frames)\n";
        } else if (run->parsed()) {
            const retrack::Config cfg = load_or_default(run_config);
            const auto script = retrack::load_scenario(run_scenario);
            const auto metrics =
                retrack::run_sequence(script, cfg, run_options, run_trace);
            if (!run_metrics.empty()) write_json_file(retrack::to_json(metrics), run_metrics);
            std::cout << retrack::to_json(metrics).dump(2) << "\n";
        } else if (batch->parsed()) {
            const retrack::Config cfg = load_or_default(batch_config);
            const auto files = retrack::list_scenario_files(batch_dir);
            if (files.empty())
                throw std::runtime_error("no *.json scenarios in " + batch_dir);
            const auto report = retrack::run_batch(files, cfg, batch_options,
                                                   batch_trace_dir, batch_jobs);
            write_json_file(retrack::to_json(report), batch_report);
            std::cout << "ran " << report.items.size() << " sequences; report in "
                      << batch_report << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
