#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>

#include "retrack/batch.hpp"
#include "retrack/tracker.hpp"

using namespace retrack;

namespace {

std::vector<TraceEvent> run_events(const ScenarioScript& script, const Config& cfg,
                                   const RunOptions& options = {}) {
    std::vector<TraceEvent> events;
    run_sequence(script, cfg, options, "", &events);
    return events;
}

const TraceEvent* find_commit_after(const std::vector<TraceEvent>& events, int t0) {
    for (const auto& e : events)
        if (e.t >= t0 && e.commit && e.committed_area && *e.committed_area > 0.0)
            return &e;
    return nullptr;
}

}  // namespace

TEST_CASE("steady scenario: stable on every frame, pool never spawned") {
    Config cfg;
    const auto script = generate_scenario(ScenarioKind::steady, 5, cfg);
    const auto events = run_events(script, cfg);
    REQUIRE(events.size() == static_cast<std::size_t>(script.length));
    for (const auto& e : events) {
        CHECK(e.mode == TrackingMode::stable);
        CHECK(e.commit);
        CHECK(e.branches.empty());
        CHECK(e.branch_events.empty());
    }
    const auto metrics = compute_metrics(events, ground_truth(script));
    REQUIRE(metrics.identity_accuracy == Catch::Approx(1.0));
    REQUIRE(metrics.false_commit_count == 0);
}

TEST_CASE("trace line count equals script length and frames are monotone") {
    Config cfg;
    const auto script = generate_scenario(ScenarioKind::occlusion, 13, cfg);
    const auto events = run_events(script, cfg);
    REQUIRE(events.size() == static_cast<std::size_t>(script.length));
    for (int t = 0; t < script.length; ++t)
        REQUIRE(events[static_cast<std::size_t>(t)].t == t);
}

TEST_CASE("rerun with the same scenario and config is replay-identical") {
    Config cfg;
    for (auto kind : {ScenarioKind::occlusion, ScenarioKind::distractor,
                      ScenarioKind::reappear_small}) {
        const auto script = generate_scenario(kind, 99, cfg);
        const auto a = run_events(script, cfg);
        const auto b = run_events(script, cfg);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            REQUIRE(trace_line(a[i]) == trace_line(b[i]));
    }
}

TEST_CASE("occlusion: recovery within two frames of onset, absent wins the gap") {
    Config cfg;
    int absent_checked = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto script = generate_scenario(ScenarioKind::occlusion, seed, cfg);
        const auto events = run_events(script, cfg);
        const auto& span = script.occlusions.front();

        // classifier reaches recovery within 2 frames of the scripted onset
        bool recovered_fast = false;
        for (int t = span.start; t <= span.start + 2 && t < script.length; ++t)
            if (events[static_cast<std::size_t>(t)].mode == TrackingMode::recovery)
                recovered_fast = true;
        REQUIRE(recovered_fast);

        // while fully occluded the absent hypothesis carries the pool argmax
        for (int t = span.start + 1; t < span.end; ++t) {
            const auto& e = events[static_cast<std::size_t>(t)];
            if (e.branches.empty() || !e.branches.front().scored) continue;
            const auto best = std::max_element(
                e.branches.begin(), e.branches.end(),
                [](const BranchSummary& a, const BranchSummary& b) {
                    return a.score < b.score;
                });
            CHECK(best->root == "absent");
            ++absent_checked;
        }

        // tracking resumes on the target after the gap
        const TraceEvent* back = find_commit_after(events, span.end);
        REQUIRE(back != nullptr);
        const auto gt = ground_truth(script);
        const auto& f = gt.frames[static_cast<std::size_t>(back->t)];
        REQUIRE(distance(*back->committed_centroid, f.center) <
                2.5 * std::sqrt(f.area) + 12.0);
    }
    REQUIRE(absent_checked > 0);
}

TEST_CASE("reappear-small: relaxed reconfirmation within five frames of reappearance") {
    Config cfg;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto script = generate_scenario(ScenarioKind::reappear_small, seed, cfg);
        const auto events = run_events(script, cfg);
        const auto& span = script.occlusions.front();

        // the missing streak crosses l_miss inside the gap
        int max_miss = 0;
        for (int t = span.start; t < span.end; ++t)
            max_miss = std::max(max_miss,
                                events[static_cast<std::size_t>(t)].miss_streak);
        REQUIRE(max_miss >= cfg.l_miss);

        const TraceEvent* back = find_commit_after(events, span.end);
        REQUIRE(back != nullptr);
        REQUIRE(back->t - span.end <= 5);
        REQUIRE(back->reconfirm_path.has_value());
        REQUIRE(*back->reconfirm_path == "relaxed");
        REQUIRE(back->mode == TrackingMode::stable);
    }
}

TEST_CASE("bypass engages for small objects exactly per the indicator law") {
    Config cfg;
    const auto script = generate_scenario(ScenarioKind::reappear_small, 4, cfg);
    const auto events = run_events(script, cfg);
    bool saw_bypass = false;
    for (const auto& e : events) {
        const int expected =
            (e.small && (e.miss_streak > 0 || e.mode != TrackingMode::stable)) ? 1 : 0;
        REQUIRE(e.gamma == expected);
        REQUIRE(e.use_memory_selection == 1 - e.gamma);
        if (e.gamma == 1) saw_bypass = true;
    }
    REQUIRE(saw_bypass);
}

TEST_CASE("mode/pool coupling: stable frames never carry branches") {
    Config cfg;
    for (auto kind : {ScenarioKind::occlusion, ScenarioKind::distractor,
                      ScenarioKind::reappear_small}) {
        const auto script = generate_scenario(kind, 21, cfg);
        const auto events = run_events(script, cfg);
        for (const auto& e : events) {
            if (e.mode == TrackingMode::stable)
                REQUIRE(e.branches.empty());
            else
                REQUIRE_FALSE(e.branches.empty());
        }
    }
}

TEST_CASE("pool discipline: at most branch_keep branches, unique roots") {
    Config cfg;
    for (auto kind : {ScenarioKind::occlusion, ScenarioKind::distractor,
                      ScenarioKind::reappear_small}) {
        const auto script = generate_scenario(kind, 77, cfg);
        const auto events = run_events(script, cfg);
        for (const auto& e : events) {
            REQUIRE(e.branches.size() <= static_cast<std::size_t>(cfg.branch_keep));
            std::set<std::string> roots;
            for (const auto& b : e.branches) roots.insert(b.root);
            REQUIRE(roots.size() == e.branches.size());
        }
    }
}

TEST_CASE("win streak: argmax gains one per frame, everyone else sits at zero") {
    Config cfg;
    const auto script = generate_scenario(ScenarioKind::reappear_small, 31, cfg);
    const auto events = run_events(script, cfg);
    std::map<std::string, int> prev_streak;
    int prev_t = -2;
    for (const auto& e : events) {
        if (e.branches.empty()) {
            prev_streak.clear();
            prev_t = -2;
            continue;
        }
        if (e.branches.front().scored) {
            const auto best = std::max_element(
                e.branches.begin(), e.branches.end(),
                [](const BranchSummary& a, const BranchSummary& b) {
                    return a.score < b.score;
                });
            for (const auto& b : e.branches) {
                if (b.root == best->root) {
                    const int prior =
                        (e.t == prev_t + 1 && prev_streak.count(b.root))
                            ? prev_streak[b.root]
                            : 0;
                    REQUIRE(b.win_streak == prior + 1);
                } else {
                    REQUIRE(b.win_streak == 0);
                }
            }
        }
        prev_streak.clear();
        for (const auto& b : e.branches) prev_streak[b.root] = b.win_streak;
        prev_t = e.t;
    }
}

TEST_CASE("memory isolation: promotions and anchor growth only on stable frames") {
    Config cfg;
    for (auto kind : {ScenarioKind::occlusion, ScenarioKind::distractor,
                      ScenarioKind::reappear_small}) {
        const auto script = generate_scenario(kind, 55, cfg);
        const auto events = run_events(script, cfg);
        std::size_t prev_anchors = 1;
        int prev_cond = 1;
        for (const auto& e : events) {
            if (e.memory.drm_promoted) REQUIRE(e.mode == TrackingMode::stable);
            if (e.memory.conditioning_total > prev_cond)
                REQUIRE(e.mode == TrackingMode::stable);
            if (e.memory.anchors.size() > prev_anchors)
                REQUIRE(e.mode == TrackingMode::stable);
            prev_anchors = e.memory.anchors.size();
            prev_cond = e.memory.conditioning_total;
        }
    }
}

TEST_CASE("conditioning law: frame 0 pinned, size capped by K_c") {
    Config cfg;
    for (auto kind : {ScenarioKind::steady, ScenarioKind::distractor,
                      ScenarioKind::reappear_small}) {
        const auto script = generate_scenario(kind, 64, cfg);
        const auto events = run_events(script, cfg);
        for (const auto& e : events) {
            const auto& cs = e.memory.conditioning_set;
            REQUIRE(std::count(cs.begin(), cs.end(), 0) == 1);
            REQUIRE(static_cast<int>(cs.size()) ==
                    std::min(cfg.k_c, e.memory.conditioning_total));
        }
    }
}

TEST_CASE("distractor runs promote conditioning frames through the delayed counter") {
    Config cfg;
    int promotions = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto script = generate_scenario(ScenarioKind::distractor, seed, cfg);
        const auto events = run_events(script, cfg);
        for (const auto& e : events)
            if (e.memory.drm_promoted) ++promotions;
    }
    REQUIRE(promotions > 0);
}

TEST_CASE("no-branching ablation: single path, more distractor commits") {
    Config cfg;
    RunOptions off;
    off.no_branching = true;
    int fc_default = 0, fc_ablated = 0;
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        const auto script = generate_scenario(ScenarioKind::distractor, seed, cfg);
        std::vector<TraceEvent> ablated;
        const auto m_off = run_sequence(script, cfg, off, "", &ablated);
        for (const auto& e : ablated) REQUIRE(e.branches.empty());
        const auto m_def = run_sequence(script, cfg);
        fc_default += m_def.false_commit_count;
        fc_ablated += m_off.false_commit_count;
    }
    REQUIRE(fc_ablated >= fc_default);
    REQUIRE(fc_ablated > 0);  // the ablation genuinely commits distractors
}

TEST_CASE("no-bypass ablation never recovers faster on reappear-small") {
    Config cfg;
    RunOptions off;
    off.no_bypass = true;
    double ftr_default = 0.0, ftr_ablated = 0.0;
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        const auto script = generate_scenario(ScenarioKind::reappear_small, seed, cfg);
        ftr_default += run_sequence(script, cfg).mean_frames_to_recover;
        std::vector<TraceEvent> events;
        const auto m_off = run_sequence(script, cfg, off, "", &events);
        ftr_ablated += m_off.mean_frames_to_recover;
        for (const auto& e : events) REQUIRE(e.gamma == 0);
    }
    REQUIRE(ftr_ablated >= ftr_default);
}

TEST_CASE("trace events survive a JSON round-trip") {
    Config cfg;
    const auto script = generate_scenario(ScenarioKind::reappear_small, 3, cfg);
    const auto events = run_events(script, cfg);
    for (const auto& e : events) {
        const auto parsed = trace_event_from_json(to_json(e));
        REQUIRE(trace_line(parsed) == trace_line(e));
    }
}

TEST_CASE("batch: parallel run equals per-sequence serial runs") {
    namespace fs = std::filesystem;
    Config cfg;
    const auto dir = fs::temp_directory_path() / "retrack_batch_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::vector<std::string> files;
    int idx = 0;
    for (auto kind : {ScenarioKind::steady, ScenarioKind::occlusion,
                      ScenarioKind::distractor, ScenarioKind::reappear_small}) {
        const auto script = generate_scenario(kind, 40 + idx, cfg);
        const auto path = (dir / ("s" + std::to_string(idx++) + ".json")).string();
        save_scenario(script, path);
        files.push_back(path);
    }
    const auto report = run_batch(files, cfg, RunOptions{}, "", 4);
    REQUIRE(report.items.size() == files.size());
    for (std::size_t i = 0; i < files.size(); ++i) {
        const auto script = load_scenario(files[i]);
        const auto serial = run_sequence(script, cfg);
        REQUIRE(report.items[i].metrics.identity_accuracy ==
                Catch::Approx(serial.identity_accuracy));
        REQUIRE(report.items[i].metrics.false_commit_count ==
                serial.false_commit_count);
        REQUIRE(report.items[i].metrics.mean_frames_to_recover ==
                Catch::Approx(serial.mean_frames_to_recover));
    }
    fs::remove_all(dir);
}
