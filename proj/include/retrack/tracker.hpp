#pragma once

#include <algorithm>
#include <concepts>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "retrack/anchor_bank.hpp"
#include "retrack/branch.hpp"
#include "retrack/config.hpp"
#include "retrack/geometry.hpp"
#include "retrack/memory.hpp"
#include "retrack/metrics.hpp"
#include "retrack/reference.hpp"
#include "retrack/reliability.hpp"
#include "retrack/scenario.hpp"
#include "retrack/sim_predictor.hpp"
#include "retrack/trace.hpp"

namespace retrack {

/// What the tracking layer needs from a per-frame predictor. Contexts are
/// opaque value types owned by the tracker; the predictor interprets them.
template <class P>
concept PredictorModel = requires(const P p, typename P::Context ctx,
                                  const MemoryView view, int t, int index) {
    { p.init() } -> std::same_as<typename P::Context>;
    { p.predict(t, ctx) } -> std::same_as<PredictorOutput>;
    { p.advance(t, ctx, index) } -> std::same_as<typename P::Context>;
    { p.hint(t, ctx, index) } -> std::same_as<std::optional<typename P::Context>>;
    { p.apply_memory(ctx, view) };
};

/// Ablation switches; each disables one mechanism independently.
struct RunOptions {
    bool no_branching = false;    // single-path commits, no hypothesis pool
    bool no_bypass = false;       // native memory selection always on
    bool no_delayed_drm = false;  // promote on the first candidate frame
    bool no_keep_first = false;   // frame 0 competes like any conditioning frame
};

template <class Context>
struct TrackerState {
    TrackingMode mode = TrackingMode::stable;
    int frame = 0;  // last processed frame
    MotionHistory motion;
    ReferenceStats stats;
    AnchorBank bank;
    MemoryStore store;
    BranchPool<Context> pool;
    Context main_context;
    MemoryView next_memory;  // decided this frame, applied to the next queries
    bool small = false;

    TrackerState(ReferenceStats s, AnchorBank b, Context ctx)
        : stats(std::move(s)), bank(std::move(b)), main_context(std::move(ctx)) {}
};

/// Per-frame pipeline: query, reliability, stable path or branch recovery,
/// miss streak, then the memory decisions for the next frame's attention.
template <PredictorModel P>
class Tracker {
public:
    using Context = typename P::Context;

    Tracker(const P& predictor, Config cfg, RunOptions options = {})
        : pred_(predictor), cfg_(std::move(cfg)), opts_(options) {
        cfg_.validate();
        if (opts_.no_keep_first) cfg_.keep_first_cond_frame = false;
        if (opts_.no_delayed_drm) cfg_.n_drm = 1;
        init_frame0();
    }

    /// Trace of frame 0 (initialization commit).
    const TraceEvent& init_event() const { return init_event_; }

    const TrackerState<Context>& state() const { return *state_; }
    const Config& config() const { return cfg_; }

    TraceEvent process_frame(int t) {
        auto& st = *state_;
        if (t != st.frame + 1)
            throw std::logic_error("process_frame: frames must be processed in order");

        TraceEvent event;
        event.t = t;

        // (1) query the predictor on the main context
        pred_.apply_memory(st.main_context, st.next_memory);
        PredictorOutput out;
        try {
            out = pred_.predict(t, st.main_context);
        } catch (const std::exception& e) {
            throw std::runtime_error("predictor failed on main context at frame " +
                                     std::to_string(t) + ": " + e.what());
        }

        // (2) reliability report and mode classification
        const ReliabilityReport report = assess(out);
        event.q = report.top_iou;
        event.s_app = report.s_app;
        event.s_mot = report.s_mot;
        event.s_geo = report.s_geo;
        event.margin = report.margin;

        // (3)/(4) committed output via the stable path, single-path ablation,
        // or branch recovery
        std::optional<Committed> committed;
        TrackingMode final_mode = report.mode;

        if (report.mode == TrackingMode::stable) {
            if (!st.pool.empty()) reset_pool(event, "reset");
            committed = Committed{out.primary, out.pointer, out, std::nullopt};
            st.main_context = pred_.advance(t, st.main_context, 0);
            st.motion.push(out.primary.geometry.centroid);
        } else if (opts_.no_branching) {
            committed = Committed{out.primary, out.pointer, out, std::nullopt};
            st.main_context = pred_.advance(t, st.main_context, 0);
            if (!out.primary.geometry.absent())
                st.motion.push(out.primary.geometry.centroid);
        } else {
            committed = run_branch_step(t, out, event);
            if (committed) final_mode = TrackingMode::stable;
        }

        // stable-path memory updates (reference stats, anchors, DRM)
        if (final_mode == TrackingMode::stable && committed &&
            !committed->mask.geometry.absent()) {
            apply_stable_updates(t, *committed, event);
        }

        // committed frames enter the non-conditioning recency buffer
        if (committed)
            store_noncond(st.store, t,
                          committed->mask.predicted_iou * committed->mask.objectness,
                          cfg_);

        // (5) missing streak
        std::optional<double> committed_area;
        if (committed) committed_area = committed->mask.geometry.area;
        update_miss_streak(st.store, committed_area, final_mode);

        // (6) memory decisions for the next frame's attention
        decide_memory(t, final_mode, event);

        // (7) emit the trace event
        event.mode = final_mode;
        event.commit = committed.has_value();
        if (committed) {
            event.committed_area = committed->mask.geometry.area;
            if (!committed->mask.geometry.absent())
                event.committed_centroid = committed->mask.geometry.centroid;
            if (committed->reconfirm)
                event.reconfirm_path = to_string(*committed->reconfirm);
        }
        event.miss_streak = st.store.miss_streak;
        event.small = st.small;
        fill_branch_summaries(event);
        event.memory.conditioning_total = static_cast<int>(st.store.conditioning.size());
        event.memory.anchors = st.bank.frame_indices();

        st.mode = final_mode;
        st.frame = t;
        return event;
    }

private:
    struct Committed {
        CandidateMask mask;
        ObjectPointer pointer;
        PredictorOutput source;  // full output backing the commit
        std::optional<ReconfirmPath> reconfirm;
    };

    void init_frame0() {
        Context ctx = pred_.init();
        MemoryView first_view;
        first_view.conditioning = {0};
        pred_.apply_memory(ctx, first_view);
        PredictorOutput out = pred_.predict(0, ctx);
        if (out.primary.geometry.absent())
            throw std::runtime_error("initialization frame has no visible target");

        frame_size_ = out.primary.geometry.frame_size;
        ReferenceStats stats(static_cast<std::size_t>(cfg_.median_window));
        stats = update_reference_stats(std::move(stats), out.primary.geometry,
                                       TrackingMode::stable);
        AnchorBank bank = AnchorBank::init(out.pointer);
        state_.emplace(std::move(stats), std::move(bank), pred_.advance(0, ctx, 0));

        auto& st = *state_;
        st.motion.push(out.primary.geometry.centroid);
        st.small = small_object_flag(st.stats, frame_size_, cfg_);
        store_noncond(st.store, 0, out.primary.predicted_iou * out.primary.objectness,
                      cfg_);

        TraceEvent event;
        event.t = 0;
        event.mode = TrackingMode::stable;
        event.commit = true;
        event.q = out.primary.predicted_iou;
        event.s_app = appearance_score(out.pointer, st.bank);
        event.s_mot = 1.0;  // no motion history yet
        event.s_geo = geometry_score(out.primary.geometry, st.stats, st.small);
        event.margin = candidate_margin(out.candidate_ious());
        event.committed_area = out.primary.geometry.area;
        event.committed_centroid = out.primary.geometry.centroid;
        event.small = st.small;
        decide_memory(0, TrackingMode::stable, event);
        event.memory.conditioning_total = static_cast<int>(st.store.conditioning.size());
        event.memory.anchors = st.bank.frame_indices();
        init_event_ = event;
    }

    ReliabilityReport assess(const PredictorOutput& out) const {
        const auto& st = *state_;
        ReliabilityReport r;
        r.top_iou = out.primary.predicted_iou;
        r.s_app = appearance_score(out.pointer, st.bank);
        r.margin = candidate_margin(out.candidate_ious());
        r.predicted_center = st.motion.predict();
        if (out.primary.geometry.absent()) {
            r.s_mot = 0.0;
            r.s_geo = 0.0;
        } else {
            r.s_mot = r.predicted_center
                          ? motion_score(out.primary.geometry.centroid,
                                         *r.predicted_center, tau_m_pixels())
                          : 1.0;  // cannot penalize before two stable centers
            r.s_geo = geometry_score(out.primary.geometry, st.stats, st.small);
        }
        r.mode = classify_mode(r.top_iou, r.s_app, r.s_mot, r.s_geo, r.margin,
                               out.primary.geometry.area, cfg_);
        return r;
    }

    double tau_m_pixels() const { return cfg_.tau_m * frame_size_.diagonal(); }

    void reset_pool(TraceEvent& event, const std::string& kind) {
        auto& st = *state_;
        for (const auto& b : st.pool.branches)
            event.branch_events.push_back({kind, b.root.label(), b.score});
        st.pool.clear();
    }

    void spawn(int t, const PredictorOutput& out, TraceEvent& event) {
        auto& st = *state_;
        st.pool = spawn_pool(pred_, t, st.main_context, out, st.motion, cfg_);
        for (const auto& b : st.pool.branches)
            event.branch_events.push_back({"spawn", b.root.label(), b.score});
    }

    /// One branch-recovery step: spawn if needed, score, prune, update win
    /// streaks, then try to reconfirm the argmax. Returns the committed
    /// output when a branch rejoined the main path.
    std::optional<Committed> run_branch_step(int t, const PredictorOutput& main_out,
                                             TraceEvent& event) {
        auto& st = *state_;
        bool just_spawned = false;
        if (st.pool.empty()) {
            spawn(t, main_out, event);
            just_spawned = true;
        } else {
            st.pool.frames_in_recovery += 1;
            if (st.pool.frames_in_recovery >= cfg_.recovery_reset_frames) {
                reset_pool(event, "reset");
                spawn(t, main_out, event);
                just_spawned = true;
            }
        }
        if (just_spawned || st.pool.empty()) return std::nullopt;

        // Score every branch on this frame's evidence.
        std::map<std::string, PredictorOutput> outputs;
        for (auto& branch : st.pool.branches) {
            if (branch.root.kind == RootId::Kind::absent) {
                BranchEvidence evidence;
                evidence.q = cfg_.epsilon;
                evidence.o = std::clamp(1.0 - main_out.primary.objectness, cfg_.epsilon,
                                        1.0);
                evidence.area = 0.0;
                step_score(branch, evidence, cfg_);
                continue;
            }
            pred_.apply_memory(branch.context, st.next_memory);
            PredictorOutput b_out = pred_.predict(t, branch.context);
            BranchEvidence evidence;
            evidence.q = b_out.primary.predicted_iou;
            evidence.o = b_out.primary.objectness;
            evidence.area = b_out.primary.geometry.area;
            evidence.s_app = appearance_score(b_out.pointer, st.bank);
            evidence.margin = candidate_margin(b_out.candidate_ious());
            if (!b_out.primary.geometry.absent()) {
                const auto predicted = branch.motion.predict();
                evidence.s_mot = predicted
                                     ? motion_score(b_out.primary.geometry.centroid,
                                                    *predicted, tau_m_pixels())
                                     : 1.0;
                evidence.s_geo =
                    geometry_score(b_out.primary.geometry, st.stats, st.small);
                branch.motion.push(b_out.primary.geometry.centroid);
            }
            step_score(branch, evidence, cfg_);
            branch.last_mask = b_out.primary;
            branch.last_pointer = b_out.pointer;
            branch.context = pred_.advance(t, branch.context, 0);
            outputs[branch.root.label()] = std::move(b_out);
        }

        // Prune, recording dropped hypotheses.
        std::vector<std::pair<std::string, double>> before;
        for (const auto& b : st.pool.branches) before.emplace_back(b.root.label(), b.score);
        prune(st.pool, cfg_);
        for (const auto& [label, score] : before) {
            const bool kept = std::any_of(
                st.pool.branches.begin(), st.pool.branches.end(),
                [&](const auto& b) { return b.root.label() == label; });
            if (!kept) event.branch_events.push_back({"prune", label, score});
        }

        // Win streaks: the argmax extends its run, everyone else resets.
        const std::size_t best = argmax_branch(st.pool);
        for (std::size_t i = 0; i < st.pool.branches.size(); ++i) {
            if (i == best)
                st.pool.branches[i].win_streak += 1;
            else
                st.pool.branches[i].win_streak = 0;
        }
        auto& winner = st.pool.branches[best];
        event.branch_events.push_back({"win", winner.root.label(), winner.score});

        const auto path = reconfirm_path(winner.win_streak, winner.last_evidence,
                                         st.store.miss_streak, cfg_);
        if (!path) return std::nullopt;

        // Commit: the reconfirmed branch context becomes the main path.
        Committed committed{winner.last_mask, winner.last_pointer,
                            outputs.count(winner.root.label())
                                ? outputs[winner.root.label()]
                                : main_out,
                            path};
        st.main_context = winner.context;
        st.motion = winner.motion;
        event.branch_events.push_back({"commit", winner.root.label(), winner.score});
        st.pool.clear();
        return committed;
    }

    void apply_stable_updates(int t, const Committed& committed, TraceEvent& event) {
        auto& st = *state_;
        const MaskGeometry& geom = committed.mask.geometry;
        st.stats = update_reference_stats(std::move(st.stats), geom, TrackingMode::stable);
        st.small = small_object_flag(st.stats, frame_size_, cfg_);
        st.bank.maybe_add(committed.pointer, committed.mask.predicted_iou,
                          TrackingMode::stable, t, cfg_);

        const bool reappear =
            committed.reconfirm && *committed.reconfirm == ReconfirmPath::relaxed;
        const bool distractor = distractor_signal(committed.source, st.stats, cfg_);
        const double ratio = geom.area / st.stats.median_area();
        const int gap = t - st.store.last_drm_frame;
        const bool candidate = drm_candidate(committed.mask.predicted_iou, gap, ratio,
                                             st.small, reappear, distractor, cfg_);
        const bool promoted = drm_promote(st.store, candidate, t, cfg_);
        event.memory.drm_candidate = candidate;
        event.memory.drm_promoted = promoted;
    }

    void decide_memory(int t, TrackingMode final_mode, TraceEvent& event) {
        auto& st = *state_;
        const int gamma = opts_.no_bypass
                              ? 0
                              : bypass_indicator(st.small, st.store.miss_streak,
                                                 final_mode);
        const int use_selection = 1 - gamma;
        const std::vector<int> selected =
            select_noncond(st.store, use_selection, cfg_.noncond_capacity);
        const std::vector<int> cond = conditioning_set(st.store, t + 1, cfg_);

        st.next_memory.conditioning = cond;
        st.next_memory.noncond = selected;
        st.next_memory.noncond_oldest =
            st.store.noncond.empty() ? -1 : st.store.noncond.front().frame;
        st.next_memory.noncond_newest =
            st.store.noncond.empty() ? -1 : st.store.noncond.back().frame;

        event.gamma = gamma;
        event.use_memory_selection = use_selection;
        event.memory.conditioning_set = cond;
        event.memory.noncond_selected = selected;
    }

    void fill_branch_summaries(TraceEvent& event) {
        const auto& st = *state_;
        for (const auto& b : st.pool.branches) {
            BranchSummary s;
            s.root = b.root.label();
            s.born = b.born;
            s.score = b.score;
            s.win_streak = b.win_streak;
            s.scored = b.scored;
            s.evidence = b.last_evidence;
            event.branches.push_back(std::move(s));
        }
    }

    const P& pred_;
    Config cfg_;
    RunOptions opts_;
    FrameSize frame_size_;
    std::optional<TrackerState<Context>> state_;
    TraceEvent init_event_;
};

/// Runs a full scripted sequence: one trace event per frame (written to
/// trace_path when non-empty), returning metrics against ground truth.
inline RunMetrics run_sequence(const ScenarioScript& script, const Config& cfg,
                               const RunOptions& options = {},
                               const std::string& trace_path = "",
                               std::vector<TraceEvent>* keep_events = nullptr) {
    const ScenarioPredictor predictor(script);
    Tracker<ScenarioPredictor> tracker(predictor, cfg, options);

    TraceWriter writer;
    if (!trace_path.empty()) writer = TraceWriter(trace_path);

    std::vector<TraceEvent> events;
    events.reserve(static_cast<std::size_t>(script.length));
    events.push_back(tracker.init_event());
    for (int t = 1; t < script.length; ++t) events.push_back(tracker.process_frame(t));
    for (const auto& e : events) writer.write(e);
    writer.close();

    const RunMetrics metrics = compute_metrics(events, predictor.ground_truth());
    if (keep_events) *keep_events = std::move(events);
    return metrics;
}

}  // namespace retrack
