#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "retrack/geometry.hpp"
#include "retrack/memory.hpp"
#include "retrack/rng.hpp"
#include "retrack/scenario.hpp"

namespace retrack {

struct GroundTruthFrame {
    bool visible = false;
    double vis = 0.0;
    Point center;
    double area = 0.0;
    double aspect = 1.0;
    std::vector<Point> distractor_centers;
    std::vector<double> distractor_areas;
    std::string primary_identity = "none";  // target | distractor-k | none
};

struct GroundTruth {
    std::vector<GroundTruthFrame> frames;
    std::vector<OcclusionSpan> occlusions;
};

/// Scripted predictor implementing the abstract per-frame interface.
///
/// Outputs are a pure function of (script, frame, context): every draw comes
/// from a stream keyed on the scenario seed, the frame, the tracked identity
/// and a purpose tag, so queries are replay-exact and safe to issue from any
/// thread in any order.
///
/// Behavioural model (desk-scale stand-in for a real backbone):
///   - While its object is visible, a context yields that object's geometry
///     plus bounded jitter, predicted IoU near 0.9 and a pointer blended
///     toward the identity archetype.
///   - Fully occluded frames yield the absent observation with predicted IoU
///     at noise floor, so accumulated evidence genuinely collapses.
///   - A look-alike near the tracked object is emitted as an extra candidate;
///     deep crossings force a sub-threshold margin, and on seeded frames the
///     ranking flips so the look-alike takes the primary slot.
///   - After a disappearance gap, re-detection is delayed by the health of
///     the memories attached to the query: mean view quality of the selected
///     non-conditioning frames plus their temporal reach, with a bonus for
///     the initial conditioning frame. Contexts that were not advanced
///     recently (a frozen main path) re-detect much later than actively
///     propagated ones.
class ScenarioPredictor {
public:
    struct Context {
        enum class Lock { target, distractor, none };
        Lock lock = Lock::target;
        int lock_index = 0;  // distractor index when lock == distractor
        int last_adopt = -1;
        int last_visible_adopt = -1;
        MemoryView memory;
    };

    explicit ScenarioPredictor(ScenarioScript script) : script_(std::move(script)) {
        validate_script(script_);
        auto rng = derive_stream(script_.seed, kTagArchetype);
        target_archetype_ = ObjectPointer(random_unit_vector(rng, script_.pointer_dim));
        for (const auto& d : script_.distractors)
            distractor_archetypes_.push_back(
                make_similar_archetype(target_archetype_, d.similarity, rng));
    }

    const ScenarioScript& script() const { return script_; }

    Context init() const { return Context{}; }

    PredictorOutput predict(int t, const Context& ctx) const {
        check_frame(t);
        const auto records = emit(t, ctx);
        PredictorOutput out;
        out.frame_index = t;
        out.primary = records.front().mask;
        for (std::size_t i = 1; i < records.size(); ++i)
            out.alternatives.push_back(records[i].mask);
        out.pointer = pointer_for(t, records.front());
        return out;
    }

    /// Context propagation after adopting candidate `index` of this frame's
    /// output (0 = primary). The lock is sticky: adoption refreshes the
    /// context but keeps it prompted on the same object.
    Context advance(int t, const Context& ctx, int index) const {
        check_frame(t);
        const auto records = emit(t, ctx);
        if (index < 0 || index >= static_cast<int>(records.size()))
            throw std::out_of_range("ScenarioPredictor::advance: bad candidate index");
        Context next = ctx;
        next.last_adopt = t;
        if (!records[static_cast<std::size_t>(index)].mask.geometry.absent())
            next.last_visible_adopt = t;
        return next;
    }

    /// Re-prompts the predictor with candidate `index` of this frame's
    /// output, yielding a context locked on that candidate's object. Fails
    /// (drops the branch) when the candidate carries no object.
    std::optional<Context> hint(int t, const Context& ctx, int index) const {
        check_frame(t);
        const auto records = emit(t, ctx);
        if (index < 0 || index >= static_cast<int>(records.size())) return std::nullopt;
        const auto& rec = records[static_cast<std::size_t>(index)];
        if (rec.lock == Context::Lock::none) return std::nullopt;
        Context next = ctx;
        next.lock = rec.lock;
        next.lock_index = rec.lock_index;
        next.last_adopt = t;
        next.last_visible_adopt = t;
        return next;
    }

    void apply_memory(Context& ctx, const MemoryView& view) const { ctx.memory = view; }

    /// Health in [0,1] of the memories attached to a query; drives the
    /// re-detection delay after a gap.
    double memory_health(const Context& ctx) const {
        const auto& mem = ctx.memory;
        double view_sum = 0.0;
        int view_count = 0;
        for (int j : mem.noncond) {
            view_sum += visibility(script_, j);
            ++view_count;
        }
        const bool has_first = std::find(mem.conditioning.begin(), mem.conditioning.end(),
                                         0) != mem.conditioning.end();
        if (has_first) {
            view_sum += 1.0;
            ++view_count;
        }
        const double mean_view = view_count == 0 ? 1.0 : view_sum / view_count;

        double reach = 1.0;
        if (!mem.noncond.empty() && mem.noncond_newest > mem.noncond_oldest) {
            const auto [lo, hi] = std::minmax_element(mem.noncond.begin(), mem.noncond.end());
            reach = static_cast<double>(*hi - *lo) /
                    static_cast<double>(mem.noncond_newest - mem.noncond_oldest);
        }
        double h = 0.45 * mean_view + 0.55 * reach;
        if (!has_first) h = std::max(0.0, h - 0.25);
        return std::clamp(h, 0.0, 1.0);
    }

    /// Frames a context needs after reappearance before it finds the target.
    int redetect_delay(int t, const Context& ctx) const {
        const double h = memory_health(ctx);
        int delay = h >= 0.85 ? 0 : (h >= 0.65 ? 2 : 4);
        const int run_start = t - visible_run_length(script_, t) + 1;
        if (delay > 0) {
            auto rng = derive_stream(script_.seed, kTagDelay,
                                     static_cast<std::uint64_t>(run_start));
            delay += static_cast<int>(rng.next_below(2));
        }
        const bool hot = (t - ctx.last_adopt) <= 1;  // init context counts as hot
        if (!hot) delay += kColdPenalty;
        return delay;
    }

    GroundTruth ground_truth() const {
        GroundTruth gt;
        gt.occlusions = script_.occlusions;
        gt.frames.resize(static_cast<std::size_t>(script_.length));
        for (int t = 0; t < script_.length; ++t) {
            auto& f = gt.frames[static_cast<std::size_t>(t)];
            const TargetState ts = target_at(script_, t);
            const double v = visibility(script_, t);
            f.vis = v;
            f.visible = v > 0.0;
            f.center = ts.center;
            f.area = ts.area;
            f.aspect = ts.aspect;
            f.primary_identity = f.visible ? "target" : "none";
            for (std::size_t d = 0; d < script_.distractors.size(); ++d) {
                const TargetState ds = interpolate_path(script_.distractors[d].path,
                                                        t);
                f.distractor_centers.push_back(ds.center);
                f.distractor_areas.push_back(ds.area);
                if (f.visible && rank_swap(t) &&
                    distance(ds.center, ts.center) < kDeepRadius * std::sqrt(ts.area))
                    f.primary_identity = "distractor-" + std::to_string(d + 1);
            }
        }
        return gt;
    }

    const ObjectPointer& target_archetype() const { return target_archetype_; }
    const ObjectPointer& distractor_archetype(std::size_t i) const {
        return distractor_archetypes_.at(i);
    }

private:
    // Emission geometry, relative to sqrt(target area).
    static constexpr double kEmitRadius = 4.0;
    static constexpr double kDeepRadius = 1.2;
    static constexpr double kProxScale = 2.2;
    static constexpr int kColdPenalty = 8;
    static constexpr int kReacquireWindow = 4;

    // Stream purpose tags.
    static constexpr std::uint64_t kTagArchetype = 1;
    static constexpr std::uint64_t kTagGeometry = 2;
    static constexpr std::uint64_t kTagIou = 3;
    static constexpr std::uint64_t kTagPointer = 4;
    static constexpr std::uint64_t kTagJunk = 5;
    static constexpr std::uint64_t kTagSwap = 6;
    static constexpr std::uint64_t kTagDelay = 7;
    static constexpr std::uint64_t kTagMargin = 8;

    struct CandidateRecord {
        CandidateMask mask;
        Context::Lock lock = Context::Lock::none;
        int lock_index = 0;
    };

    void check_frame(int t) const {
        if (t < 0 || t >= script_.length)
            throw std::out_of_range("ScenarioPredictor: frame " + std::to_string(t) +
                                    " outside [0, " + std::to_string(script_.length) + ")");
    }

    static ObjectPointer make_similar_archetype(const ObjectPointer& base,
                                                double similarity, Xoshiro256ss& rng) {
        // Unit vector with exact cosine `similarity` to the base archetype.
        ObjectPointer raw(random_unit_vector(rng, static_cast<int>(base.v.size())));
        const double along = cosine(raw, base);
        ObjectPointer ortho = raw;
        for (std::size_t i = 0; i < ortho.v.size(); ++i)
            ortho.v[i] -= along * base.v[i];
        ortho.normalize();
        ObjectPointer result = base;
        const double s = std::clamp(similarity, -1.0, 1.0);
        const double orth_mag = std::sqrt(std::max(0.0, 1.0 - s * s));
        for (std::size_t i = 0; i < result.v.size(); ++i)
            result.v[i] = s * base.v[i] + orth_mag * ortho.v[i];
        result.normalize();
        return result;
    }

    bool rank_swap(int t) const {
        auto rng = derive_stream(script_.seed, kTagSwap, static_cast<std::uint64_t>(t));
        return rng.coin(0.4);
    }

    std::uint64_t lock_salt(Context::Lock lock, int index) const {
        switch (lock) {
            case Context::Lock::target: return 0x10;
            case Context::Lock::distractor: return 0x20 + static_cast<std::uint64_t>(index);
            case Context::Lock::none: return 0x40;
        }
        return 0x40;
    }

    CandidateRecord junk_candidate(int t) const {
        auto rng = derive_stream(script_.seed, kTagJunk, static_cast<std::uint64_t>(t));
        CandidateRecord rec;
        rec.lock = Context::Lock::none;
        rec.mask.geometry = MaskGeometry::absent_observation(script_.frame_size);
        // Predicted IoU at or below the score clamp so accumulated branch
        // evidence genuinely collapses during a gap.
        rec.mask.predicted_iou = rng.uniform(0.0, 1e-4);
        rec.mask.objectness = rng.uniform(0.02, 0.05);
        return rec;
    }

    CandidateMask object_mask(int t, Context::Lock lock, int index, double vis_fraction,
                              const TargetState& state, double base_iou) const {
        const std::uint64_t salt = lock_salt(lock, index);
        auto geo = derive_stream(script_.seed, kTagGeometry, static_cast<std::uint64_t>(t),
                                 salt);
        auto iou = derive_stream(script_.seed, kTagIou, static_cast<std::uint64_t>(t), salt);
        CandidateMask mask;
        mask.geometry.frame_size = script_.frame_size;
        mask.geometry.area =
            std::max(1.0, state.area * vis_fraction * (1.0 + geo.jitter(0.08)));
        mask.geometry.centroid =
            Point{state.center.x + geo.jitter(script_.noise.sigma_center),
                  state.center.y + geo.jitter(script_.noise.sigma_center)};
        mask.geometry.aspect_ratio = std::max(0.05, state.aspect * (1.0 + geo.jitter(0.05)));
        mask.predicted_iou = std::clamp(
            base_iou * std::sqrt(vis_fraction) + iou.jitter(script_.noise.sigma_iou), 0.0,
            0.99);
        mask.objectness =
            std::clamp(0.55 + 0.35 * vis_fraction + iou.jitter(0.03), 0.01, 0.99);
        return mask;
    }

    /// Candidate list for (t, ctx), primary first. Deterministic.
    std::vector<CandidateRecord> emit(int t, const Context& ctx) const {
        std::vector<CandidateRecord> records;

        const TargetState target = target_at(script_, t);
        const double target_vis = visibility(script_, t);

        // The tracked object itself.
        bool self_found = false;
        TargetState self_state = target;
        double self_vis = 1.0;
        if (ctx.lock == Context::Lock::target) {
            const int run = visible_run_length(script_, t);
            self_vis = target_vis;
            self_found = run > 0 && run > redetect_delay(t, ctx);
        } else if (ctx.lock == Context::Lock::distractor &&
                   ctx.lock_index < static_cast<int>(script_.distractors.size())) {
            self_state = interpolate_path(
                script_.distractors[static_cast<std::size_t>(ctx.lock_index)].path, t);
            self_found = true;  // distractors are never scripted out of view
        }

        if (!self_found) {
            records.push_back(junk_candidate(t));
            return records;
        }

        const bool reacquiring = ctx.lock == Context::Lock::target &&
                                 visible_run_length(script_, t) <= kReacquireWindow &&
                                 had_gap_before_run(t);
        double base_iou = ctx.lock == Context::Lock::target ? 0.90 : 0.87;
        if (reacquiring) base_iou *= 0.55 + 0.45 * memory_health(ctx);

        CandidateRecord self;
        self.lock = ctx.lock;
        self.lock_index = ctx.lock_index;
        self.mask = object_mask(t, ctx.lock, ctx.lock_index, self_vis, self_state, base_iou);
        records.push_back(self);

        // Look-alikes near the tracked object become extra candidates.
        const double scale = std::sqrt(std::max(1.0, self_state.area));
        auto margin_rng =
            derive_stream(script_.seed, kTagMargin, static_cast<std::uint64_t>(t));
        auto consider_other = [&](Context::Lock lock, int index,
                                  const TargetState& state, double vis_fraction) {
            if (vis_fraction <= 0.0) return;
            const double dist = distance(state.center, self_state.center);
            if (dist > kEmitRadius * scale) return;
            CandidateRecord other;
            other.lock = lock;
            other.lock_index = index;
            other.mask = object_mask(t, lock, index, vis_fraction, state, 0.87);
            if (dist < kDeepRadius * scale) {
                // Deep crossing: force a sub-threshold margin; on seeded swap
                // frames the look-alike outranks the tracked target.
                const double self_q = records.front().mask.predicted_iou;
                if (ctx.lock == Context::Lock::target && rank_swap(t))
                    other.mask.predicted_iou = std::min(0.99, self_q + margin_rng.uniform(0.02, 0.06));
                else
                    other.mask.predicted_iou = std::max(0.0, self_q - margin_rng.uniform(0.02, 0.08));
            } else {
                const double prox = std::clamp(1.0 - dist / (kProxScale * scale), 0.0, 1.0);
                other.mask.predicted_iou = std::clamp(
                    0.56 + 0.20 * prox + margin_rng.jitter(script_.noise.sigma_iou), 0.0,
                    0.99);
            }
            records.push_back(std::move(other));
        };

        if (ctx.lock == Context::Lock::target) {
            for (std::size_t d = 0; d < script_.distractors.size(); ++d) {
                const TargetState ds =
                    interpolate_path(script_.distractors[d].path, t);
                consider_other(Context::Lock::distractor, static_cast<int>(d), ds, 1.0);
            }
        } else if (ctx.lock == Context::Lock::distractor) {
            consider_other(Context::Lock::target, 0, target, target_vis);
        }

        std::stable_sort(records.begin(), records.end(),
                         [](const CandidateRecord& a, const CandidateRecord& b) {
                             return a.mask.predicted_iou > b.mask.predicted_iou;
                         });
        return records;
    }

    bool had_gap_before_run(int t) const {
        const int run = visible_run_length(script_, t);
        const int before = t - run;
        return before >= 0 && visibility(script_, before) <= 0.0;
    }

    ObjectPointer pointer_for(int t, const CandidateRecord& primary) const {
        auto rng = derive_stream(script_.seed, kTagPointer, static_cast<std::uint64_t>(t),
                                 lock_salt(primary.lock, primary.lock_index));
        ObjectPointer noise(random_unit_vector(rng, script_.pointer_dim));
        const ObjectPointer* archetype = nullptr;
        double vis_fraction = 1.0;
        if (primary.lock == Context::Lock::target) {
            archetype = &target_archetype_;
            vis_fraction = visibility(script_, t);
        } else if (primary.lock == Context::Lock::distractor) {
            archetype = &distractor_archetypes_.at(
                static_cast<std::size_t>(primary.lock_index));
        }
        if (archetype == nullptr) return noise;  // junk pointer

        const double alpha =
            vis_fraction >= 1.0 ? (1.0 - script_.noise.sigma_pointer * 0.6)
                                : std::clamp(0.5 + 0.47 * vis_fraction, 0.0, 0.97);
        ObjectPointer p = *archetype;
        for (std::size_t i = 0; i < p.v.size(); ++i)
            p.v[i] = alpha * p.v[i] + (1.0 - alpha) * noise.v[i];
        p.normalize();
        return p;
    }

    ScenarioScript script_;
    ObjectPointer target_archetype_;
    std::vector<ObjectPointer> distractor_archetypes_;
};

inline GroundTruth ground_truth(const ScenarioScript& script) {
    return ScenarioPredictor(script).ground_truth();
}

}  // namespace retrack
