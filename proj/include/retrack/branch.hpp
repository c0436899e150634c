#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "retrack/config.hpp"
#include "retrack/geometry.hpp"

namespace retrack {

/// Identity of the hypothesis a branch was spawned from. Ordering gives the
/// deterministic pruning tie-break: primary, then alternatives in ascending
/// index, then absent.
struct RootId {
    enum class Kind { primary = 0, alt = 1, absent = 2 };
    Kind kind = Kind::primary;
    int alt_index = 0;  // 1-based, meaningful only for Kind::alt

    static RootId primary() { return RootId{Kind::primary, 0}; }
    static RootId alt(int index) { return RootId{Kind::alt, index}; }
    static RootId absent() { return RootId{Kind::absent, 0}; }

    bool operator==(const RootId&) const = default;

    // priority order for tie-breaks: lower compares first
    friend bool operator<(const RootId& a, const RootId& b) {
        if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        return a.alt_index < b.alt_index;
    }

    std::string label() const {
        switch (kind) {
            case Kind::primary: return "primary";
            case Kind::alt: return "alt-" + std::to_string(alt_index);
            case Kind::absent: return "absent";
        }
        return "primary";
    }
};

/// Last two adopted visible centers, enough for the constant-velocity
/// prediction. Owned per branch and by the main path.
struct MotionHistory {
    std::optional<Point> prev;   // most recent
    std::optional<Point> prev2;  // one before

    void push(Point c) {
        prev2 = prev;
        prev = c;
    }

    bool full() const { return prev.has_value() && prev2.has_value(); }

    std::optional<Point> predict() const {
        if (!full()) return std::nullopt;
        return Point{prev->x + (prev->x - prev2->x), prev->y + (prev->y - prev2->y)};
    }
};

/// One frame of evidence for a branch, exactly the terms of the accumulated
/// score. margin is carried for the reconfirmation test only.
struct BranchEvidence {
    double q = 0.0;
    double o = 0.0;
    double s_app = 0.0;
    double s_mot = 0.0;
    double s_geo = 0.0;
    double area = 0.0;
    std::optional<double> margin;
};

/// S <- S + log(max(q,eps)) + 0.5*log(max(o,eps))
///        + lambda_a*s_app + lambda_m*s_mot + lambda_g*s_geo
///        - lambda_e*[area == 0]
inline double step_increment(const BranchEvidence& e, const Config& cfg) {
    double inc = std::log(std::max(e.q, cfg.epsilon)) +
                 0.5 * std::log(std::max(e.o, cfg.epsilon)) +
                 cfg.lambda_a * e.s_app + cfg.lambda_m * e.s_mot +
                 cfg.lambda_g * e.s_geo;
    if (e.area <= 0.0) inc -= cfg.lambda_e;
    return inc;
}

/// One recovery hypothesis with its private inference context.
template <class Context>
struct Branch {
    RootId root;
    int born = 0;  // spawn frame
    Context context;
    double score = 0.0;
    int win_streak = 0;
    CandidateMask last_mask;
    ObjectPointer last_pointer;
    MotionHistory motion;
    BranchEvidence last_evidence;
    bool scored = false;  // false until the first post-spawn step
};

template <class Context>
struct BranchPool {
    std::vector<Branch<Context>> branches;
    int frames_in_recovery = 0;

    bool empty() const { return branches.empty(); }
    std::size_t size() const { return branches.size(); }
    void clear() {
        branches.clear();
        frames_in_recovery = 0;
    }
};

/// Applies one evidence step and returns the new accumulated score.
template <class Context>
double step_score(Branch<Context>& branch, const BranchEvidence& evidence,
                  const Config& cfg) {
    branch.score += step_increment(evidence, cfg);
    branch.last_evidence = evidence;
    branch.scored = true;
    return branch.score;
}

namespace detail {

template <class Context>
bool branch_order(const Branch<Context>& a, const Branch<Context>& b) {
    if (a.score != b.score) return a.score > b.score;
    if (!(a.root == b.root)) return a.root < b.root;
    return a.born < b.born;
}

}  // namespace detail

/// Keeps the best branch per root identity, then the global top branch_keep,
/// with the deterministic tie-break (root priority, then earlier spawn).
template <class Context>
void prune(BranchPool<Context>& pool, const Config& cfg) {
    auto& branches = pool.branches;
    std::stable_sort(branches.begin(), branches.end(), detail::branch_order<Context>);
    std::vector<Branch<Context>> kept;
    kept.reserve(branches.size());
    for (auto& b : branches) {
        const bool duplicate_root =
            std::any_of(kept.begin(), kept.end(),
                        [&](const Branch<Context>& k) { return k.root == b.root; });
        if (!duplicate_root) kept.push_back(std::move(b));
    }
    if (kept.size() > static_cast<std::size_t>(cfg.branch_keep))
        kept.resize(static_cast<std::size_t>(cfg.branch_keep));
    branches = std::move(kept);
}

/// Index of the pool argmax under the same deterministic ordering as prune.
template <class Context>
std::size_t argmax_branch(const BranchPool<Context>& pool) {
    if (pool.empty()) throw std::logic_error("argmax_branch: empty pool");
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.branches.size(); ++i)
        if (detail::branch_order(pool.branches[i], pool.branches[best])) best = i;
    return best;
}

enum class ReconfirmPath { generic, relaxed };

inline const char* to_string(ReconfirmPath p) {
    return p == ReconfirmPath::relaxed ? "relaxed" : "generic";
}

/// Reconfirmation rule for the current pool argmax. After a missing streak of
/// at least l_miss the relaxed single-win rule applies; otherwise the generic
/// rule demands several consecutive wins and strong appearance agreement.
/// Either way an absent observation can never reconfirm.
inline std::optional<ReconfirmPath> reconfirm_path(int win_streak,
                                                   const BranchEvidence& evidence,
                                                   int miss_streak, const Config& cfg) {
    if (evidence.area <= 0.0) return std::nullopt;
    if (miss_streak >= cfg.l_miss) {
        const bool margin_ok =
            !evidence.margin.has_value() || *evidence.margin >= cfg.tau_rep_delta;
        if (win_streak >= 1 && evidence.q >= cfg.tau_rep_iou &&
            evidence.s_app >= cfg.tau_rep_app && margin_ok)
            return ReconfirmPath::relaxed;
        return std::nullopt;
    }
    if (win_streak >= cfg.n_win && evidence.s_app >= cfg.tau_reconf_app)
        return ReconfirmPath::generic;
    return std::nullopt;
}

template <class Context>
bool check_reconfirm(const BranchPool<Context>& pool, int miss_streak,
                     const BranchEvidence& argmax_evidence, const Config& cfg) {
    const auto& winner = pool.branches[argmax_branch(pool)];
    return reconfirm_path(winner.win_streak, argmax_evidence, miss_streak, cfg)
        .has_value();
}

/// Builds a fresh pool from the current predictor output: a primary-rooted
/// branch, up to branch_keep - 2 alternative-rooted branches (each obtained
/// by re-prompting the predictor with the alternative), and an absent-rooted
/// hypothesis. A failed hint query drops that branch only.
template <class Predictor>
BranchPool<typename Predictor::Context> spawn_pool(
    const Predictor& predictor, int t, const typename Predictor::Context& main_context,
    const PredictorOutput& output, const MotionHistory& main_motion,
    const Config& cfg) {
    using Context = typename Predictor::Context;
    BranchPool<Context> pool;

    auto add_visible = [&](RootId root, int candidate_index, const CandidateMask& mask) {
        auto ctx = predictor.hint(t, main_context, candidate_index);
        if (!ctx) return;  // hint failure drops the branch, never the pool
        Branch<Context> b;
        b.root = root;
        b.born = t;
        b.context = *ctx;
        b.last_mask = mask;
        b.last_pointer = output.pointer;
        b.motion = main_motion;
        if (!mask.geometry.absent()) b.motion.push(mask.geometry.centroid);
        pool.branches.push_back(std::move(b));
    };

    add_visible(RootId::primary(), 0, output.primary);
    const int alt_budget = std::max(0, cfg.branch_keep - 2);
    const int alt_count =
        std::min<int>(alt_budget, static_cast<int>(output.alternatives.size()));
    for (int k = 0; k < alt_count; ++k)
        add_visible(RootId::alt(k + 1), k + 1, output.alternatives[k]);

    if (cfg.branch_keep >= 2) {
        Branch<Context> absent;
        absent.root = RootId::absent();
        absent.born = t;
        absent.context = main_context;
        absent.last_mask.geometry =
            MaskGeometry::absent_observation(output.primary.geometry.frame_size);
        absent.last_pointer = output.pointer;
        absent.motion = main_motion;
        pool.branches.push_back(std::move(absent));
    }

    prune(pool, cfg);
    return pool;
}

}  // namespace retrack
