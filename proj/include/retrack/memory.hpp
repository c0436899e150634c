#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "retrack/config.hpp"
#include "retrack/geometry.hpp"
#include "retrack/reference.hpp"

namespace retrack {

/// Conditioning frames (frame 0 plus DRM promotions) and the recency buffer
/// of committed non-conditioning frames with their storage-time quality.
struct MemoryStore {
    struct NoncondEntry {
        int frame = 0;
        double quality = 0.0;  // objectness * predicted_iou at storage time
    };

    std::vector<int> conditioning{0};  // sorted, always contains 0
    std::deque<NoncondEntry> noncond;  // frame indices strictly increasing
    int last_drm_frame = 0;
    int promotion_streak = 0;  // u_t
    int miss_streak = 0;       // m_t^miss
};

/// What the governance layer hands the predictor for the next frame's query.
struct MemoryView {
    std::vector<int> conditioning;
    std::vector<int> noncond;
    int noncond_oldest = -1;
    int noncond_newest = -1;
};

/// Candidate test for delayed DRM promotion. gap is the frame distance to the
/// last insertion, ratio the current-to-reference size ratio. Reappearance
/// commits use the relaxed IoU threshold and waive the distractor signal.
inline bool drm_candidate(double q, int gap, double ratio, bool small, bool reappear,
                          bool distractor, const Config& cfg) {
    if (!(ratio > 0.0)) throw std::invalid_argument("drm_candidate: ratio must be > 0");
    const double tau = reappear ? cfg.tau_drm_reappear : cfg.tau_drm;
    const double lo = small ? cfg.r_min_small : cfg.r_min;
    const double hi = small ? cfg.r_max_small : cfg.r_max;
    return q >= tau && gap >= cfg.g_min && ratio >= lo && ratio <= hi &&
           (reappear || distractor);
}

/// Delayed promotion: candidate frames advance u_t, anything else resets it.
/// Insertion happens only once u_t reaches n_drm and resets the counter.
inline bool drm_promote(MemoryStore& store, bool candidate, int t, const Config& cfg) {
    if (!candidate) {
        store.promotion_streak = 0;
        return false;
    }
    store.promotion_streak += 1;
    if (store.promotion_streak < cfg.n_drm) return false;
    if (std::find(store.conditioning.begin(), store.conditioning.end(), t) ==
        store.conditioning.end()) {
        store.conditioning.push_back(t);
        std::sort(store.conditioning.begin(), store.conditioning.end());
    }
    store.last_drm_frame = t;
    store.promotion_streak = 0;
    return true;
}

/// gamma_t: native memory selection is bypassed only for small objects that
/// are currently missing or not in stable mode.
inline int bypass_indicator(bool small, int miss_streak, TrackingMode mode) {
    return (small && (miss_streak > 0 || mode != TrackingMode::stable)) ? 1 : 0;
}

/// Picks the non-conditioning frames for the next query. Native selection
/// takes the `budget` best-quality entries within the most recent 2*budget
/// (ties to the more recent); bypass strides uniformly over the whole buffer
/// so the oldest views stay reachable, always including the most recent.
inline std::vector<int> select_noncond(const MemoryStore& store, int use_selection,
                                       int budget) {
    if (budget < 1) throw std::invalid_argument("select_noncond: budget must be >= 1");
    const auto& buf = store.noncond;
    const int n = static_cast<int>(buf.size());
    std::vector<int> selected;
    if (n == 0) return selected;
    if (n <= budget) {
        for (const auto& e : buf) selected.push_back(e.frame);
        return selected;
    }
    if (use_selection) {
        const int window = std::min(n, 2 * budget);
        std::vector<int> idx(static_cast<std::size_t>(window));
        const int base = n - window;
        for (int i = 0; i < window; ++i) idx[static_cast<std::size_t>(i)] = base + i;
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            if (buf[a].quality != buf[b].quality) return buf[a].quality > buf[b].quality;
            return a > b;  // ties to the more recent entry
        });
        idx.resize(static_cast<std::size_t>(budget));
        std::sort(idx.begin(), idx.end());
        for (int i : idx) selected.push_back(buf[static_cast<std::size_t>(i)].frame);
    } else {
        for (int i = 0; i < budget; ++i) {
            const double pos =
                budget == 1 ? static_cast<double>(n - 1)
                            : static_cast<double>(i) * (n - 1) / (budget - 1);
            selected.push_back(buf[static_cast<std::size_t>(std::lround(pos))].frame);
        }
    }
    return selected;
}

/// C_t: frame 0 plus the K_c - 1 temporally closest DRM frames (ties to the
/// more recent). With keep_first_cond_frame off it is a plain top-K over all
/// conditioning frames.
inline std::vector<int> conditioning_set(const MemoryStore& store, int t,
                                         const Config& cfg) {
    if (std::find(store.conditioning.begin(), store.conditioning.end(), 0) ==
        store.conditioning.end())
        throw std::logic_error("conditioning_set: frame 0 missing from store");

    auto top_k = [&](std::vector<int> pool, int k) {
        std::sort(pool.begin(), pool.end(), [&](int a, int b) {
            const int da = std::abs(a - t), db = std::abs(b - t);
            if (da != db) return da < db;
            return a > b;  // ties to the more recent frame
        });
        if (static_cast<int>(pool.size()) > k) pool.resize(static_cast<std::size_t>(k));
        return pool;
    };

    if (!cfg.keep_first_cond_frame) return top_k(store.conditioning, cfg.k_c);

    std::vector<int> rest;
    for (int j : store.conditioning)
        if (j != 0) rest.push_back(j);
    std::vector<int> result{0};
    for (int j : top_k(std::move(rest), cfg.k_c - 1)) result.push_back(j);
    return result;
}

/// True when some alternative is both confident (iou >= tau_dist) and clearly
/// offset from the primary (distance > d_dist * sqrt(median area)).
inline bool distractor_signal(const PredictorOutput& output, const ReferenceStats& stats,
                              const Config& cfg) {
    if (output.primary.geometry.absent() || stats.empty()) return false;
    const double gate = cfg.d_dist * std::sqrt(stats.median_area());
    for (const auto& alt : output.alternatives) {
        if (alt.predicted_iou < cfg.tau_dist || alt.geometry.absent()) continue;
        if (distance(alt.geometry.centroid, output.primary.geometry.centroid) > gate)
            return true;
    }
    return false;
}

/// Stores a committed frame in the recency buffer (raw capacity 4x budget).
inline void store_noncond(MemoryStore& store, int frame, double quality,
                          const Config& cfg) {
    if (!store.noncond.empty() && frame <= store.noncond.back().frame)
        throw std::invalid_argument("store_noncond: frame indices must increase");
    store.noncond.push_back({frame, quality});
    while (store.noncond.size() >
           static_cast<std::size_t>(cfg.noncond_raw_capacity()))
        store.noncond.pop_front();
}

/// Missing-streak update: a visible committed frame resets the streak; a
/// frame without a visible committed target (empty commit, or no commit while
/// not stable) extends it.
inline void update_miss_streak(MemoryStore& store,
                               const std::optional<double>& committed_area,
                               TrackingMode mode) {
    if (committed_area.has_value()) {
        if (*committed_area > 0.0)
            store.miss_streak = 0;
        else
            store.miss_streak += 1;
        return;
    }
    if (mode != TrackingMode::stable) store.miss_streak += 1;
}

}  // namespace retrack
