#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retrack/sim_predictor.hpp"
#include "retrack/trace.hpp"

namespace retrack {

/// Desk-scale run summary computed against scripted ground truth.
struct RunMetrics {
    double identity_accuracy = 0.0;      // visible frames committed on the target
    double mean_frames_to_recover = 0.0; // occlusion end -> first correct commit
    int false_commit_count = 0;          // commits matched to a distractor
    double centroid_rmse = 0.0;          // over correctly identified commits
    int frames_stable = 0;
    int frames_ambiguous = 0;
    int frames_recovery = 0;
    int commits = 0;
    int occlusions = 0;
    int occlusions_recovered = 0;
};

namespace detail {

enum class MatchedIdentity { none, target, distractor };

inline MatchedIdentity match_commit(const Point& centroid, const GroundTruthFrame& gt,
                                    double* target_distance) {
    MatchedIdentity best = MatchedIdentity::none;
    double best_dist = 0.0;
    const double target_gate = std::max(2.5 * std::sqrt(std::max(gt.area, 1.0)), 12.0);
    const double d_target = distance(centroid, gt.center);
    if (gt.visible && d_target <= target_gate) {
        best = MatchedIdentity::target;
        best_dist = d_target;
        if (target_distance) *target_distance = d_target;
    }
    for (std::size_t k = 0; k < gt.distractor_centers.size(); ++k) {
        const double gate =
            std::max(2.5 * std::sqrt(std::max(gt.distractor_areas[k], 1.0)), 12.0);
        const double d = distance(centroid, gt.distractor_centers[k]);
        if (d > gate) continue;
        if (best == MatchedIdentity::none || d < best_dist) {
            best = MatchedIdentity::distractor;
            best_dist = d;
        }
    }
    return best;
}

}  // namespace detail

/// Scores a trace against ground truth. Occlusions that never recover count
/// the full remaining sequence length as their recovery time.
inline RunMetrics compute_metrics(const std::vector<TraceEvent>& trace,
                                  const GroundTruth& truth) {
    if (trace.size() != truth.frames.size())
        throw std::invalid_argument(
            "compute_metrics: trace covers " + std::to_string(trace.size()) +
            " frames but ground truth has " + std::to_string(truth.frames.size()));

    RunMetrics m;
    int visible_frames = 0;
    int correct_visible = 0;
    double sq_err_sum = 0.0;
    int matched_target = 0;
    std::vector<bool> correct_commit(trace.size(), false);

    for (std::size_t i = 0; i < trace.size(); ++i) {
        const TraceEvent& e = trace[i];
        const GroundTruthFrame& gt = truth.frames[i];
        switch (e.mode) {
            case TrackingMode::stable: ++m.frames_stable; break;
            case TrackingMode::ambiguous: ++m.frames_ambiguous; break;
            case TrackingMode::recovery: ++m.frames_recovery; break;
        }
        if (gt.visible) ++visible_frames;
        if (!e.commit) continue;
        ++m.commits;
        if (!e.committed_area || *e.committed_area <= 0.0 || !e.committed_centroid)
            continue;  // empty commit never matches anything
        double d_target = 0.0;
        const auto matched = detail::match_commit(*e.committed_centroid, gt, &d_target);
        if (matched == detail::MatchedIdentity::target) {
            correct_commit[i] = true;
            ++matched_target;
            sq_err_sum += d_target * d_target;
            if (gt.visible) ++correct_visible;
        } else if (matched == detail::MatchedIdentity::distractor) {
            ++m.false_commit_count;
        }
    }

    m.identity_accuracy =
        visible_frames == 0 ? 1.0 : static_cast<double>(correct_visible) / visible_frames;
    m.centroid_rmse = matched_target == 0 ? 0.0 : std::sqrt(sq_err_sum / matched_target);

    double recover_sum = 0.0;
    for (const auto& span : truth.occlusions) {
        if (span.end >= static_cast<int>(trace.size())) continue;  // no frames after it
        ++m.occlusions;
        std::optional<int> recovered;
        for (int t = span.end; t < static_cast<int>(trace.size()); ++t) {
            if (correct_commit[static_cast<std::size_t>(t)]) {
                recovered = t - span.end;
                break;
            }
        }
        if (recovered) {
            ++m.occlusions_recovered;
            recover_sum += *recovered;
        } else {
            recover_sum += static_cast<int>(trace.size()) - span.end;
        }
    }
    m.mean_frames_to_recover = m.occlusions == 0 ? 0.0 : recover_sum / m.occlusions;
    return m;
}

inline nlohmann::ordered_json to_json(const RunMetrics& m) {
    return nlohmann::ordered_json{{"identity_accuracy", m.identity_accuracy},
                                  {"mean_frames_to_recover", m.mean_frames_to_recover},
                                  {"false_commit_count", m.false_commit_count},
                                  {"centroid_rmse", m.centroid_rmse},
                                  {"frames_stable", m.frames_stable},
                                  {"frames_ambiguous", m.frames_ambiguous},
                                  {"frames_recovery", m.frames_recovery},
                                  {"commits", m.commits},
                                  {"occlusions", m.occlusions},
                                  {"occlusions_recovered", m.occlusions_recovered}};
}

}  // namespace retrack
