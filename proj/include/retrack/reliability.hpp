#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "retrack/anchor_bank.hpp"
#include "retrack/config.hpp"
#include "retrack/geometry.hpp"
#include "retrack/reference.hpp"

namespace retrack {

/// Per-frame reliability cues for the committed path. margin is empty when
/// the predictor returned a single candidate (the "no competitor" case,
/// which passes every margin test).
struct ReliabilityReport {
    double top_iou = 0.0;
    double s_app = 0.0;
    double s_mot = 0.0;
    double s_geo = 0.0;
    std::optional<double> margin;
    std::optional<Point> predicted_center;
    TrackingMode mode = TrackingMode::stable;
};

inline double appearance_score(const ObjectPointer& pointer, const AnchorBank& bank) {
    return bank.best_similarity(pointer);
}

/// Constant-velocity prediction from the last two stable centers.
inline Point motion_predict(Point c_prev, Point c_prev2) {
    return Point{c_prev.x + (c_prev.x - c_prev2.x), c_prev.y + (c_prev.y - c_prev2.y)};
}

/// exp(-||c - c_hat|| / tau_m); 1 only at zero displacement.
inline double motion_score(Point c, Point c_hat, double tau_m) {
    if (!(tau_m > 0.0)) throw std::invalid_argument("motion_score: tau_m must be > 0");
    return std::exp(-distance(c, c_hat) / tau_m);
}

/// 0.7 * r_A + 0.3 * r_rho, clipped to [0,1]. For small objects the area
/// ratio is floored at 0.5 so size noise cannot dominate the score.
inline double geometry_score(const MaskGeometry& geom, const ReferenceStats& stats,
                             bool small) {
    if (geom.absent())
        throw std::invalid_argument("geometry_score: absent geometry rejected");
    if (stats.empty())
        throw std::invalid_argument("geometry_score: reference stats are empty");
    const double area_ref = stats.median_area();
    const double aspect_ref = stats.median_aspect();
    double r_area = std::min(geom.area / area_ref, area_ref / geom.area);
    const double r_aspect =
        std::min(geom.aspect_ratio / aspect_ref, aspect_ref / geom.aspect_ratio);
    if (small) r_area = std::max(r_area, 0.5);
    return std::clamp(0.7 * r_area + 0.3 * r_aspect, 0.0, 1.0);
}

/// Gap between the two largest candidate IoUs; empty when there is no
/// competitor (single candidate).
inline std::optional<double> candidate_margin(const std::vector<double>& ious) {
    if (ious.empty())
        throw std::invalid_argument("candidate_margin: empty candidate list");
    if (ious.size() == 1) return std::nullopt;
    double best = -1.0, second = -1.0;
    for (double q : ious) {
        if (q > best) {
            second = best;
            best = q;
        } else if (q > second) {
            second = q;
        }
    }
    return best - second;
}

/// True when the margin test "margin < tau" fires; the no-competitor case
/// never fires it.
inline bool margin_below(const std::optional<double>& margin, double tau) {
    return margin.has_value() && *margin < tau;
}

/// The three-case mode rule. Recovery cases are checked first; an absent
/// observation is recovery regardless of any score.
inline TrackingMode classify_mode(double q, double s_app, double s_mot, double s_geo,
                                  const std::optional<double>& margin, double area,
                                  const Config& cfg) {
    if (area <= 0.0 || q < cfg.tau_rec || s_app < cfg.tau_app_rec)
        return TrackingMode::recovery;
    if (q < cfg.tau_unc || s_app < cfg.tau_app_unc || s_mot < cfg.tau_mot ||
        s_geo < cfg.tau_geo || margin_below(margin, cfg.tau_delta))
        return TrackingMode::ambiguous;
    return TrackingMode::stable;
}

}  // namespace retrack
