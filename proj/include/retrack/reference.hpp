#pragma once

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <vector>

#include "retrack/config.hpp"
#include "retrack/geometry.hpp"

namespace retrack {

/// Median area and aspect ratio over a bounded window of stable-frame
/// geometry. Entries come only from frames the classifier committed as
/// stable; medians are recomputed exactly on every push.
class ReferenceStats {
public:
    explicit ReferenceStats(std::size_t window) : capacity_(window) {
        if (window < 1) throw std::invalid_argument("ReferenceStats: window must be >= 1");
    }

    void push(double area, double aspect) {
        if (!(area > 0.0))
            throw std::invalid_argument("ReferenceStats::push: area must be > 0");
        history_.emplace_back(area, aspect);
        if (history_.size() > capacity_) history_.pop_front();
        median_area_ = median([](const Entry& e) { return e.first; });
        median_aspect_ = median([](const Entry& e) { return e.second; });
    }

    double median_area() const { return median_area_; }
    double median_aspect() const { return median_aspect_; }
    std::size_t size() const { return history_.size(); }
    std::size_t window() const { return capacity_; }
    bool empty() const { return history_.empty(); }

    using Entry = std::pair<double, double>;
    const std::deque<Entry>& history() const { return history_; }

private:
    template <class Proj>
    double median(Proj proj) const {
        std::vector<double> values;
        values.reserve(history_.size());
        for (const auto& e : history_) values.push_back(proj(e));
        std::sort(values.begin(), values.end());
        const std::size_t n = values.size();
        return n % 2 == 1 ? values[n / 2]
                          : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    }

    std::deque<Entry> history_;
    std::size_t capacity_;
    double median_area_ = 0.0;
    double median_aspect_ = 0.0;
};

/// Appends (area, aspect) to the stable-history window iff the frame was
/// classified stable; any other mode leaves the stats untouched.
inline ReferenceStats update_reference_stats(ReferenceStats stats,
                                             const MaskGeometry& geometry,
                                             TrackingMode mode) {
    if (geometry.absent())
        throw std::invalid_argument("update_reference_stats: absent geometry rejected");
    if (mode == TrackingMode::stable)
        stats.push(geometry.area, geometry.aspect_ratio);
    return stats;
}

/// sigma_t: the target counts as small when its median reference area is
/// strictly below small_area_fraction of the frame area.
inline bool small_object_flag(const ReferenceStats& stats, FrameSize frame,
                              const Config& cfg) {
    if (stats.empty())
        throw std::invalid_argument("small_object_flag: reference stats are empty");
    return stats.median_area() < cfg.small_area_fraction * frame.area();
}

}  // namespace retrack
