#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace retrack {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(Point a, Point b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

struct FrameSize {
    int width = 0;
    int height = 0;

    double diagonal() const {
        return std::hypot(static_cast<double>(width), static_cast<double>(height));
    }
    double area() const { return static_cast<double>(width) * height; }
    bool operator==(const FrameSize&) const = default;
};

/// Summary of a predicted mask: everything downstream of the predictor works
/// on these four features, never on pixels. area == 0 is the "absent"
/// observation; centroid and aspect_ratio are meaningless in that case.
struct MaskGeometry {
    double area = 0.0;
    Point centroid{0.0, 0.0};
    double aspect_ratio = 1.0;
    FrameSize frame_size{0, 0};

    bool absent() const { return area <= 0.0; }

    static MaskGeometry absent_observation(FrameSize frame) {
        MaskGeometry g;
        g.frame_size = frame;
        return g;
    }
};

/// Dense boolean grid; accepted only by geometry_summary.
struct Bitmask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> cells;  // row-major, size width*height

    Bitmask() = default;
    Bitmask(int w, int h) : width(w), height(h), cells(static_cast<std::size_t>(w) * h, 0) {}

    bool at(int x, int y) const {
        return cells[static_cast<std::size_t>(y) * width + x] != 0;
    }
    void set(int x, int y, bool value = true) {
        cells[static_cast<std::size_t>(y) * width + x] = value ? 1 : 0;
    }
};

/// Reduces a bitmask to its geometry summary. An all-false grid yields the
/// absent observation; bounding-box dimensions count cells, so a single row
/// or column still has a finite aspect ratio.
inline MaskGeometry geometry_summary(const Bitmask& mask) {
    if (mask.width < 1 || mask.height < 1)
        throw std::invalid_argument("geometry_summary: grid dimensions must be >= 1x1");

    long count = 0;
    double sum_x = 0.0, sum_y = 0.0;
    int min_x = mask.width, max_x = -1, min_y = mask.height, max_y = -1;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            ++count;
            sum_x += x;
            sum_y += y;
            min_x = std::min(min_x, x);
            max_x = std::max(max_x, x);
            min_y = std::min(min_y, y);
            max_y = std::max(max_y, y);
        }
    }

    MaskGeometry g;
    g.frame_size = FrameSize{mask.width, mask.height};
    if (count == 0) return g;  // absent observation, not an error

    g.area = static_cast<double>(count);
    g.centroid = Point{sum_x / count, sum_y / count};
    const double bbox_w = static_cast<double>(max_x - min_x + 1);
    const double bbox_h = static_cast<double>(max_y - min_y + 1);
    g.aspect_ratio = bbox_w / bbox_h;
    return g;
}

/// Unit-norm appearance embedding produced by the predictor.
struct ObjectPointer {
    std::vector<double> v;

    ObjectPointer() = default;
    explicit ObjectPointer(std::vector<double> values) : v(std::move(values)) {}

    double norm() const {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    }

    void normalize() {
        const double n = norm();
        if (n <= 0.0)
            throw std::invalid_argument("ObjectPointer::normalize: zero vector");
        for (double& x : v) x /= n;
    }

    ObjectPointer normalized() const {
        ObjectPointer p = *this;
        p.normalize();
        return p;
    }
};

/// Cosine of two pointers, assuming both are already unit norm.
inline double cosine(const ObjectPointer& a, const ObjectPointer& b) {
    if (a.v.size() != b.v.size())
        throw std::invalid_argument("cosine: pointer dimensions differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

struct CandidateMask {
    MaskGeometry geometry;
    double predicted_iou = 0.0;  // predictor's self-estimated mask quality
    double objectness = 0.0;     // probability a target is present
};

/// One frame's result from the (abstract) predictor. Alternatives are sorted
/// by predicted_iou descending and never exceed the primary.
struct PredictorOutput {
    CandidateMask primary;
    std::vector<CandidateMask> alternatives;
    ObjectPointer pointer;
    int frame_index = 0;

    std::vector<double> candidate_ious() const {
        std::vector<double> q;
        q.reserve(1 + alternatives.size());
        q.push_back(primary.predicted_iou);
        for (const auto& alt : alternatives) q.push_back(alt.predicted_iou);
        return q;
    }
};

enum class TrackingMode { stable, ambiguous, recovery };

inline const char* to_string(TrackingMode m) {
    switch (m) {
        case TrackingMode::stable: return "stable";
        case TrackingMode::ambiguous: return "ambiguous";
        case TrackingMode::recovery: return "recovery";
    }
    return "stable";
}

inline TrackingMode mode_from_string(const std::string& s) {
    if (s == "stable") return TrackingMode::stable;
    if (s == "ambiguous") return TrackingMode::ambiguous;
    if (s == "recovery") return TrackingMode::recovery;
    throw std::invalid_argument("unknown tracking mode: " + s);
}

}  // namespace retrack
