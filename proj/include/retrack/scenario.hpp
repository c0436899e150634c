#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retrack/config.hpp"
#include "retrack/geometry.hpp"
#include "retrack/rng.hpp"

namespace retrack {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Keyframe {
    int frame = 0;
    Point center;
    double area = 0.0;
    double aspect = 1.0;

    bool operator==(const Keyframe& other) const {
        return frame == other.frame && center.x == other.center.x &&
               center.y == other.center.y && area == other.area &&
               aspect == other.aspect;
    }
};

/// Scripted occlusion: fully hidden on [start, end); over the `approach`
/// frames before start the visible fraction ramps linearly down to zero
/// (creeping partial occlusion). Reappearance at `end` is instant.
struct OcclusionSpan {
    int start = 0;
    int end = 0;  // exclusive
    int approach = 0;

    bool operator==(const OcclusionSpan&) const = default;
};

struct DistractorSpec {
    std::vector<Keyframe> path;
    double similarity = 0.8;  // appearance similarity to the target in [0,1]

    bool operator==(const DistractorSpec&) const = default;
};

struct NoiseSpec {
    double sigma_center = 1.2;   // centroid jitter, pixels
    double sigma_iou = 0.04;     // predicted-IoU jitter
    double sigma_pointer = 0.05; // pointer blend noise

    bool operator==(const NoiseSpec&) const = default;
};

/// Deterministic ground-truth description driving the simulated predictor.
/// (kind, seed, config) fully determine the script; the script plus the seed
/// fully determine every predictor output.
struct ScenarioScript {
    std::string kind = "steady";
    std::uint64_t seed = 0;
    int length = 0;
    FrameSize frame_size{640, 480};
    int pointer_dim = 64;
    std::vector<Keyframe> target;
    std::vector<OcclusionSpan> occlusions;
    std::vector<DistractorSpec> distractors;
    NoiseSpec noise;

    bool operator==(const ScenarioScript&) const = default;
};

enum class ScenarioKind { steady, occlusion, distractor, reappear_small };

inline const char* to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::steady: return "steady";
        case ScenarioKind::occlusion: return "occlusion";
        case ScenarioKind::distractor: return "distractor";
        case ScenarioKind::reappear_small: return "reappear-small";
    }
    return "steady";
}

inline ScenarioKind scenario_kind_from_string(const std::string& s) {
    if (s == "steady") return ScenarioKind::steady;
    if (s == "occlusion") return ScenarioKind::occlusion;
    if (s == "distractor") return ScenarioKind::distractor;
    if (s == "reappear-small") return ScenarioKind::reappear_small;
    throw ScenarioError("unknown scenario kind: '" + s + "'");
}

struct TargetState {
    Point center;
    double area = 0.0;
    double aspect = 1.0;
};

/// Linear interpolation over keyframes, clamped outside the keyed range.
inline TargetState interpolate_path(const std::vector<Keyframe>& path, int t) {
    if (path.empty()) throw ScenarioError("interpolate_path: empty keyframe list");
    if (t <= path.front().frame) {
        const auto& k = path.front();
        return TargetState{k.center, k.area, k.aspect};
    }
    if (t >= path.back().frame) {
        const auto& k = path.back();
        return TargetState{k.center, k.area, k.aspect};
    }
    for (std::size_t i = 1; i < path.size(); ++i) {
        if (t > path[i].frame) continue;
        const auto& a = path[i - 1];
        const auto& b = path[i];
        const double u = static_cast<double>(t - a.frame) / (b.frame - a.frame);
        return TargetState{
            Point{a.center.x + u * (b.center.x - a.center.x),
                  a.center.y + u * (b.center.y - a.center.y)},
            a.area + u * (b.area - a.area), a.aspect + u * (b.aspect - a.aspect)};
    }
    const auto& k = path.back();
    return TargetState{k.center, k.area, k.aspect};
}

inline TargetState target_at(const ScenarioScript& script, int t) {
    return interpolate_path(script.target, t);
}

/// Visible fraction of the target in [0,1]: 0 inside an occlusion span,
/// ramping down over the approach frames before it, 1 elsewhere.
inline double visibility(const ScenarioScript& script, int t) {
    for (const auto& span : script.occlusions) {
        if (t >= span.start && t < span.end) return 0.0;
        if (span.approach > 0 && t >= span.start - span.approach && t < span.start) {
            return static_cast<double>(span.start - t) / (span.approach + 1);
        }
    }
    return 1.0;
}

/// Length of the current visible run ending at t (1 on the first visible
/// frame after a gap); 0 if t itself is occluded. Used by the simulated
/// re-detection delay.
inline int visible_run_length(const ScenarioScript& script, int t) {
    if (visibility(script, t) <= 0.0) return 0;
    int run = 0;
    for (int f = t; f >= 0 && visibility(script, f) > 0.0; --f) ++run;
    return run;
}

inline void validate_script(const ScenarioScript& script) {
    auto fail = [](const std::string& what) { throw ScenarioError("scenario: " + what); };
    if (script.length < 1) fail("'length' must be >= 1");
    if (script.frame_size.width < 1 || script.frame_size.height < 1)
        fail("'frame_size' must be positive");
    if (script.pointer_dim < 2) fail("'pointer_dim' must be >= 2");
    if (script.target.empty()) fail("'target' needs at least one keyframe");
    auto check_path = [&](const std::vector<Keyframe>& path, const char* name) {
        int prev = -1;
        for (const auto& k : path) {
            if (k.frame < 0 || k.frame >= script.length)
                fail(std::string("'") + name + "' keyframe frame " +
                     std::to_string(k.frame) + " outside [0, length)");
            if (k.frame <= prev)
                fail(std::string("'") + name + "' keyframes must be strictly increasing");
            if (!(k.area > 0.0))
                fail(std::string("'") + name + "' keyframe area must be > 0");
            if (!(k.aspect > 0.0))
                fail(std::string("'") + name + "' keyframe aspect must be > 0");
            prev = k.frame;
        }
    };
    check_path(script.target, "target");
    int prev_end = 0;
    for (const auto& span : script.occlusions) {
        if (span.start < 0 || span.end > script.length || span.start >= span.end)
            fail("occlusion interval [" + std::to_string(span.start) + ", " +
                 std::to_string(span.end) + ") outside [0, length)");
        if (span.approach < 0) fail("occlusion 'approach' must be >= 0");
        if (span.start < prev_end) fail("occlusion intervals must not overlap");
        prev_end = span.end;
    }
    for (const auto& d : script.distractors) {
        if (d.path.empty()) fail("distractor needs at least one keyframe");
        check_path(d.path, "distractor");
        if (d.similarity < 0.0 || d.similarity > 1.0)
            fail("distractor similarity must be in [0,1]");
    }
    if (script.noise.sigma_center < 0.0 || script.noise.sigma_iou < 0.0 ||
        script.noise.sigma_pointer < 0.0)
        fail("noise sigmas must be >= 0");
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

/// Builds one of the four canonical scripts. Identical (kind, seed, cfg)
/// always yields an identical script.
inline ScenarioScript generate_scenario(ScenarioKind kind, std::uint64_t seed,
                                        const Config& cfg) {
    ScenarioScript s;
    s.kind = to_string(kind);
    s.seed = seed;
    s.frame_size = FrameSize{640, 480};
    s.pointer_dim = 64;
    auto rng = derive_stream(seed, 0xA11CE5, static_cast<std::uint64_t>(kind));

    auto two_point_path = [&](int length, Point from, Point to, double area0,
                              double area1, double aspect) {
        std::vector<Keyframe> path;
        path.push_back(Keyframe{0, from, area0, aspect});
        path.push_back(Keyframe{length - 1, to, area1, aspect});
        return path;
    };

    switch (kind) {
        case ScenarioKind::steady: {
            s.length = 60;
            const Point from{110.0 + rng.jitter(20.0), 190.0 + rng.jitter(40.0)};
            const Point to{520.0 + rng.jitter(20.0), 280.0 + rng.jitter(40.0)};
            const double area = 3000.0 + rng.jitter(400.0);
            s.target = two_point_path(s.length, from, to, area, area * 1.1,
                                      1.3 + rng.jitter(0.2));
            break;
        }
        case ScenarioKind::occlusion: {
            s.length = 70;
            const Point from{120.0 + rng.jitter(20.0), 200.0 + rng.jitter(40.0)};
            const Point to{500.0 + rng.jitter(20.0), 280.0 + rng.jitter(40.0)};
            const double area = 3200.0 + rng.jitter(400.0);
            s.target = two_point_path(s.length, from, to, area, area,
                                      1.4 + rng.jitter(0.2));
            const int start = 28 + static_cast<int>(rng.next_below(8));
            const int max_len = std::max(2, cfg.l_miss - 1);
            const int len = std::min(max_len, 5 + static_cast<int>(rng.next_below(4)));
            s.occlusions.push_back(OcclusionSpan{start, start + len, 2});
            break;
        }
        case ScenarioKind::distractor: {
            s.length = 90;
            const double y0 = 240.0 + rng.jitter(50.0);
            const Point from{100.0, y0};
            const Point to{540.0, y0 + rng.jitter(30.0)};
            const double area = 3000.0 + rng.jitter(400.0);
            s.target = two_point_path(s.length, from, to, area, area,
                                      1.3 + rng.jitter(0.2));
            // One look-alike crossing the target's path mid-sequence.
            const int t_cross = 42 + static_cast<int>(rng.next_below(7));
            const TargetState at_cross = interpolate_path(s.target, t_cross);
            const double dx = rng.coin(0.5) ? 40.0 : -40.0;
            DistractorSpec d;
            d.similarity = 0.80 + rng.uniform() * 0.12;
            const double darea = area * (0.9 + rng.uniform() * 0.25);
            d.path.push_back(Keyframe{t_cross - 20,
                                      Point{at_cross.center.x + dx, at_cross.center.y - 175.0},
                                      darea, 1.3});
            d.path.push_back(Keyframe{t_cross, at_cross.center, darea, 1.3});
            d.path.push_back(Keyframe{t_cross + 20,
                                      Point{at_cross.center.x - dx, at_cross.center.y + 175.0},
                                      darea, 1.3});
            s.distractors.push_back(std::move(d));
            break;
        }
        case ScenarioKind::reappear_small: {
            s.length = 85;
            const Point from{200.0 + rng.jitter(40.0), 150.0 + rng.jitter(30.0)};
            const Point to{440.0 + rng.jitter(40.0), 330.0 + rng.jitter(30.0)};
            const double area = 360.0 + rng.jitter(60.0);  // well under the small threshold
            s.target = two_point_path(s.length, from, to, area, area,
                                      1.2 + rng.jitter(0.15));
            const int start = 38 + static_cast<int>(rng.next_below(8));
            const int len = cfg.l_miss + 5 + static_cast<int>(rng.next_below(8));
            s.occlusions.push_back(OcclusionSpan{start, start + len, 8});
            break;
        }
    }
    validate_script(s);
    return s;
}

// ---------------------------------------------------------------------------
// Serialization (JSON; doubles round-trip exactly)
// ---------------------------------------------------------------------------

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* name,
                                           const std::string& where) {
    if (!j.contains(name))
        throw ScenarioError(where + ": missing field '" + name + "'");
    return j.at(name);
}

inline nlohmann::ordered_json keyframe_to_json(const Keyframe& k) {
    return nlohmann::ordered_json{{"frame", k.frame},
                                  {"center", {k.center.x, k.center.y}},
                                  {"area", k.area},
                                  {"aspect", k.aspect}};
}

inline Keyframe keyframe_from_json(const nlohmann::json& j, const std::string& where) {
    Keyframe k;
    k.frame = require_field(j, "frame", where).get<int>();
    const auto& c = require_field(j, "center", where);
    if (!c.is_array() || c.size() != 2)
        throw ScenarioError(where + ": 'center' must be [x, y]");
    k.center = Point{c[0].get<double>(), c[1].get<double>()};
    k.area = require_field(j, "area", where).get<double>();
    k.aspect = require_field(j, "aspect", where).get<double>();
    return k;
}

}  // namespace detail

inline nlohmann::ordered_json script_to_json(const ScenarioScript& s) {
    nlohmann::ordered_json j;
    j["kind"] = s.kind;
    j["seed"] = s.seed;
    j["length"] = s.length;
    j["frame_size"] = {s.frame_size.width, s.frame_size.height};
    j["pointer_dim"] = s.pointer_dim;
    j["target"] = nlohmann::ordered_json::array();
    for (const auto& k : s.target) j["target"].push_back(detail::keyframe_to_json(k));
    j["occlusions"] = nlohmann::ordered_json::array();
    for (const auto& o : s.occlusions)
        j["occlusions"].push_back(nlohmann::ordered_json{
            {"start", o.start}, {"end", o.end}, {"approach", o.approach}});
    j["distractors"] = nlohmann::ordered_json::array();
    for (const auto& d : s.distractors) {
        nlohmann::ordered_json dj;
        dj["similarity"] = d.similarity;
        dj["path"] = nlohmann::ordered_json::array();
        for (const auto& k : d.path) dj["path"].push_back(detail::keyframe_to_json(k));
        j["distractors"].push_back(std::move(dj));
    }
    j["noise"] = nlohmann::ordered_json{{"sigma_center", s.noise.sigma_center},
                                        {"sigma_iou", s.noise.sigma_iou},
                                        {"sigma_pointer", s.noise.sigma_pointer}};
    return j;
}

inline ScenarioScript script_from_json(const nlohmann::json& j,
                                       const std::string& where = "scenario") {
    using detail::require_field;
    ScenarioScript s;
    s.kind = require_field(j, "kind", where).get<std::string>();
    s.seed = require_field(j, "seed", where).get<std::uint64_t>();
    s.length = require_field(j, "length", where).get<int>();
    const auto& fs = require_field(j, "frame_size", where);
    if (!fs.is_array() || fs.size() != 2)
        throw ScenarioError(where + ": 'frame_size' must be [width, height]");
    s.frame_size = FrameSize{fs[0].get<int>(), fs[1].get<int>()};
    s.pointer_dim = require_field(j, "pointer_dim", where).get<int>();
    for (const auto& kj : require_field(j, "target", where))
        s.target.push_back(detail::keyframe_from_json(kj, where + ".target"));
    for (const auto& oj : require_field(j, "occlusions", where)) {
        OcclusionSpan span;
        span.start = require_field(oj, "start", where + ".occlusions").get<int>();
        span.end = require_field(oj, "end", where + ".occlusions").get<int>();
        span.approach = oj.value("approach", 0);
        s.occlusions.push_back(span);
    }
    for (const auto& dj : require_field(j, "distractors", where)) {
        DistractorSpec d;
        d.similarity =
            require_field(dj, "similarity", where + ".distractors").get<double>();
        for (const auto& kj : require_field(dj, "path", where + ".distractors"))
            d.path.push_back(detail::keyframe_from_json(kj, where + ".distractors.path"));
        s.distractors.push_back(std::move(d));
    }
    const auto& nj = require_field(j, "noise", where);
    s.noise.sigma_center = require_field(nj, "sigma_center", where + ".noise").get<double>();
    s.noise.sigma_iou = require_field(nj, "sigma_iou", where + ".noise").get<double>();
    s.noise.sigma_pointer =
        require_field(nj, "sigma_pointer", where + ".noise").get<double>();
    validate_script(s);
    return s;
}

inline void save_scenario(const ScenarioScript& script, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ScenarioError("cannot open scenario file for writing: " + path);
    out << script_to_json(script).dump(2) << "\n";
    if (!out) throw ScenarioError("failed writing scenario file: " + path);
}

inline ScenarioScript load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioError(path + ": " + e.what());
    }
    try {
        return script_from_json(j, path);
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioError(path + ": " + e.what());
    }
}

}  // namespace retrack
