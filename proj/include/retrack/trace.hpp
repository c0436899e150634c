#pragma once

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retrack/branch.hpp"
#include "retrack/geometry.hpp"

namespace retrack {

class TraceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BranchSummary {
    std::string root;
    int born = 0;
    double score = 0.0;
    int win_streak = 0;
    bool scored = false;  // false on the spawn frame
    BranchEvidence evidence;
};

struct BranchEventRecord {
    std::string kind;  // spawn | prune | win | commit | reset
    std::string root;
    double score = 0.0;
};

struct MemoryTrace {
    bool drm_candidate = false;
    bool drm_promoted = false;
    int conditioning_total = 1;  // |D_t| after this frame
    std::vector<int> conditioning_set;
    std::vector<int> noncond_selected;
    std::vector<int> anchors;  // anchor frame indices after this frame
};

/// One JSONL record per frame; the schema is the contract the acceptance
/// checks replay against (see README for the key list).
struct TraceEvent {
    int t = 0;
    TrackingMode mode = TrackingMode::stable;
    bool commit = false;
    std::optional<std::string> reconfirm_path;
    double q = 0.0;
    double s_app = 0.0;
    double s_mot = 0.0;
    double s_geo = 0.0;
    std::optional<double> margin;
    std::optional<double> committed_area;
    std::optional<Point> committed_centroid;
    int miss_streak = 0;
    bool small = false;
    int gamma = 0;
    int use_memory_selection = 1;
    std::vector<BranchSummary> branches;
    std::vector<BranchEventRecord> branch_events;
    MemoryTrace memory;
};

inline nlohmann::ordered_json to_json(const TraceEvent& e) {
    using ojson = nlohmann::ordered_json;
    ojson j;
    j["t"] = e.t;
    j["mode"] = to_string(e.mode);
    j["commit"] = e.commit;
    if (e.reconfirm_path)
        j["reconfirm_path"] = *e.reconfirm_path;
    else
        j["reconfirm_path"] = nullptr;
    ojson scores;
    scores["q"] = e.q;
    scores["s_app"] = e.s_app;
    scores["s_mot"] = e.s_mot;
    scores["s_geo"] = e.s_geo;
    if (e.margin)
        scores["margin"] = *e.margin;
    else
        scores["margin"] = nullptr;
    j["scores"] = std::move(scores);
    if (e.committed_area) {
        ojson committed;
        committed["area"] = *e.committed_area;
        if (e.committed_centroid)
            committed["centroid"] = {e.committed_centroid->x, e.committed_centroid->y};
        else
            committed["centroid"] = nullptr;
        j["committed"] = std::move(committed);
    } else {
        j["committed"] = nullptr;
    }
    j["miss_streak"] = e.miss_streak;
    j["small"] = e.small;
    j["gamma"] = e.gamma;
    j["use_memory_selection"] = e.use_memory_selection;
    j["branches"] = ojson::array();
    for (const auto& b : e.branches) {
        ojson bj;
        bj["root"] = b.root;
        bj["born"] = b.born;
        bj["score"] = b.score;
        bj["win_streak"] = b.win_streak;
        bj["scored"] = b.scored;
        bj["q"] = b.evidence.q;
        bj["o"] = b.evidence.o;
        bj["s_app"] = b.evidence.s_app;
        bj["s_mot"] = b.evidence.s_mot;
        bj["s_geo"] = b.evidence.s_geo;
        bj["area"] = b.evidence.area;
        if (b.evidence.margin)
            bj["margin"] = *b.evidence.margin;
        else
            bj["margin"] = nullptr;
        j["branches"].push_back(std::move(bj));
    }
    j["branch_events"] = ojson::array();
    for (const auto& ev : e.branch_events) {
        ojson ej;
        ej["kind"] = ev.kind;
        ej["root"] = ev.root;
        ej["score"] = ev.score;
        j["branch_events"].push_back(std::move(ej));
    }
    ojson mem;
    mem["drm_candidate"] = e.memory.drm_candidate;
    mem["drm_promoted"] = e.memory.drm_promoted;
    mem["conditioning_total"] = e.memory.conditioning_total;
    mem["conditioning_set"] = e.memory.conditioning_set;
    mem["noncond_selected"] = e.memory.noncond_selected;
    mem["anchors"] = e.memory.anchors;
    j["memory"] = std::move(mem);
    return j;
}

inline TraceEvent trace_event_from_json(const nlohmann::json& j) {
    TraceEvent e;
    e.t = j.at("t").get<int>();
    e.mode = mode_from_string(j.at("mode").get<std::string>());
    e.commit = j.at("commit").get<bool>();
    if (!j.at("reconfirm_path").is_null())
        e.reconfirm_path = j.at("reconfirm_path").get<std::string>();
    const auto& s = j.at("scores");
    e.q = s.at("q").get<double>();
    e.s_app = s.at("s_app").get<double>();
    e.s_mot = s.at("s_mot").get<double>();
    e.s_geo = s.at("s_geo").get<double>();
    if (!s.at("margin").is_null()) e.margin = s.at("margin").get<double>();
    if (!j.at("committed").is_null()) {
        const auto& c = j.at("committed");
        e.committed_area = c.at("area").get<double>();
        if (!c.at("centroid").is_null())
            e.committed_centroid =
                Point{c.at("centroid")[0].get<double>(), c.at("centroid")[1].get<double>()};
    }
    e.miss_streak = j.at("miss_streak").get<int>();
    e.small = j.at("small").get<bool>();
    e.gamma = j.at("gamma").get<int>();
    e.use_memory_selection = j.at("use_memory_selection").get<int>();
    for (const auto& bj : j.at("branches")) {
        BranchSummary b;
        b.root = bj.at("root").get<std::string>();
        b.born = bj.at("born").get<int>();
        b.score = bj.at("score").get<double>();
        b.win_streak = bj.at("win_streak").get<int>();
        b.scored = bj.at("scored").get<bool>();
        b.evidence.q = bj.at("q").get<double>();
        b.evidence.o = bj.at("o").get<double>();
        b.evidence.s_app = bj.at("s_app").get<double>();
        b.evidence.s_mot = bj.at("s_mot").get<double>();
        b.evidence.s_geo = bj.at("s_geo").get<double>();
        b.evidence.area = bj.at("area").get<double>();
        if (!bj.at("margin").is_null()) b.evidence.margin = bj.at("margin").get<double>();
        e.branches.push_back(std::move(b));
    }
    for (const auto& ej : j.at("branch_events")) {
        BranchEventRecord r;
        r.kind = ej.at("kind").get<std::string>();
        r.root = ej.at("root").get<std::string>();
        r.score = ej.at("score").get<double>();
        e.branch_events.push_back(std::move(r));
    }
    const auto& m = j.at("memory");
    e.memory.drm_candidate = m.at("drm_candidate").get<bool>();
    e.memory.drm_promoted = m.at("drm_promoted").get<bool>();
    e.memory.conditioning_total = m.at("conditioning_total").get<int>();
    e.memory.conditioning_set = m.at("conditioning_set").get<std::vector<int>>();
    e.memory.noncond_selected = m.at("noncond_selected").get<std::vector<int>>();
    e.memory.anchors = m.at("anchors").get<std::vector<int>>();
    return e;
}

inline std::string trace_line(const TraceEvent& e) { return to_json(e).dump(); }

/// JSON-Lines writer, one event per line.
class TraceWriter {
public:
    TraceWriter() = default;

    explicit TraceWriter(const std::string& path) : out_(path) {
        if (!out_) throw TraceError("cannot open trace file for writing: " + path);
    }

    void write(const TraceEvent& e) {
        if (!out_.is_open()) return;
        out_ << trace_line(e) << "\n";
        if (!out_) throw TraceError("failed writing trace event");
    }

    void close() {
        if (out_.is_open()) out_.close();
    }

private:
    std::ofstream out_;
};

inline std::vector<TraceEvent> read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TraceError("cannot open trace file: " + path);
    std::vector<TraceEvent> events;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            events.push_back(trace_event_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw TraceError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return events;
}

}  // namespace retrack
