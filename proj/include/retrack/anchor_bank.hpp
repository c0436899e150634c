#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "retrack/config.hpp"
#include "retrack/geometry.hpp"

namespace retrack {

/// Verified appearance anchors used by the appearance score. The frame-0
/// anchor is permanent; later stable high-confidence pointers are admitted
/// through a novelty gate and evicted FIFO beyond capacity.
class AnchorBank {
public:
    struct Entry {
        ObjectPointer pointer;
        int frame_index = 0;
        bool permanent = false;
    };

    static AnchorBank init(const ObjectPointer& first_pointer) {
        AnchorBank bank;
        bank.entries_.push_back(Entry{first_pointer.normalized(), 0, true});
        return bank;
    }

    /// Admission: stable mode, q >= tau_anchor, and the pointer must not be a
    /// near-duplicate (max cosine to existing anchors < 0.98). Returns true
    /// when the anchor was added.
    bool maybe_add(const ObjectPointer& pointer, double q, TrackingMode mode,
                   int frame_index, const Config& cfg) {
        if (mode != TrackingMode::stable || q < cfg.tau_anchor) return false;
        const ObjectPointer p = pointer.normalized();
        if (best_cosine(p) >= kNoveltyCosine) return false;
        entries_.push_back(Entry{p, frame_index, false});
        while (entries_.size() > static_cast<std::size_t>(cfg.anchor_capacity)) {
            const auto victim = std::find_if(entries_.begin(), entries_.end(),
                                             [](const Entry& e) { return !e.permanent; });
            if (victim == entries_.end()) break;  // only permanent anchors left
            entries_.erase(victim);
        }
        return true;
    }

    /// max_i (<p, a_i> + 1) / 2, the appearance-score kernel.
    double best_similarity(const ObjectPointer& pointer) const {
        return (best_cosine(pointer) + 1.0) / 2.0;
    }

    double best_cosine(const ObjectPointer& pointer) const {
        if (entries_.empty())
            throw std::logic_error("AnchorBank: bank is empty (missing init anchor)");
        double best = -1.0;
        for (const auto& e : entries_) best = std::max(best, cosine(pointer, e.pointer));
        return best;
    }

    std::size_t size() const { return entries_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }

    std::vector<int> frame_indices() const {
        std::vector<int> frames;
        frames.reserve(entries_.size());
        for (const auto& e : entries_) frames.push_back(e.frame_index);
        return frames;
    }

private:
    static constexpr double kNoveltyCosine = 0.98;

    AnchorBank() = default;
    std::vector<Entry> entries_;
};

}  // namespace retrack
