#include <catch2/catch_amalgamated.hpp>

#include "retrack/memory.hpp"

using namespace retrack;

namespace {

MemoryStore store_with_noncond(const std::vector<std::pair<int, double>>& entries) {
    MemoryStore s;
    Config cfg;
    for (const auto& [frame, quality] : entries) store_noncond(s, frame, quality, cfg);
    return s;
}

}  // namespace

TEST_CASE("drm_candidate conjunction") {
    Config cfg;  // tau_drm=0.8, g_min=5, r in [0.5,2], n_drm=2
    // all conjuncts hold
    REQUIRE(drm_candidate(0.85, 6, 1.1, false, false, true, cfg));
    // missing distractor signal blocks the non-reappearance path
    REQUIRE_FALSE(drm_candidate(0.85, 6, 1.1, false, false, false, cfg));
    // relaxed threshold path for reappearance commits (no distractor needed)
    REQUIRE(drm_candidate(0.65, 6, 1.0, false, true, false, cfg));
    // sub-threshold against the relaxed bound
    REQUIRE_FALSE(drm_candidate(0.55, 6, 1.0, false, true, false, cfg));
    // spacing gate
    REQUIRE_FALSE(drm_candidate(0.85, 4, 1.0, false, false, true, cfg));
    // size window, normal vs small relaxation
    REQUIRE_FALSE(drm_candidate(0.85, 6, 3.0, false, false, true, cfg));
    REQUIRE(drm_candidate(0.85, 6, 3.0, true, false, true, cfg));
    REQUIRE_THROWS_AS(drm_candidate(0.85, 6, 0.0, false, false, true, cfg),
                      std::invalid_argument);
}

TEST_CASE("drm_promote: delayed by the consecutive-candidate counter") {
    Config cfg;  // n_drm = 2
    MemoryStore store;

    SECTION("two consecutive candidates promote on the second") {
        REQUIRE_FALSE(drm_promote(store, true, 10, cfg));
        REQUIRE(store.promotion_streak == 1);
        REQUIRE(drm_promote(store, true, 11, cfg));
        REQUIRE(store.promotion_streak == 0);
        REQUIRE(store.last_drm_frame == 11);
        REQUIRE(std::count(store.conditioning.begin(), store.conditioning.end(), 11) == 1);
    }

    SECTION("a gap in candidacy resets the counter, so no promotion") {
        REQUIRE_FALSE(drm_promote(store, true, 10, cfg));
        REQUIRE_FALSE(drm_promote(store, false, 11, cfg));
        REQUIRE_FALSE(drm_promote(store, true, 12, cfg));
        REQUIRE(store.conditioning == std::vector<int>{0});
    }

    SECTION("n_drm = 1 promotes immediately") {
        Config now = cfg;
        now.n_drm = 1;
        REQUIRE(drm_promote(store, true, 10, now));
        REQUIRE(store.last_drm_frame == 10);
    }
}

TEST_CASE("bypass indicator") {
    REQUIRE(bypass_indicator(true, 3, TrackingMode::stable) == 1);
    REQUIRE(bypass_indicator(false, 3, TrackingMode::recovery) == 0);
    REQUIRE(bypass_indicator(true, 0, TrackingMode::ambiguous) == 1);
    REQUIRE(bypass_indicator(true, 0, TrackingMode::stable) == 0);
}

TEST_CASE("select_noncond: under-full buffer returns everything in both modes") {
    const MemoryStore s = store_with_noncond({{1, 0.5}, {2, 0.6}, {3, 0.7}});
    const std::vector<int> all{1, 2, 3};
    REQUIRE(select_noncond(s, 1, 7) == all);
    REQUIRE(select_noncond(s, 0, 7) == all);
    REQUIRE_THROWS_AS(select_noncond(s, 1, 0), std::invalid_argument);
}

TEST_CASE("select_noncond: native selection takes top quality within the recency window") {
    // oracle: enumerate the top-k rule on a 6-entry buffer, budget 2 -> window 4
    const MemoryStore s = store_with_noncond(
        {{1, 0.95}, {2, 0.90}, {3, 0.8}, {4, 0.2}, {5, 0.75}, {6, 0.3}});
    const auto picked = select_noncond(s, 1, 2);
    // window = frames {3,4,5,6}; best two by quality = 3 (0.8) and 5 (0.75)
    REQUIRE(picked == std::vector<int>{3, 5});
}

TEST_CASE("select_noncond: quality ties go to the more recent entry") {
    const MemoryStore s =
        store_with_noncond({{1, 0.5}, {2, 0.5}, {3, 0.5}, {4, 0.5}, {5, 0.1}});
    // budget 2 -> window {2,3,4,5}; ties at 0.5 -> most recent of them: 4, 3
    REQUIRE(select_noncond(s, 1, 2) == std::vector<int>{3, 4});
}

TEST_CASE("select_noncond: bypass strides the whole buffer and keeps the newest") {
    std::vector<std::pair<int, double>> entries;
    for (int i = 0; i < 20; ++i) entries.push_back({i + 1, 0.5});
    const MemoryStore s = store_with_noncond(entries);
    const auto picked = select_noncond(s, 0, 5);
    REQUIRE(picked.size() == 5);
    REQUIRE(picked.front() == 1);    // oldest
    REQUIRE(picked.back() == 20);    // most recent always included
    // stride arithmetic: round(i * 19 / 4) -> indices 0,5,10,14,19
    REQUIRE(picked == std::vector<int>{1, 6, 11, 15, 20});
}

TEST_CASE("conditioning_set worked example and degenerate cases") {
    Config cfg;
    cfg.k_c = 4;
    MemoryStore store;
    store.conditioning = {0, 5, 12, 20, 30, 41};
    REQUIRE(conditioning_set(store, 50, cfg) == std::vector<int>{0, 41, 30, 20});

    MemoryStore only_first;
    REQUIRE(conditioning_set(only_first, 9, cfg) == std::vector<int>{0});

    Config six;
    six.k_c = 6;
    MemoryStore small_store;
    small_store.conditioning = {0, 4, 9, 13};
    const auto full = conditioning_set(small_store, 20, six);
    REQUIRE(full.size() == 4);
    REQUIRE(full.front() == 0);
}

TEST_CASE("conditioning_set ties prefer the more recent frame") {
    Config cfg;
    cfg.k_c = 2;
    MemoryStore store;
    store.conditioning = {0, 5, 15};
    // t=10: |5-10| = |15-10| = 5, keep 15
    REQUIRE(conditioning_set(store, 10, cfg) == std::vector<int>{0, 15});
}

TEST_CASE("conditioning_set without keep-first is a plain top-K") {
    Config cfg;
    cfg.k_c = 2;
    cfg.keep_first_cond_frame = false;
    MemoryStore store;
    store.conditioning = {0, 40, 45};
    REQUIRE(conditioning_set(store, 50, cfg) == std::vector<int>{45, 40});
}

TEST_CASE("distractor_signal spatial and confidence gates") {
    Config cfg;  // tau_dist=0.5, d_dist=1.5
    ReferenceStats stats(5);
    stats.push(900.0, 1.0);  // sqrt = 30, gate = 45

    PredictorOutput out;
    out.primary.geometry.area = 900.0;
    out.primary.geometry.centroid = Point{100, 100};
    out.primary.predicted_iou = 0.9;

    // no alternatives -> vacuously false
    REQUIRE_FALSE(distractor_signal(out, stats, cfg));

    CandidateMask alt;
    alt.geometry.area = 850.0;
    alt.predicted_iou = 0.6;

    // confident and well offset (3*sqrt(Abar) = 90 > 45) -> signal
    alt.geometry.centroid = Point{190, 100};
    out.alternatives = {alt};
    REQUIRE(distractor_signal(out, stats, cfg));

    // overlapping the primary -> no signal
    out.alternatives[0].geometry.centroid = Point{100, 100};
    REQUIRE_FALSE(distractor_signal(out, stats, cfg));

    // distant but unconfident -> no signal
    out.alternatives[0].geometry.centroid = Point{190, 100};
    out.alternatives[0].predicted_iou = 0.4;
    REQUIRE_FALSE(distractor_signal(out, stats, cfg));
}

TEST_CASE("miss streak update rule") {
    MemoryStore store;
    store.miss_streak = 4;
    // absent commit extends the streak
    update_miss_streak(store, 0.0, TrackingMode::recovery);
    REQUIRE(store.miss_streak == 5);
    // visible commit resets it
    store.miss_streak = 9;
    update_miss_streak(store, 250.0, TrackingMode::stable);
    REQUIRE(store.miss_streak == 0);
    // no commit while not stable extends it
    update_miss_streak(store, std::nullopt, TrackingMode::recovery);
    update_miss_streak(store, std::nullopt, TrackingMode::ambiguous);
    REQUIRE(store.miss_streak == 2);
    // a stable frame always commits; nothing to extend
    update_miss_streak(store, std::nullopt, TrackingMode::stable);
    REQUIRE(store.miss_streak == 2);
}

TEST_CASE("noncond raw buffer keeps 4x budget and strictly increasing frames") {
    Config cfg;  // budget 7 -> raw 28
    MemoryStore store;
    for (int f = 0; f < 40; ++f) store_noncond(store, f, 0.5, cfg);
    REQUIRE(store.noncond.size() == 28);
    REQUIRE(store.noncond.front().frame == 12);
    REQUIRE_THROWS_AS(store_noncond(store, 5, 0.5, cfg), std::invalid_argument);
}
