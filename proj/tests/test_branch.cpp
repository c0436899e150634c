#include <catch2/catch_amalgamated.hpp>

#include <optional>

#include "retrack/branch.hpp"
#include "retrack/memory.hpp"

using namespace retrack;

namespace {

// Minimal predictor standing in for the backbone in pool-mechanics tests.
struct StubPredictor {
    struct Context {
        int id = 0;
    };
    PredictorOutput canned;
    bool fail_hints = false;

    Context init() const { return {}; }
    PredictorOutput predict(int, const Context&) const { return canned; }
    Context advance(int, const Context& c, int) const { return c; }
    std::optional<Context> hint(int, const Context& c, int index) const {
        if (fail_hints) return std::nullopt;
        return Context{c.id * 10 + index + 1};
    }
    void apply_memory(Context&, const MemoryView&) const {}
};

CandidateMask visible_candidate(double iou, double x = 100.0) {
    CandidateMask c;
    c.geometry.area = 500.0;
    c.geometry.centroid = Point{x, 120.0};
    c.geometry.aspect_ratio = 1.2;
    c.geometry.frame_size = FrameSize{640, 480};
    c.predicted_iou = iou;
    c.objectness = 0.8;
    return c;
}

PredictorOutput output_with_alternatives(int count) {
    PredictorOutput out;
    out.primary = visible_candidate(0.9);
    for (int i = 0; i < count; ++i)
        out.alternatives.push_back(visible_candidate(0.8 - 0.1 * i, 200.0 + 40.0 * i));
    return out;
}

using StubBranch = Branch<StubPredictor::Context>;
using StubPool = BranchPool<StubPredictor::Context>;

StubBranch make_branch(RootId root, double score, int born = 3) {
    StubBranch b;
    b.root = root;
    b.score = score;
    b.born = born;
    return b;
}

}  // namespace

TEST_CASE("spawn: two alternatives and branch_keep=3 gives primary, alt-1, absent") {
    Config cfg;
    StubPredictor pred;
    pred.canned = output_with_alternatives(2);
    const auto pool = spawn_pool(pred, 5, StubPredictor::Context{}, pred.canned,
                                 MotionHistory{}, cfg);
    REQUIRE(pool.size() == 3);
    REQUIRE(pool.branches[0].root == RootId::primary());
    REQUIRE(pool.branches[1].root == RootId::alt(1));
    REQUIRE(pool.branches[2].root == RootId::absent());
    for (const auto& b : pool.branches) {
        REQUIRE(b.score == 0.0);
        REQUIRE(b.win_streak == 0);
        REQUIRE(b.born == 5);
    }
}

TEST_CASE("spawn: no alternatives gives primary and absent") {
    Config cfg;
    StubPredictor pred;
    pred.canned = output_with_alternatives(0);
    const auto pool = spawn_pool(pred, 2, StubPredictor::Context{}, pred.canned,
                                 MotionHistory{}, cfg);
    REQUIRE(pool.size() == 2);
    REQUIRE(pool.branches[0].root == RootId::primary());
    REQUIRE(pool.branches[1].root == RootId::absent());
}

TEST_CASE("spawn: branch_keep=1 truncates to the primary branch only") {
    Config cfg;
    cfg.branch_keep = 1;
    StubPredictor pred;
    pred.canned = output_with_alternatives(2);
    const auto pool = spawn_pool(pred, 2, StubPredictor::Context{}, pred.canned,
                                 MotionHistory{}, cfg);
    REQUIRE(pool.size() == 1);
    REQUIRE(pool.branches[0].root == RootId::primary());
}

TEST_CASE("spawn: hint failure drops the branch but never aborts the pool") {
    Config cfg;
    StubPredictor pred;
    pred.canned = output_with_alternatives(2);
    pred.fail_hints = true;
    const auto pool = spawn_pool(pred, 2, StubPredictor::Context{}, pred.canned,
                                 MotionHistory{}, cfg);
    REQUIRE(pool.size() == 1);  // only the absent hypothesis remains
    REQUIRE(pool.branches[0].root == RootId::absent());
}

TEST_CASE("step_score frozen examples") {
    Config cfg;  // lambda_a=2, lambda_m=lambda_g=0.5, lambda_e=1, eps=1e-4
    StubBranch b = make_branch(RootId::primary(), 0.0);

    // q=1,o=1, all aux 1, visible: log 1 = 0, so 2 + 0.5 + 0.5 = 3
    BranchEvidence perfect{1.0, 1.0, 1.0, 1.0, 1.0, 500.0, std::nullopt};
    REQUIRE(step_score(b, perfect, cfg) == Catch::Approx(3.0));

    // q=1,o=1, aux 0, absent: only the empty penalty fires
    StubBranch b2 = make_branch(RootId::primary(), 0.0);
    BranchEvidence empty{1.0, 1.0, 0.0, 0.0, 0.0, 0.0, std::nullopt};
    REQUIRE(step_score(b2, empty, cfg) == Catch::Approx(-1.0));

    // q=0 clamps to epsilon: increment includes log(1e-4)
    StubBranch b3 = make_branch(RootId::primary(), 0.0);
    BranchEvidence clamped{0.0, 1.0, 0.0, 0.0, 0.0, 500.0, std::nullopt};
    REQUIRE(step_score(b3, clamped, cfg) ==
            Catch::Approx(-9.210340371976182).epsilon(1e-12));
}

TEST_CASE("prune keeps the best branch per root, then the global top") {
    Config cfg;  // branch_keep = 3
    StubPool pool;
    pool.branches.push_back(make_branch(RootId::primary(), 2.0));
    pool.branches.push_back(make_branch(RootId::primary(), 3.0));
    prune(pool, cfg);
    REQUIRE(pool.size() == 1);
    REQUIRE(pool.branches[0].score == 3.0);

    StubPool four;
    four.branches.push_back(make_branch(RootId::primary(), 5.0));
    four.branches.push_back(make_branch(RootId::alt(1), 4.0));
    four.branches.push_back(make_branch(RootId::alt(2), 1.0));  // lowest, dropped
    four.branches.push_back(make_branch(RootId::absent(), 2.0));
    prune(four, cfg);
    REQUIRE(four.size() == 3);
    for (const auto& b : four.branches) REQUIRE_FALSE(b.root == RootId::alt(2));
}

TEST_CASE("prune tie-break prefers primary over absent at equal score") {
    Config cfg;
    cfg.branch_keep = 1;
    StubPool pool;
    pool.branches.push_back(make_branch(RootId::absent(), 1.5));
    pool.branches.push_back(make_branch(RootId::primary(), 1.5));
    prune(pool, cfg);
    REQUIRE(pool.size() == 1);
    REQUIRE(pool.branches[0].root == RootId::primary());
}

TEST_CASE("prune is idempotent") {
    Config cfg;
    StubPool pool;
    pool.branches.push_back(make_branch(RootId::primary(), 5.0));
    pool.branches.push_back(make_branch(RootId::alt(1), 4.5, 2));
    pool.branches.push_back(make_branch(RootId::alt(1), 4.0, 3));
    pool.branches.push_back(make_branch(RootId::absent(), -2.0));
    prune(pool, cfg);
    std::vector<std::pair<std::string, double>> once;
    for (const auto& b : pool.branches) once.emplace_back(b.root.label(), b.score);
    prune(pool, cfg);
    std::vector<std::pair<std::string, double>> twice;
    for (const auto& b : pool.branches) twice.emplace_back(b.root.label(), b.score);
    REQUIRE(once == twice);
}

TEST_CASE("root ids stay unique after pruning") {
    Config cfg;
    StubPool pool;
    for (int i = 0; i < 6; ++i)
        pool.branches.push_back(make_branch(i % 2 ? RootId::alt(1) : RootId::primary(),
                                            static_cast<double>(i)));
    prune(pool, cfg);
    REQUIRE(pool.size() == 2);
    REQUIRE_FALSE(pool.branches[0].root == pool.branches[1].root);
}

TEST_CASE("reconfirmation: relaxed path after a long missing streak") {
    Config cfg;  // l_miss=10, tau_rep_iou=0.5, tau_rep_app=0.6, tau_rep_delta=0.05
    BranchEvidence e;
    e.q = 0.55;
    e.s_app = 0.7;
    e.margin = 0.08;
    e.area = 120.0;

    // every relaxed conjunct holds -> reconfirm on a single win
    auto path = reconfirm_path(1, e, 12, cfg);
    REQUIRE(path.has_value());
    REQUIRE(*path == ReconfirmPath::relaxed);

    // same evidence but an absent observation can never reconfirm
    BranchEvidence absent = e;
    absent.area = 0.0;
    REQUIRE_FALSE(reconfirm_path(1, absent, 12, cfg).has_value());

    // sub-threshold margin blocks the relaxed path
    BranchEvidence tight = e;
    tight.margin = 0.01;
    REQUIRE_FALSE(reconfirm_path(1, tight, 12, cfg).has_value());

    // the no-competitor sentinel passes the margin conjunct
    BranchEvidence solo = e;
    solo.margin.reset();
    REQUIRE(reconfirm_path(1, solo, 12, cfg).has_value());
}

TEST_CASE("reconfirmation: generic path needs n_win consecutive wins") {
    Config cfg;  // n_win=3, tau_reconf_app=0.70
    BranchEvidence e;
    e.q = 0.9;
    e.s_app = 0.85;
    e.area = 300.0;
    REQUIRE_FALSE(reconfirm_path(2, e, 0, cfg).has_value());
    auto path = reconfirm_path(3, e, 0, cfg);
    REQUIRE(path.has_value());
    REQUIRE(*path == ReconfirmPath::generic);

    BranchEvidence weak = e;
    weak.s_app = 0.6;
    REQUIRE_FALSE(reconfirm_path(5, weak, 0, cfg).has_value());
}
