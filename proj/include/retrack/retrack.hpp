#pragma once

// Occlusion- and reappearance-aware tracking control layer: reliability
// scoring, a three-mode state machine, branch-based recovery, an anchor bank,
// delayed conditioning-memory promotion and selection governance, plus a
// deterministic scenario simulator for desk-scale verification.

#include "retrack/anchor_bank.hpp"
#include "retrack/batch.hpp"
#include "retrack/branch.hpp"
#include "retrack/config.hpp"
#include "retrack/geometry.hpp"
#include "retrack/memory.hpp"
#include "retrack/metrics.hpp"
#include "retrack/reference.hpp"
#include "retrack/reliability.hpp"
#include "retrack/rng.hpp"
#include "retrack/scenario.hpp"
#include "retrack/sim_predictor.hpp"
#include "retrack/trace.hpp"
#include "retrack/tracker.hpp"
