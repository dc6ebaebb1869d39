#pragma once

#include <array>
#include <string>
#include <vector>

#include "terrace/ode.hpp"
#include "terrace/pde.hpp"

namespace terrace {

/// Ordinary least squares of position against time over a trace window.
struct SpeedFit {
    double slope = 0.0;      // space per time unit
    double intercept = 0.0;  // position at t = 0
    double residual_rms = 0.0;
    double slope_se = 0.0;  // standard error of the slope
    int n = 0;              // points entering the fit
};

/// Period-index window [j_lo, j_hi] used for speed fits.
struct FitWindow {
    int j_lo = 0;
    int j_hi = 0;
};

/// Positions of one solution level across period snapshots. Positions are
/// measured from the initial jump location a, so they equal the distance
/// the level has travelled.
struct LevelSetTrace {
    double lambda = 0.0;
    std::vector<int> period_index;   // j values with a located crossing
    std::vector<double> positions;   // crossing(j) - a, absolute lattice frame
    std::vector<double> increments;  // positions[i] - positions[i-1]
    SpeedFit speed_fit;              // over the requested fit window
    bool truncated = false;          // level lost inside the fit window
    std::string annotation;
};

/// One recentred profile sample of an extracted front at a fixed phase of
/// the period, on the frame xi = x - crossing, xi in [-W, W].
struct FrontProfile {
    double phase = 0.0;  // time offset within the period
    double xi_left = 0.0;
    double h = 0.0;
    std::vector<double> values;
};

/// One pulsating front of the terrace: connects upper_floor (behind, left)
/// to lower_floor (ahead, right).
struct FrontRecord {
    int index = 0;     // k, 1-based, slowest front first
    double speed = 0;  // fitted average speed c_k
    /// Level displacement over the final recorded period; for a converged
    /// front this is the realized translation length L of one period.
    double period_displacement = 0.0;
    /// Level position (crossing - a) at the last recorded period mark.
    double final_position = 0.0;
    double lambda_ref = 0.0;  // midpoint of lambda_window, the tracked level
    std::array<double, 2> lambda_window{0.0, 0.0};
    std::vector<FrontProfile> period_profiles;  // phases of the final period
    std::vector<double> phase_positions;        // crossing - a per phase
    PeriodicOrbit upper_floor;
    PeriodicOrbit lower_floor;
    SpeedFit fit;
    /// Max norm of successive recentred period-mark profiles over the last
    /// quarter of the fit window.
    double convergence_defect = 0.0;
    /// Max norm, over the matching phases of the last two recorded periods,
    /// of (profile advanced one period) minus (profile translated by the
    /// displacement the tracked level realized over that period): the
    /// finite-horizon pulsating-relation defect.
    double pulsating_mismatch = 0.0;
    /// Same comparison translating by fitted speed * period instead of the
    /// realized displacement; biased by residual drift of the level trace.
    double pulsating_mismatch_fitted = 0.0;
    bool degenerate_flat = false;  // no x-variation: periodic solution, not a front
    /// Smallest C such that the front sits within eps/2 of its floors
    /// outside [-C, C].
    double width_C = 0.0;
};

/// Sampled drift g(t) = j(t) T - positions(j(t)) / c, affine between marks.
struct DriftSeries {
    std::vector<double> t;  // period mark times, t = j T
    std::vector<double> g;
    /// |g(t)|/t at the marks of the last half of the horizon.
    std::vector<double> ratio_tail;
    double final_ratio = 0.0;
    double ratio_trend = 0.0;  // OLS slope of |g|/t over the tail; <= 0 means decaying
};

/// How a detected floor lines up with the phase ladder.
struct FloorMatch {
    double measured = 0.0;  // plateau level sampled at a period mark
    int ladder_index = -1;  // index into PhaseLadder.records, -1 if unmatched
    double mismatch = 0.0;  // |measured - matched beta|
    bool stable_below = false;
};

struct TerraceSettings {
    int lambda_count = 64;
    /// Fit window = trailing fit_fraction of the recorded periods.
    double fit_fraction = 0.5;
    double eps = 1e-2;           // plateau deviation budget
    double fp_match_tol = 1e-3;  // floor-to-ladder snap distance
    double speed_floor = 1e-6;   // below this a front has no usable frame speed
    double sandwich_slack = 0.05;
    double flat_tol = 1e-6;  // x-variation below this marks a degenerate front
    /// Half-width of the co-moving sampling frame. Fast fronts shed slow
    /// trailing tails (decay rate near |f_u(floor)| / c), so the frame must
    /// reach past the width the eps/2 rule selects.
    double frame_halfwidth = 50.0;
    /// Minimum speed separation between clusters; 0 derives
    /// max(3 * pooled slope standard error, 1e-3 * max speed).
    double speed_gap = 0.0;
};

struct TerraceDecomposition {
    /// floors[0] is the orbit through alpha, floors[N] the zero state.
    std::vector<PeriodicOrbit> floors;
    std::vector<FrontRecord> fronts;  // fronts[k-1] connects floors k-1 and k
    std::vector<double> speeds;       // nondecreasing
    std::vector<DriftSeries> drifts;  // one per front
    std::vector<FloorMatch> ladder_crosscheck;  // interior floors only
    std::vector<LevelSetTrace> traces;          // full lambda grid
    std::vector<std::string> diagnostics;
    FitWindow fit_window;
    double speed_gap = 0.0;
};

/// One row of the plateau report: deviation from floor k over the interval
/// the drift-corrected front positions carve out at period mark j.
struct PlateauRow {
    int floor_index = 0;
    int period_index = 0;
    double interval_lo = 0.0;  // in position-from-a coordinates
    double interval_hi = 0.0;
    bool empty = false;
    double sup_deviation = 0.0;
    bool within_eps = false;
};

struct PlateauReport {
    double eps = 0.0;
    std::vector<double> width_C;  // per front
    std::vector<PlateauRow> rows;
};

struct SandwichReport {
    double k_hat = 0.0;
    double c_upper_bound = 0.0;  // 2 sqrt(k_hat)
    double c_lower_obs = 0.0;    // slowest fitted level speed
    double c_fastest_obs = 0.0;
    bool all_within_bound = false;
};

/// Unique lambda-crossing of a monotone nonincreasing profile, absolute
/// x coordinate, by bisection plus linear interpolation in the bracketing
/// cell. Throws LevelOutOfRange when the profile does not straddle lambda.
double level_position(const GridProfile& profile, double lambda);

/// As level_position but reports failure instead of throwing.
bool try_level_position(const GridProfile& profile, double lambda, double& out);

LevelSetTrace trace_level(const SolutionTimeline& timeline, double lambda, FitWindow window);

/// Fit window covering the trailing fraction of recorded periods.
FitWindow trailing_window(const SolutionTimeline& timeline, double fraction);

FrontRecord extract_front(const SolutionTimeline& timeline, double lambda_ref,
                          const TerraceSettings& settings, FitWindow window);

TerraceDecomposition detect_terrace(const SolutionTimeline& timeline, const PhaseLadder& ladder,
                                    const TerraceSettings& settings = {});

DriftSeries drift(const SolutionTimeline& timeline, const FrontRecord& front, FitWindow window);

PlateauReport plateau_check(const SolutionTimeline& timeline, const TerraceDecomposition& terrace,
                            double eps, int last_marks = 10);

SandwichReport speed_sandwich(const SolutionTimeline& timeline, const PeriodicNonlinearity& nl,
                              const TerraceSettings& settings = {});

}  // namespace terrace
