#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "terrace/nonlinearity.hpp"
#include "terrace/ode.hpp"

namespace terrace {

/// A window of a fixed global lattice with spacing h. Node k sits at
/// x = (i_left + k) * h; window moves keep every node on the same lattice,
/// so profiles from different runs and times can be compared node-for-node.
struct Grid1D {
    std::int64_t i_left = 0;
    int n = 0;
    double h = 0.0;

    double x(int k) const { return (static_cast<double>(i_left) + k) * h; }
    double x_left() const { return x(0); }
    double x_right() const { return x(n - 1); }
};

/// Builds the lattice window covering [x_left, x_right].
Grid1D make_grid(double x_left, double x_right, double h);

struct GridProfile {
    Grid1D grid;
    std::vector<double> u;

    /// Piecewise-linear value at x (clamped to the window edges).
    double interp_linear(double x) const;
    /// Four-point Lagrange value at x; used where second-order accuracy
    /// of the comparison itself would dominate the measured defect.
    double interp_cubic(double x) const;
};

/// Step data alpha * H(a - x): alpha on nodes with x <= a (the jump node
/// belongs to the upper side), zero beyond.
GridProfile heaviside_ic(const Grid1D& grid, double alpha, double a);

enum class BcKind {
    Orbit,  // clamp to the kinetics orbit w(beta, t)
    Zero,
};

struct WindowPolicy {
    double margin = 20.0;        // clear space (x units) restored ahead of the interface
    double shift_trigger = 0.25; // shift when the lead gap falls below this fraction of width
    int n_max = 4'000'000;       // hard ceiling on window nodes
    int check_every = 16;        // steps between window/blow-up checks
    double plateau_tol = 1e-6;   // left nodes may be dropped only this close to the clamp orbit
};

struct SolverConfig {
    double h = 0.05;
    /// Steps per period; 0 derives it automatically: 2048 doubled until
    /// dt <= 0.1 / lipschitz_bound and dt <= h^2. An explicit value is
    /// honored subject to the hard stability guard dt * K <= 1.8.
    int steps_per_period = 0;
    /// Number of periods the boundary clamp tables cover. The clamps follow
    /// the exact kinetics flow started at the seed value, so a seed off a
    /// fixed point relaxes toward its attractor instead of repeating its
    /// first period. Stepping past the covered horizon is an error.
    int horizon_periods = 1;
    BcKind left_bc = BcKind::Orbit;
    BcKind right_bc = BcKind::Zero;
    double left_beta = 0.0;   // flow seed for the left clamp
    double right_beta = 0.0;  // flow seed when right_bc == Orbit
    WindowPolicy window;
    bool enable_window_moves = true;
    OdeSettings ode;  // used for the clamp flow tables
};

struct WindowEvent {
    double t = 0.0;
    std::int64_t i_left = 0;
    int n = 0;
    std::string reason;  // "shift" or "grow"
};

struct Snapshot {
    int period_index = 0;
    int phase_index = 0;  // 0 at the period mark
    double t = 0.0;
    GridProfile profile;
};

/// Everything a detection pass needs from one simulation.
struct SolutionTimeline {
    double period = 0.0;
    int steps_per_period = 0;
    double h = 0.0;
    double a = 0.0;      // initial jump location
    double alpha = 0.0;  // initial upper level
    std::vector<Snapshot> period_snapshots;
    std::vector<Snapshot> subperiod_snapshots;
    std::vector<WindowEvent> window_log;
    PeriodicOrbit alpha_orbit;
};

/// One IMEX step: Crank-Nicolson diffusion (tridiagonal solve) with the
/// reaction advanced by the explicit midpoint rule, under time-dependent
/// Dirichlet clamps. Local truncation O(dt^2 + h^2).
class Pde1dSolver {
public:
    Pde1dSolver(const PeriodicNonlinearity& nl, const SolverConfig& config,
                GridProfile initial);

    void step();
    void advance_steps(int count);

    const GridProfile& state() const { return state_; }
    double time() const;
    long long step_index() const { return step_index_; }
    int steps_per_period() const { return spp_; }
    double dt() const { return dt_; }
    const std::vector<WindowEvent>& window_log() const { return window_log_; }

    /// Restores an interrupted run: state profile plus absolute step count.
    void restore(GridProfile profile, long long step_index);

private:
    void refactor();
    void maybeMoveWindow();
    void checkHealth();

    const PeriodicNonlinearity& nl_;
    SolverConfig cfg_;
    GridProfile state_;
    int spp_ = 0;
    double dt_ = 0.0;
    long long step_index_ = 0;
    double escape_bound_ = 0.0;
    std::vector<double> left_clamp_, right_clamp_;  // one period at step resolution
    std::vector<double> cprime_, pivot_, work_, mid_, react_;
    std::vector<WindowEvent> window_log_;
};

struct RunOptions {
    double alpha = 1.0;
    double a = 0.0;
    double x_left = -20.0;
    double x_right = 30.0;
    int horizon_periods = 10;
    int subperiod_phases = 0;     // extra snapshots per period near the end
    int capture_last_periods = 0; // how many trailing periods get sub-period capture
    bool flat_ic = false;         // constant data alpha everywhere, orbit clamps both sides
    SolverConfig solver;
    std::function<void(int)> on_period;  // progress callback
};

/// Runs the front experiment (or the flat reduction when flat_ic is set)
/// and collects the timeline.
SolutionTimeline run_simulation(const PeriodicNonlinearity& nl, const RunOptions& options);

/// The automatic steps-per-period rule exposed for configs that echo it.
int derive_steps_per_period(const PeriodicNonlinearity& nl, double h, double khat);

}  // namespace terrace
