#include "terrace/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "terrace/errors.hpp"

namespace terrace {

Grid1D make_grid(double x_left, double x_right, double h) {
    if (!(h > 0.0)) throw ConfigError("grid spacing must be positive");
    if (!(x_right > x_left)) throw ConfigError("grid window is empty");
    Grid1D g;
    g.h = h;
    g.i_left = std::llround(x_left / h);
    std::int64_t i_right = std::llround(x_right / h);
    std::int64_t n = i_right - g.i_left + 1;
    if (n < 64) throw ConfigError("grid window needs at least 64 nodes");
    if (n > 50'000'000) throw ConfigError("grid window is implausibly large");
    g.n = static_cast<int>(n);
    return g;
}

double GridProfile::interp_linear(double x) const {
    const double pos = x / grid.h - static_cast<double>(grid.i_left);
    if (pos <= 0.0) return u.front();
    if (pos >= grid.n - 1) return u.back();
    int k = static_cast<int>(pos);
    double s = pos - k;
    return u[static_cast<std::size_t>(k)] * (1.0 - s) + u[static_cast<std::size_t>(k) + 1] * s;
}

double GridProfile::interp_cubic(double x) const {
    const double pos = x / grid.h - static_cast<double>(grid.i_left);
    if (pos <= 0.0) return u.front();
    if (pos >= grid.n - 1) return u.back();
    int k = static_cast<int>(pos);
    double s = pos - k;
    if (k < 1 || k + 2 > grid.n - 1) {
        return u[static_cast<std::size_t>(k)] * (1.0 - s) +
               u[static_cast<std::size_t>(k) + 1] * s;
    }
    const double* p = u.data() + k - 1;
    double wm1 = -s * (s - 1.0) * (s - 2.0) / 6.0;
    double w0 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
    double w1 = -(s + 1.0) * s * (s - 2.0) / 2.0;
    double w2 = (s + 1.0) * s * (s - 1.0) / 6.0;
    return wm1 * p[0] + w0 * p[1] + w1 * p[2] + w2 * p[3];
}

GridProfile heaviside_ic(const Grid1D& grid, double alpha, double a) {
    GridProfile p;
    p.grid = grid;
    p.u.resize(static_cast<std::size_t>(grid.n));
    for (int k = 0; k < grid.n; ++k)
        p.u[static_cast<std::size_t>(k)] = grid.x(k) <= a ? alpha : 0.0;
    return p;
}

int derive_steps_per_period(const PeriodicNonlinearity& nl, double h, double khat) {
    int spp = 2048;
    const double cap = khat > 0.0 ? 0.1 / khat : std::numeric_limits<double>::infinity();
    while (nl.period / spp > cap || nl.period / spp > h * h) {
        if (spp > (1 << 22))
            throw ConfigError("derived steps per period exceeds 2^22; reaction too stiff "
                              "for this resolution");
        spp *= 2;
    }
    return spp;
}

Pde1dSolver::Pde1dSolver(const PeriodicNonlinearity& nl, const SolverConfig& config,
                         GridProfile initial)
    : nl_(nl), cfg_(config), state_(std::move(initial)) {
    if (cfg_.steps_per_period <= 0)
        throw ConfigError("steps_per_period must be set before constructing the solver");
    if (state_.grid.h != cfg_.h) throw ConfigError("initial profile lattice mismatch");
    spp_ = cfg_.steps_per_period;
    dt_ = nl_.period / spp_;
    escape_bound_ = 10.0 * (nl_.u_max + 1.0);

    double khat = lipschitz_bound(nl_);
    if (dt_ * khat > 1.8)
        throw ConfigError("steps_per_period too coarse: dt * max|f_u| = " +
                          std::to_string(dt_ * khat) + " exceeds the explicit reaction "
                          "stability bound 1.8");

    const int horizon = std::max(1, cfg_.horizon_periods);
    const long long total = static_cast<long long>(spp_) * horizon;
    if (total > 500'000'000) throw ConfigError("clamp table horizon is implausibly large");
    auto clamp_table = [&](BcKind kind, double beta) {
        std::vector<double> vals(static_cast<std::size_t>(total) + 1, 0.0);
        if (kind == BcKind::Orbit)
            vals = flow_samples(nl_, beta, 0.0, nl_.period * horizon,
                                static_cast<int>(total), cfg_.ode);
        return vals;
    };
    left_clamp_ = clamp_table(cfg_.left_bc, cfg_.left_beta);
    if (cfg_.right_bc == cfg_.left_bc && cfg_.right_beta == cfg_.left_beta)
        right_clamp_ = left_clamp_;
    else
        right_clamp_ = clamp_table(cfg_.right_bc, cfg_.right_beta);

    refactor();
}

void Pde1dSolver::refactor() {
    const int n = state_.grid.n;
    const double c = dt_ / (2.0 * cfg_.h * cfg_.h);
    cprime_.assign(static_cast<std::size_t>(n), 0.0);
    work_.assign(static_cast<std::size_t>(n), 0.0);
    mid_.assign(static_cast<std::size_t>(n), 0.0);
    react_.assign(static_cast<std::size_t>(n), 0.0);
    // Thomas factorization of the constant tridiagonal: identity boundary
    // rows, interior rows (-c, 1+2c, -c). Diagonally dominant, so no pivoting.
    pivot_.assign(static_cast<std::size_t>(n), 1.0);
    for (int i = 1; i <= n - 2; ++i) {
        double denom = (1.0 + 2.0 * c) + c * cprime_[static_cast<std::size_t>(i) - 1];
        cprime_[static_cast<std::size_t>(i)] = -c / denom;
        pivot_[static_cast<std::size_t>(i)] = 1.0 / denom;
    }
}

double Pde1dSolver::time() const { return dt_ * static_cast<double>(step_index_); }

void Pde1dSolver::step() {
    const int n = state_.grid.n;
    auto& u = state_.u;
    const double t = time();
    const double c = dt_ / (2.0 * cfg_.h * cfg_.h);
    const std::size_t next = static_cast<std::size_t>(step_index_) + 1;
    if (next >= left_clamp_.size())
        throw ConfigError("stepped past the configured clamp horizon");

    nl_.eval_many(t, u, react_);
    for (int i = 0; i < n; ++i)
        mid_[static_cast<std::size_t>(i)] =
            u[static_cast<std::size_t>(i)] + 0.5 * dt_ * react_[static_cast<std::size_t>(i)];
    nl_.eval_many(t + 0.5 * dt_, mid_, react_);

    work_[0] = left_clamp_[next];
    work_[static_cast<std::size_t>(n) - 1] = right_clamp_[next];
    for (int i = 1; i <= n - 2; ++i) {
        std::size_t k = static_cast<std::size_t>(i);
        work_[k] = c * (u[k - 1] + u[k + 1]) + (1.0 - 2.0 * c) * u[k] + dt_ * react_[k];
    }
    for (int i = 1; i <= n - 2; ++i) {
        std::size_t k = static_cast<std::size_t>(i);
        work_[k] = (work_[k] + c * work_[k - 1]) * pivot_[k];
    }
    u[static_cast<std::size_t>(n) - 1] = work_[static_cast<std::size_t>(n) - 1];
    for (int i = n - 2; i >= 0; --i) {
        std::size_t k = static_cast<std::size_t>(i);
        u[k] = work_[k] - cprime_[k] * u[k + 1];
    }

    ++step_index_;
    if (step_index_ % cfg_.window.check_every == 0) {
        checkHealth();
        if (cfg_.enable_window_moves) maybeMoveWindow();
    }
}

void Pde1dSolver::advance_steps(int count) {
    for (int i = 0; i < count; ++i) step();
}

void Pde1dSolver::checkHealth() {
    for (double v : state_.u) {
        if (!(std::abs(v) <= escape_bound_))
            throw NumericalError("pde state escaped the admissible range at t = " +
                                 std::to_string(time()));
    }
}

void Pde1dSolver::maybeMoveWindow() {
    const int n = state_.grid.n;
    const auto& u = state_.u;
    const double right_now = right_clamp_[static_cast<std::size_t>(step_index_)];
    // The window must stay ahead of the leading edge, not of any mid-level
    // crossing: a pulled front's precursor lives far ahead of the O(1) levels
    // and clamping it to the boundary value acts as an artificial cutoff that
    // drags the measured speed below the true spreading speed.
    const double tail_tol = 1e-12 * std::max(1.0, nl_.u_max);

    int idx = -1;
    for (int i = n - 1; i >= 0; --i) {
        if (std::abs(u[static_cast<std::size_t>(i)] - right_now) > tail_tol) {
            idx = i;
            break;
        }
    }
    if (idx < 0) return;

    const double gap = (n - 1 - idx) * cfg_.h;
    const double width = (n - 1) * cfg_.h;
    if (gap >= cfg_.window.shift_trigger * width) return;

    const int target_gap_nodes = static_cast<int>(std::ceil(cfg_.window.margin / cfg_.h));
    const int m = target_gap_nodes - (n - 1 - idx);
    if (m <= 0) return;

    const double clamp_now = left_clamp_[static_cast<std::size_t>(step_index_)];
    // Node 0 is pinned to the clamp by the boundary row, so it says nothing
    // about the plateau; the discarded nodes and the incoming boundary node
    // are indices 1..m.
    bool can_drop = m < n / 2;
    for (int i = 1; can_drop && i <= m; ++i)
        if (std::abs(u[static_cast<std::size_t>(i)] - clamp_now) > cfg_.window.plateau_tol)
            can_drop = false;

    WindowEvent ev;
    ev.t = time();
    if (can_drop) {
        state_.u.erase(state_.u.begin(), state_.u.begin() + m);
        state_.u.insert(state_.u.end(), static_cast<std::size_t>(m), right_now);
        state_.grid.i_left += m;
        ev.reason = "shift";
    } else {
        if (state_.grid.n + m > cfg_.window.n_max)
            throw NumericalError("window memory budget exhausted: interface outruns the "
                                 "droppable plateau");
        state_.u.insert(state_.u.end(), static_cast<std::size_t>(m), right_now);
        state_.grid.n += m;
        refactor();
        ev.reason = "grow";
    }
    ev.i_left = state_.grid.i_left;
    ev.n = state_.grid.n;
    window_log_.push_back(std::move(ev));
}

void Pde1dSolver::restore(GridProfile profile, long long step_index) {
    if (profile.grid.h != cfg_.h) throw ConfigError("restore lattice mismatch");
    state_ = std::move(profile);
    step_index_ = step_index;
    refactor();
}

SolutionTimeline run_simulation(const PeriodicNonlinearity& nl, const RunOptions& options) {
    SolverConfig cfg = options.solver;
    cfg.left_beta = options.alpha;
    if (options.flat_ic) {
        cfg.left_bc = BcKind::Orbit;
        cfg.right_bc = BcKind::Orbit;
        cfg.right_beta = options.alpha;
        cfg.enable_window_moves = false;
    }
    if (cfg.steps_per_period <= 0)
        cfg.steps_per_period = derive_steps_per_period(nl, cfg.h, lipschitz_bound(nl));
    cfg.horizon_periods = options.horizon_periods;

    Grid1D grid = make_grid(options.x_left, options.x_right, cfg.h);
    GridProfile ic;
    if (options.flat_ic) {
        ic.grid = grid;
        ic.u.assign(static_cast<std::size_t>(grid.n), options.alpha);
    } else {
        ic = heaviside_ic(grid, options.alpha, options.a);
    }

    const int phases = options.subperiod_phases;
    if (phases < 0) throw ConfigError("subperiod_phases must be nonnegative");
    if (phases > 0 && cfg.steps_per_period % phases != 0)
        throw ConfigError("subperiod_phases must divide steps_per_period");
    if (options.horizon_periods < 1) throw ConfigError("horizon must cover at least one period");

    Pde1dSolver solver(nl, cfg, std::move(ic));

    SolutionTimeline tl;
    tl.period = nl.period;
    tl.steps_per_period = solver.steps_per_period();
    tl.h = cfg.h;
    tl.a = options.a;
    tl.alpha = options.alpha;
    tl.alpha_orbit = orbit_samples(nl, options.alpha, 512, cfg.ode);

    auto record = [&](std::vector<Snapshot>& dst, int period, int phase) {
        Snapshot s;
        s.period_index = period;
        s.phase_index = phase;
        s.t = solver.time();
        s.profile = solver.state();
        dst.push_back(std::move(s));
    };
    record(tl.period_snapshots, 0, 0);

    const int spp = solver.steps_per_period();
    for (int j = 1; j <= options.horizon_periods; ++j) {
        bool capture = phases > 0 && j > options.horizon_periods - options.capture_last_periods;
        if (capture) {
            int chunk = spp / phases;
            for (int p = 1; p <= phases; ++p) {
                solver.advance_steps(chunk);
                if (p < phases) record(tl.subperiod_snapshots, j, p);
            }
        } else {
            solver.advance_steps(spp);
        }
        record(tl.period_snapshots, j, 0);
        if (options.on_period) options.on_period(j);
    }
    tl.window_log = solver.window_log();
    return tl;
}

}  // namespace terrace
