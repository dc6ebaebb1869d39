#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "terrace/errors.hpp"
#include "terrace/nonlinearity.hpp"
#include "terrace/ode.hpp"
#include "terrace/pde.hpp"

using Catch::Approx;
using namespace terrace;

namespace {

PeriodicNonlinearity pure_diffusion() {
    return build_preset("linear_periodic",
                        {{"gamma", 0.0}, {"period", 1.0}, {"u_max", 2.0}});
}

GridProfile sine_mode(const Grid1D& grid, double length, int k) {
    GridProfile p{grid, std::vector<double>(static_cast<std::size_t>(grid.n))};
    for (int i = 0; i < grid.n; ++i)
        p.u[static_cast<std::size_t>(i)] =
            std::sin(k * std::numbers::pi * (grid.x(i) - grid.x_left()) / length);
    return p;
}

SolverConfig with_derived_steps(SolverConfig config, const PeriodicNonlinearity& nl) {
    config.steps_per_period = derive_steps_per_period(nl, config.h, lipschitz_bound(nl));
    return config;
}

}  // namespace

TEST_CASE("grid geometry and step data", "[pde]") {
    Grid1D grid = make_grid(-3.0, 5.0, 0.1);
    REQUIRE(grid.h == Approx(0.1));
    REQUIRE(grid.x_left() == Approx(-3.0).margin(1e-9));
    REQUIRE(grid.x_right() >= 5.0 - 1e-9);
    REQUIRE(grid.n >= 80);

    GridProfile p = heaviside_ic(grid, 2.5, 0.75);
    for (int i = 0; i < grid.n; ++i) {
        double want = grid.x(i) <= 0.75 ? 2.5 : 0.0;
        REQUIRE(p.u[static_cast<std::size_t>(i)] == want);
    }
    SECTION("a jump location on a lattice node keeps that node on the upper side") {
        GridProfile q = heaviside_ic(grid, 1.0, -3.0 + 10 * 0.1);
        int jump = 10;
        REQUIRE(q.u[static_cast<std::size_t>(jump)] == 1.0);
        REQUIRE(q.u[static_cast<std::size_t>(jump + 1)] == 0.0);
    }
}

TEST_CASE("interpolants reproduce polynomials of their order", "[pde]") {
    Grid1D grid = make_grid(0.0, 10.0, 0.125);
    GridProfile lin{grid, {}};
    GridProfile cub{grid, {}};
    lin.u.resize(static_cast<std::size_t>(grid.n));
    cub.u.resize(static_cast<std::size_t>(grid.n));
    for (int i = 0; i < grid.n; ++i) {
        double x = grid.x(i);
        lin.u[static_cast<std::size_t>(i)] = 3.0 - 0.7 * x;
        cub.u[static_cast<std::size_t>(i)] = 1.0 + x * (0.5 + x * (-0.25 + 0.03 * x));
    }
    for (double x : {0.3, 2.04, 5.5551, 9.2}) {
        REQUIRE(lin.interp_linear(x) == Approx(3.0 - 0.7 * x).margin(1e-12));
        REQUIRE(lin.interp_cubic(x) == Approx(3.0 - 0.7 * x).margin(1e-12));
        double want = 1.0 + x * (0.5 + x * (-0.25 + 0.03 * x));
        REQUIRE(cub.interp_cubic(x) == Approx(want).margin(1e-10));
    }
    SECTION("queries beyond the window clamp to the edge values") {
        REQUIRE(lin.interp_linear(-5.0) == Approx(3.0));
        REQUIRE(lin.interp_cubic(25.0) == Approx(3.0 - 0.7 * grid.x_right()).margin(1e-12));
    }
}

TEST_CASE("diffusion step damps a Dirichlet sine mode at the exact discrete rate", "[pde]") {
    double length = 8.0;
    double h = 0.1;
    Grid1D grid = make_grid(0.0, length, h);
    PeriodicNonlinearity nl = pure_diffusion();

    SolverConfig config;
    config.h = h;
    config.steps_per_period = 256;
    config.horizon_periods = 1;
    config.left_bc = BcKind::Zero;
    config.right_bc = BcKind::Zero;
    config.enable_window_moves = false;

    for (int k : {1, 3}) {
        Pde1dSolver solver(nl, config, sine_mode(grid, length, k));
        double dt = solver.dt();
        double lam = (4.0 / (h * h)) *
                     std::pow(std::sin(k * std::numbers::pi * h / (2.0 * length)), 2);
        double rho = (1.0 - 0.5 * dt * lam) / (1.0 + 0.5 * dt * lam);
        int steps = 64;
        solver.advance_steps(steps);
        double factor = std::pow(rho, steps);
        const GridProfile& state = solver.state();
        for (int i = 0; i < grid.n; i += 7) {
            double want = factor * std::sin(k * std::numbers::pi * grid.x(i) / length);
            REQUIRE(state.u[static_cast<std::size_t>(i)] == Approx(want).margin(1e-11));
        }
    }
}

TEST_CASE("a flat profile clamped to one orbit follows the kinetics flow", "[pde]") {
    PeriodicNonlinearity nl = build_preset("bistable_cubic", {{"theta", 0.25}, {"period", 1.0}});
    double beta = 0.6;
    Grid1D grid = make_grid(-4.0, 4.0, 0.1);
    GridProfile flat{grid, std::vector<double>(static_cast<std::size_t>(grid.n), beta)};

    SolverConfig config;
    config.h = 0.1;
    config.horizon_periods = 3;
    config.left_bc = BcKind::Orbit;
    config.right_bc = BcKind::Orbit;
    config.left_beta = beta;
    config.right_beta = beta;
    config.enable_window_moves = false;

    Pde1dSolver solver(nl, with_derived_steps(config, nl), flat);
    solver.advance_steps(3 * solver.steps_per_period());
    double want = flow(nl, beta, 0.0, 3.0);
    for (double v : solver.state().u) REQUIRE(v == Approx(want).margin(2e-6));
    double spread = *std::max_element(solver.state().u.begin(), solver.state().u.end()) -
                    *std::min_element(solver.state().u.begin(), solver.state().u.end());
    REQUIRE(spread <= 1e-7);
}

TEST_CASE("step data stays monotone and ordered in the initial level", "[pde][property]") {
    PeriodicNonlinearity nl = build_preset("bistable_cubic", {{"theta", 0.3}, {"period", 1.0}});
    Grid1D grid = make_grid(-12.0, 12.0, 0.1);

    SolverConfig config;
    config.h = 0.1;
    config.horizon_periods = 3;
    config.left_beta = 0.9;
    config.enable_window_moves = false;

    Pde1dSolver low(nl, with_derived_steps(config, nl), heaviside_ic(grid, 0.9, 0.0));
    config.left_beta = 1.0;
    Pde1dSolver high(nl, with_derived_steps(config, nl), heaviside_ic(grid, 1.0, 0.0));
    low.advance_steps(3 * low.steps_per_period());
    high.advance_steps(3 * high.steps_per_period());

    const auto& ul = low.state().u;
    const auto& uh = high.state().u;
    for (std::size_t i = 1; i < ul.size(); ++i)
        REQUIRE(ul[i] <= ul[i - 1] + 1e-9);
    for (std::size_t i = 0; i < ul.size(); ++i)
        REQUIRE(ul[i] <= uh[i] + 1e-8);
}

TEST_CASE("mirrored step data evolves to the mirrored profile", "[pde]") {
    PeriodicNonlinearity nl = build_preset("bistable_cubic", {{"theta", 0.25}, {"period", 1.0}});
    double h = 0.1;
    Grid1D grid = make_grid(-12.0, 12.0, h);
    int n = grid.n;

    GridProfile leftward = heaviside_ic(grid, 1.0, 0.0);
    GridProfile rightward{grid, std::vector<double>(static_cast<std::size_t>(n))};
    for (int i = 0; i < n; ++i)
        rightward.u[static_cast<std::size_t>(i)] = grid.x(i) >= 0.0 ? 1.0 : 0.0;

    SolverConfig config;
    config.h = h;
    config.horizon_periods = 2;
    config.enable_window_moves = false;
    config.left_bc = BcKind::Orbit;
    config.right_bc = BcKind::Zero;
    config.left_beta = 1.0;
    Pde1dSolver a(nl, with_derived_steps(config, nl), leftward);

    config.left_bc = BcKind::Zero;
    config.right_bc = BcKind::Orbit;
    config.left_beta = 0.0;
    config.right_beta = 1.0;
    Pde1dSolver b(nl, with_derived_steps(config, nl), rightward);

    a.advance_steps(2 * a.steps_per_period());
    b.advance_steps(2 * b.steps_per_period());
    for (int i = 0; i < n; ++i) {
        double va = a.state().u[static_cast<std::size_t>(i)];
        double vb = b.state().u[static_cast<std::size_t>(n - 1 - i)];
        REQUIRE(va == Approx(vb).margin(1e-10));
    }
}

TEST_CASE("derived step counts obey both stability budgets minimally", "[pde]") {
    PeriodicNonlinearity stiff = build_preset("threestable_paper", {});
    double h = 0.05;
    double khat = lipschitz_bound(stiff);
    int spp = derive_steps_per_period(stiff, h, khat);
    double dt = stiff.period / spp;
    double cap = std::min(0.1 / khat, h * h);
    REQUIRE(dt <= cap);
    REQUIRE(spp % 2048 == 0);
    int halved = spp / 2;
    REQUIRE((halved < 2048 || stiff.period / halved > cap));

    PeriodicNonlinearity mild =
        build_preset("bistable_cubic", {{"theta", 0.25}, {"period", 1.0}});
    REQUIRE(derive_steps_per_period(mild, 0.5, lipschitz_bound(mild)) == 2048);
}

TEST_CASE("an explicit step count violating the stability guard is refused", "[pde]") {
    PeriodicNonlinearity stiff = build_preset("threestable_paper", {});
    Grid1D grid = make_grid(-5.0, 5.0, 0.05);
    SolverConfig config;
    config.h = 0.05;
    config.steps_per_period = 1024;
    config.left_beta = 4.0;
    REQUIRE_THROWS_AS(Pde1dSolver(stiff, config, heaviside_ic(grid, 4.0, 0.0)),
                      ConfigError);
}

TEST_CASE("escaping solutions raise a numerical error while stepping", "[pde]") {
    FamilyPreset preset;
    preset.name = "custom";
    preset.expression = "u^2";
    preset.params = {{"period", 1.0}, {"u_max", 1.0}};
    PeriodicNonlinearity nl = build_preset(preset);

    Grid1D grid = make_grid(-10.0, 10.0, 0.1);
    GridProfile bump{grid, std::vector<double>(static_cast<std::size_t>(grid.n))};
    for (int i = 0; i < grid.n; ++i)
        bump.u[static_cast<std::size_t>(i)] = 3.0 * std::exp(-grid.x(i) * grid.x(i));

    SolverConfig config;
    config.h = 0.1;
    config.left_bc = BcKind::Zero;
    config.right_bc = BcKind::Zero;
    config.enable_window_moves = false;
    Pde1dSolver solver(nl, with_derived_steps(config, nl), bump);
    REQUIRE_THROWS_AS(solver.advance_steps(solver.steps_per_period()), NumericalError);
}

TEST_CASE("the moving window tracks a front without disturbing it", "[pde][window]") {
    PeriodicNonlinearity nl = build_preset("bistable_cubic", {{"theta", 0.25}, {"period", 1.0}});
    int periods = 5;

    SolverConfig moving;
    moving.h = 0.1;
    moving.horizon_periods = periods;
    moving.left_beta = 1.0;
    Grid1D small = make_grid(-10.0, 10.0, 0.1);
    Pde1dSolver tracked(nl, with_derived_steps(moving, nl), heaviside_ic(small, 1.0, 0.0));

    SolverConfig fixed = moving;
    fixed.enable_window_moves = false;
    Grid1D wide = make_grid(-10.0, 40.0, 0.1);
    Pde1dSolver reference(nl, with_derived_steps(fixed, nl), heaviside_ic(wide, 1.0, 0.0));

    tracked.advance_steps(periods * tracked.steps_per_period());
    reference.advance_steps(periods * reference.steps_per_period());

    const GridProfile& t_state = tracked.state();
    double worst = 0.0;
    for (int i = 0; i < t_state.grid.n; ++i) {
        double x = t_state.grid.x(i);
        worst = std::max(worst, std::abs(t_state.u[static_cast<std::size_t>(i)] -
                                         reference.state().interp_linear(x)));
    }
    REQUIRE(worst <= 1e-5);

    REQUIRE_FALSE(tracked.window_log().empty());
    double prev_t = -1.0;
    for (const WindowEvent& ev : tracked.window_log()) {
        REQUIRE(ev.t >= prev_t);
        prev_t = ev.t;
        REQUIRE((ev.reason == "shift" || ev.reason == "grow"));
        REQUIRE(ev.n > 0);
    }
}

TEST_CASE("restore reproduces an interrupted trajectory bit for bit", "[pde]") {
    PeriodicNonlinearity nl = build_preset("bistable_cubic", {{"theta", 0.25}, {"period", 1.0}});
    SolverConfig config;
    config.h = 0.1;
    config.horizon_periods = 2;
    config.left_beta = 1.0;
    Grid1D grid = make_grid(-10.0, 10.0, 0.1);

    config = with_derived_steps(config, nl);
    Pde1dSolver solver(nl, config, heaviside_ic(grid, 1.0, 0.0));
    int spp = solver.steps_per_period();
    solver.advance_steps(spp);
    GridProfile checkpoint = solver.state();
    long long mark = solver.step_index();

    solver.advance_steps(spp / 2);
    std::vector<double> straight = solver.state().u;
    Grid1D straight_grid = solver.state().grid;

    Pde1dSolver resumed(nl, config, heaviside_ic(grid, 1.0, 0.0));
    resumed.restore(checkpoint, mark);
    REQUIRE(resumed.step_index() == mark);
    REQUIRE(resumed.time() == Approx(1.0));
    resumed.advance_steps(spp / 2);

    REQUIRE(resumed.state().grid.i_left == straight_grid.i_left);
    REQUIRE(resumed.state().grid.n == straight_grid.n);
    REQUIRE(resumed.state().u.size() == straight.size());
    for (std::size_t i = 0; i < straight.size(); ++i)
        REQUIRE(resumed.state().u[i] == straight[i]);
}
