/// Acceptance harness: one line per criterion, nonzero exit when any fails.
/// Heavy artifacts (simulation runs, the parameter sweep) are produced once
/// in ./acceptance-artifacts and shared by the later criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "terrace/detector.hpp"
#include "terrace/errors.hpp"
#include "terrace/experiment.hpp"
#include "terrace/nonlinearity.hpp"
#include "terrace/ode.hpp"
#include "terrace/pde.hpp"
#include "terrace/signs.hpp"

using namespace terrace;
namespace fs = std::filesystem;

namespace {

struct Shared {
    fs::path artifacts;

    PhaseLadder threestable_ladder;
    PhaseLadder bistable_ladder;
    PhaseLadder mixed_ladder;

    SolutionTimeline bistable_tl;
    TerraceDecomposition bistable_terrace;

    SolutionTimeline kpp_tl;

    SolutionTimeline mixed_big_tl;
    TerraceDecomposition mixed_big_terrace;
    SolutionTimeline mixed_small_tl;
    TerraceDecomposition mixed_small_terrace;
    bool mixed_ready = false;
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

const FixedPointRecord* nearest(const PhaseLadder& ladder, double target) {
    const FixedPointRecord* best = nullptr;
    double gap = 1e300;
    for (const auto& rec : ladder.records) {
        double d = std::abs(rec.beta - target);
        if (d < gap) {
            gap = d;
            best = &rec;
        }
    }
    return best;
}

RunConfig mixed_sweep_config(const fs::path& artifacts) {
    RunConfig c;
    c.preset = "mixed_paper";
    c.params = {{"epsilon", 0.4}, {"rho", 1.6}};
    c.alpha = 8.0;
    c.a = 0.0;
    c.h = 0.00625;
    c.steps_per_period = 40960;
    c.horizon_periods = 24;
    c.x_left = -20.0;
    c.x_right = 30.0;
    c.capture_last_periods = 2;
    c.subperiod_phases = 8;
    c.lambda_count = 64;
    c.fit_fraction = 0.5;
    c.out_dir = (artifacts / "mixed-sweep").string();
    c.sweep = {{"epsilon", {0.05, 0.4}}};
    return c;
}

/// Criterion 1: the three-well kinetics scan finds the rest states 0, 1, 4
/// within 1e-6, with 4 stable from below, 1 unstable from both sides, and 0
/// stable from above.
Outcome criterion_1(Shared& sh) {
    sh.threestable_ladder = scan_fixed_points(build_preset("threestable_paper", {}));
    const PhaseLadder& L = sh.threestable_ladder;

    std::ostringstream os;
    bool pass = true;
    for (double target : {0.0, 1.0, 4.0}) {
        const FixedPointRecord* rec = nearest(L, target);
        bool hit = rec && std::abs(rec->beta - target) <= 1e-6;
        pass = pass && hit;
        os << " beta(" << target << ")=" << (rec ? fmt(rec->beta) : "missing");
    }
    const FixedPointRecord* top = nearest(L, 4.0);
    const FixedPointRecord* mid = nearest(L, 1.0);
    const FixedPointRecord* bot = nearest(L, 0.0);
    pass = pass && top && top->stable_below;
    pass = pass && mid && !mid->stable_below && !mid->stable_above;
    pass = pass && bot && bot->stable_above;
    os << " flags(4 below=" << (top && top->stable_below) << ", 1 both-unstable="
       << (mid && !mid->stable_below && !mid->stable_above)
       << ", 0 above=" << (bot && bot->stable_above) << ")";
    return {pass, os.str()};
}

/// Criterion 2: for every fixed point found by the scans, the variational
/// multiplier matches the Floquet exponent: |log P'(beta) + mu T| <= 1e-4.
Outcome criterion_2(Shared& sh) {
    sh.bistable_ladder =
        scan_fixed_points(build_preset("bistable_cubic", {{"theta", 0.25}, {"period", 1.0}}));
    sh.mixed_ladder =
        scan_fixed_points(build_preset("mixed_paper", {{"epsilon", 0.4}, {"rho", 1.6}}));

    double worst = 0.0;
    int checked = 0;
    auto check = [&](const PhaseLadder& L, double T) {
        for (const auto& rec : L.records) {
            worst = std::max(worst, std::abs(rec.log_multiplier + rec.floquet_exponent * T));
            ++checked;
        }
    };
    check(sh.threestable_ladder, 2.0 * std::numbers::pi);
    check(sh.bistable_ladder, 1.0);
    check(sh.mixed_ladder, 2.0 * std::numbers::pi);
    return {checked >= 10 && worst <= 1e-4,
            std::to_string(checked) + " fixed points, worst |log P' + mu T| = " + fmt(worst)};
}

/// Criterion 3: bistable step-data run, theta = 0.25, h = 0.05, 150 periods;
/// the lambda = 0.5 level speed is within 2% of (1 - 2 theta)/sqrt(2).
Outcome criterion_3(Shared& sh) {
    RunConfig c;
    c.preset = "bistable_cubic";
    c.params = {{"theta", 0.25}, {"period", 1.0}};
    c.alpha = 1.0;
    c.a = 0.0;
    c.h = 0.05;
    c.horizon_periods = 150;
    c.x_left = -20.0;
    c.x_right = 30.0;
    c.capture_last_periods = 2;
    c.subperiod_phases = 8;
    fs::path run = cmd_simulate(c, sh.artifacts / "bistable-run");
    sh.bistable_tl = load_timeline(run);
    sh.bistable_terrace = detect_terrace(sh.bistable_tl, sh.bistable_ladder);

    LevelSetTrace trace = trace_level(sh.bistable_tl, 0.5, trailing_window(sh.bistable_tl, 0.5));
    double exact = (1.0 - 2.0 * 0.25) / std::sqrt(2.0);
    double rel = std::abs(trace.speed_fit.slope - exact) / exact;
    bool pass = !trace.truncated && rel <= 0.02 && sh.bistable_terrace.fronts.size() == 1;
    return {pass, "c(0.5) = " + fmt(trace.speed_fit.slope) + " vs " + fmt(exact) +
                      " (rel " + fmt(rel) + "), fronts = " +
                      std::to_string(sh.bistable_terrace.fronts.size())};
}

/// Criterion 4: KPP data u(1-u) from a step; every fitted level speed stays
/// below 2.05 and the measured spreading speed is within 5% of 2 after 200
/// periods.
Outcome criterion_4(Shared& sh) {
    RunConfig c;
    c.preset = "kpp_logistic";
    c.params = {{"r", 1.0}, {"period", 1.0}};
    c.alpha = 1.0;
    c.a = 0.0;
    c.h = 0.1;
    c.horizon_periods = 200;
    c.x_left = -20.0;
    c.x_right = 30.0;
    fs::path run = cmd_simulate(c, sh.artifacts / "kpp-run");
    sh.kpp_tl = load_timeline(run);

    FitWindow window = trailing_window(sh.kpp_tl, 0.5);
    double fastest = 0.0;
    std::vector<double> slopes;
    for (int i = 0; i < 64; ++i) {
        double lambda = 1.0 * (i + 1) / 65.0;
        LevelSetTrace t = trace_level(sh.kpp_tl, lambda, window);
        if (t.truncated || t.speed_fit.n < 3) continue;
        slopes.push_back(t.speed_fit.slope);
        fastest = std::max(fastest, t.speed_fit.slope);
    }
    std::sort(slopes.begin(), slopes.end());
    double median = slopes.empty() ? 0.0 : slopes[slopes.size() / 2];
    SandwichReport sandwich = speed_sandwich(sh.kpp_tl, build_preset("kpp_logistic", {{"r", 1.0}, {"period", 1.0}}));
    bool pass = slopes.size() >= 32 && fastest <= 2.05 && std::abs(median - 2.0) <= 0.1 &&
                sandwich.all_within_bound;
    return {pass, "levels = " + std::to_string(slopes.size()) + ", fastest = " + fmt(fastest) +
                      ", median = " + fmt(median) + ", bound = " + fmt(sandwich.c_upper_bound)};
}

/// Criterion 5: the mixed family shows both regimes inside one sweep: at
/// epsilon * rho large a two-front terrace with ordered speeds and floors
/// {8, 1, 0}; at epsilon * rho small a single front.
Outcome criterion_5(Shared& sh) {
    RunConfig c = mixed_sweep_config(sh.artifacts);
    fs::path out = cmd_sweep(c, sh.artifacts / "mixed-sweep", 1);

    fs::path small_run = out / "runs" / "point_000" / "run";
    fs::path big_run = out / "runs" / "point_001" / "run";
    sh.mixed_small_tl = load_timeline(small_run);
    sh.mixed_big_tl = load_timeline(big_run);
    sh.mixed_small_terrace =
        detect_terrace(sh.mixed_small_tl, load_ladder(out / "runs" / "point_000" / "ladder" / "ladder.json"));
    sh.mixed_big_terrace =
        detect_terrace(sh.mixed_big_tl, load_ladder(out / "runs" / "point_001" / "ladder" / "ladder.json"));
    sh.mixed_ready = true;

    const TerraceDecomposition& big = sh.mixed_big_terrace;
    const TerraceDecomposition& small = sh.mixed_small_terrace;
    bool floors_ok = big.floors.size() == 3 && std::abs(big.floors[0].beta - 8.0) <= 1e-3 &&
                     std::abs(big.floors[1].beta - 1.0) <= 1e-3 && big.floors[2].beta == 0.0;
    bool speeds_ok = big.speeds.size() == 2 && big.speeds[0] < big.speeds[1];
    bool pass = floors_ok && speeds_ok && small.fronts.size() == 1;

    std::ostringstream os;
    os << "large: N=" << big.fronts.size() << " c=(";
    for (std::size_t i = 0; i < big.speeds.size(); ++i)
        os << (i ? ", " : "") << fmt(big.speeds[i]);
    os << ") floors=(";
    for (std::size_t i = 0; i < big.floors.size(); ++i)
        os << (i ? ", " : "") << fmt(big.floors[i].beta);
    os << "); small: N=" << small.fronts.size();
    return {pass, os.str()};
}

/// Criterion 6: for 50 random pairs of step data evolved 20 periods, the
/// zero number of the difference never increases and the sign words form a
/// subword chain.
Outcome criterion_6(Shared&) {
    PeriodicNonlinearity nl =
        build_preset("bistable_cubic", {{"theta", 0.25}, {"period", 1.0}});
    Grid1D grid = make_grid(-16.0, 24.0, 0.1);

    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> level(0.1, 1.0);
    std::uniform_real_distribution<double> place(-2.0, 2.0);

    int violations = 0;
    int pairs = 0;
    while (pairs < 50) {
        double a1 = level(rng), a2 = level(rng);
        double p1 = place(rng), p2 = place(rng);
        if (std::abs(a1 - a2) < 0.05 && std::abs(p1 - p2) < 0.5) continue;
        ++pairs;

        SolverConfig sc;
        sc.h = 0.1;
        sc.steps_per_period = 512;
        sc.horizon_periods = 20;
        sc.enable_window_moves = false;
        sc.left_beta = a1;
        Pde1dSolver s1(nl, sc, heaviside_ic(grid, a1, p1));
        sc.left_beta = a2;
        Pde1dSolver s2(nl, sc, heaviside_ic(grid, a2, p2));

        int prev_zn = 1 << 20;
        SignWord prev_word;
        bool first = true;
        for (int j = 0; j <= 20; ++j) {
            if (j > 0) {
                s1.advance_steps(512);
                s2.advance_steps(512);
            }
            std::vector<double> diff(s1.state().u.size());
            for (std::size_t i = 0; i < diff.size(); ++i)
                diff[i] = s1.state().u[i] - s2.state().u[i];
            int zn = zero_number(diff);
            SignWord word = sgn_word(diff);
            if (!first) {
                if (zn >= 0 && prev_zn >= 0 && zn > prev_zn) ++violations;
                if (zn >= 0 && prev_zn < 0) ++violations;
                if (!is_subword(word, prev_word)) ++violations;
            }
            prev_zn = zn;
            prev_word = word;
            first = false;
        }
    }
    return {violations == 0,
            "50 pairs x 21 marks, violations = " + std::to_string(violations)};
}

/// Criterion 7: step-data solutions stay monotone in x (tolerance 1e-9) and
/// ordered in the jump location a (tolerance 1e-8) at every period mark.
Outcome criterion_7(Shared& sh) {
    PeriodicNonlinearity nl =
        build_preset("bistable_cubic", {{"theta", 0.25}, {"period", 1.0}});
    Grid1D grid = make_grid(-16.0, 24.0, 0.1);

    SolverConfig sc;
    sc.h = 0.1;
    sc.steps_per_period = derive_steps_per_period(nl, sc.h, lipschitz_bound(nl));
    sc.horizon_periods = 20;
    sc.enable_window_moves = false;
    sc.left_beta = 1.0;
    Pde1dSolver behind(nl, sc, heaviside_ic(grid, 1.0, 0.0));
    Pde1dSolver ahead(nl, sc, heaviside_ic(grid, 1.0, 2.0));

    int spp = behind.steps_per_period();
    double worst_mono = 0.0;
    double worst_order = 0.0;
    for (int j = 1; j <= 20; ++j) {
        behind.advance_steps(spp);
        ahead.advance_steps(spp);
        const auto& ub = behind.state().u;
        const auto& ua = ahead.state().u;
        for (std::size_t i = 1; i < ub.size(); ++i) {
            worst_mono = std::max(worst_mono, ub[i] - ub[i - 1]);
            worst_mono = std::max(worst_mono, ua[i] - ua[i - 1]);
        }
        for (std::size_t i = 0; i < ub.size(); ++i)
            worst_order = std::max(worst_order, ub[i] - ua[i]);
    }

    double worst_kpp = 0.0;
    for (const Snapshot& s : sh.kpp_tl.period_snapshots)
        for (std::size_t i = 1; i < s.profile.u.size(); ++i)
            worst_kpp = std::max(worst_kpp, s.profile.u[i] - s.profile.u[i - 1]);

    bool pass = worst_mono <= 1e-9 && worst_kpp <= 1e-9 && worst_order <= 1e-8;
    return {pass, "max uphill = " + fmt(std::max(worst_mono, worst_kpp)) +
                      ", max order breach = " + fmt(worst_order)};
}

/// Criterion 8: every extracted front satisfies the pulsating relation
/// within 5x its convergence defect, and the defect itself is at most 1e-3
/// at the horizon.
Outcome criterion_8(Shared& sh) {
    std::vector<const FrontRecord*> fronts;
    for (const FrontRecord& f : sh.bistable_terrace.fronts) fronts.push_back(&f);
    if (sh.mixed_ready) {
        for (const FrontRecord& f : sh.mixed_big_terrace.fronts) fronts.push_back(&f);
        for (const FrontRecord& f : sh.mixed_small_terrace.fronts) fronts.push_back(&f);
    }
    if (fronts.empty()) return {false, "no extracted fronts available"};

    bool pass = true;
    std::ostringstream os;
    for (const FrontRecord* f : fronts) {
        bool defect_ok = f->convergence_defect <= 1e-3;
        bool relation_ok = f->pulsating_mismatch <= 5.0 * f->convergence_defect;
        pass = pass && defect_ok && relation_ok;
        os << " [c=" << fmt(f->speed) << " defect=" << fmt(f->convergence_defect)
           << " mismatch=" << fmt(f->pulsating_mismatch) << (defect_ok && relation_ok ? "" : " BAD")
           << "]";
    }
    return {pass, std::to_string(fronts.size()) + " fronts:" + os.str()};
}

/// Criterion 9: the sublinear drift ratio |g|/t decays over the last half
/// of each run and ends at 0.05 or less.
Outcome criterion_9(Shared& sh) {
    std::vector<const DriftSeries*> drifts;
    for (const DriftSeries& d : sh.bistable_terrace.drifts) drifts.push_back(&d);
    if (sh.mixed_ready) {
        for (const DriftSeries& d : sh.mixed_big_terrace.drifts) drifts.push_back(&d);
        for (const DriftSeries& d : sh.mixed_small_terrace.drifts) drifts.push_back(&d);
    }
    if (drifts.empty()) return {false, "no drift series available"};

    bool pass = true;
    std::ostringstream os;
    for (const DriftSeries* d : drifts) {
        bool ok = d->final_ratio <= 0.05 && d->ratio_trend <= 1e-8;
        pass = pass && ok;
        os << " [final=" << fmt(d->final_ratio) << " trend=" << fmt(d->ratio_trend)
           << (ok ? "" : " BAD") << "]";
    }
    return {pass, std::to_string(drifts.size()) + " series:" + os.str()};
}

/// Criterion 10: on the interval carved out for the middle floor of the
/// two-front mixed run, the solution sits within eps = 1e-2 of that floor
/// at each of the last 10 period marks.
Outcome criterion_10(Shared& sh) {
    if (!sh.mixed_ready) return {false, "mixed artifacts missing"};
    PlateauReport report = plateau_check(sh.mixed_big_tl, sh.mixed_big_terrace, 1e-2);
    int rows = 0;
    int bad = 0;
    double worst = 0.0;
    for (const PlateauRow& row : report.rows) {
        if (row.floor_index != 1 || row.empty) continue;
        ++rows;
        worst = std::max(worst, row.sup_deviation);
        if (!row.within_eps) ++bad;
    }
    return {rows >= 5 && bad == 0, std::to_string(rows) + " marks on the middle floor, worst sup-dev = " +
                                       fmt(worst) + ", bad = " + std::to_string(bad)};
}

/// Criterion 11: spatially flat data reduces the PDE to the kinetics: over
/// 50 periods the period-mark values track the ODE flow within
/// 10 * (atol + rtol * |omega|) for three families.
Outcome criterion_11(Shared&) {
    struct Case {
        const char* name;
        PeriodicNonlinearity nl;
        double seed;
        int spp;
    };
    std::vector<Case> cases;
    cases.push_back({"threestable", build_preset("threestable_paper", {}), 3.5, 81920});
    cases.push_back({"bistable", build_preset("bistable_cubic", {{"theta", 0.25}, {"period", 1.0}}), 0.9, 0});
    cases.push_back({"mixed", build_preset("mixed_paper", {{"epsilon", 0.4}, {"rho", 1.6}}), 7.5, 40960});

    OdeSettings ode;
    bool pass = true;
    std::ostringstream os;
    for (auto& cs : cases) {
        Grid1D grid = make_grid(-2.0, 2.0, 0.0625);
        GridProfile flat{grid, std::vector<double>(static_cast<std::size_t>(grid.n), cs.seed)};
        SolverConfig sc;
        sc.h = 0.0625;
        sc.steps_per_period =
            cs.spp > 0 ? cs.spp : derive_steps_per_period(cs.nl, sc.h, lipschitz_bound(cs.nl));
        sc.horizon_periods = 50;
        sc.left_bc = BcKind::Orbit;
        sc.right_bc = BcKind::Orbit;
        sc.left_beta = cs.seed;
        sc.right_beta = cs.seed;
        sc.enable_window_moves = false;
        Pde1dSolver solver(cs.nl, sc, flat);

        std::vector<double> marks =
            flow_samples(cs.nl, cs.seed, 0.0, 50.0 * cs.nl.period, 50, ode);
        double worst = 0.0;
        bool ok = true;
        int spp = solver.steps_per_period();
        for (int j = 1; j <= 50; ++j) {
            solver.advance_steps(spp);
            double mid = solver.state().u[static_cast<std::size_t>(grid.n / 2)];
            double omega = marks[static_cast<std::size_t>(j)];
            double budget = 10.0 * (ode.atol + ode.rtol * std::abs(omega));
            double err = std::abs(mid - omega);
            worst = std::max(worst, err / budget);
            ok = ok && err <= budget;
        }
        pass = pass && ok;
        os << " [" << cs.name << " worst err/budget = " << fmt(worst) << (ok ? "" : " BAD") << "]";
    }
    return {pass, os.str()};
}

}  // namespace

int main() {
    Shared sh;
    sh.artifacts = fs::current_path() / "acceptance-artifacts";
    fs::remove_all(sh.artifacts);
    fs::create_directories(sh.artifacts);

    struct Row {
        int id;
        const char* name;
        double budget_seconds;
        std::function<Outcome(Shared&)> fn;
    };
    std::vector<Row> rows = {
        {1, "kinetics rest states and stability", 10.0, criterion_1},
        {2, "multiplier vs Floquet exponent", 10.0, criterion_2},
        {3, "bistable front speed", 120.0, criterion_3},
        {4, "KPP spreading speed bound", 120.0, criterion_4},
        {5, "mixed family regime change", 900.0, criterion_5},
        {6, "zero number and sign word chain", 300.0, criterion_6},
        {7, "monotonicity and ordering", 120.0, criterion_7},
        {8, "pulsating relation", 0.0, criterion_8},
        {9, "sublinear drift decay", 0.0, criterion_9},
        {10, "plateau occupation", 0.0, criterion_10},
        {11, "flat data reduces to kinetics", 30.0, criterion_11},
    };

    int failures = 0;
    for (auto& row : rows) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = row.fn(sh);
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool in_budget = row.budget_seconds <= 0.0 || seconds <= row.budget_seconds;
        bool pass = out.pass && in_budget;
        if (!pass) ++failures;
        std::printf("[%s] criterion %2d %-38s (%.1f s)%s: %s\n", pass ? "PASS" : "FAIL", row.id,
                    row.name, seconds, in_budget ? "" : " OVER BUDGET", out.detail.c_str());
        std::fflush(stdout);
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
