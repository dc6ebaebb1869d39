#include "terrace/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "terrace/errors.hpp"

namespace terrace {

namespace {

SpeedFit ols(const std::vector<double>& t, const std::vector<double>& y) {
    SpeedFit fit;
    fit.n = static_cast<int>(t.size());
    if (fit.n < 2) return fit;
    double mt = 0.0, my = 0.0;
    for (int i = 0; i < fit.n; ++i) {
        mt += t[static_cast<std::size_t>(i)];
        my += y[static_cast<std::size_t>(i)];
    }
    mt /= fit.n;
    my /= fit.n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < fit.n; ++i) {
        double dt = t[static_cast<std::size_t>(i)] - mt;
        sxx += dt * dt;
        sxy += dt * (y[static_cast<std::size_t>(i)] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mt;
    double ss = 0.0;
    for (int i = 0; i < fit.n; ++i) {
        double r = y[static_cast<std::size_t>(i)] - fit.intercept -
                   fit.slope * t[static_cast<std::size_t>(i)];
        ss += r * r;
    }
    fit.residual_rms = std::sqrt(ss / fit.n);
    if (fit.n > 2) fit.slope_se = std::sqrt(ss / (fit.n - 2) / sxx);
    return fit;
}

/// positions[j] for j = 0..J, NaN where the trace has no crossing.
std::vector<double> positions_by_period(const LevelSetTrace& trace, int last_period) {
    std::vector<double> pos(static_cast<std::size_t>(last_period) + 1,
                            std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < trace.period_index.size(); ++i) {
        int j = trace.period_index[i];
        if (j >= 0 && j <= last_period) pos[static_cast<std::size_t>(j)] = trace.positions[i];
    }
    return pos;
}

const Snapshot* find_subperiod(const SolutionTimeline& tl, int period, int phase) {
    for (const Snapshot& s : tl.subperiod_snapshots)
        if (s.period_index == period && s.phase_index == phase) return &s;
    return nullptr;
}

int subperiod_phase_count(const SolutionTimeline& tl, int period) {
    int max_phase = 0;
    for (const Snapshot& s : tl.subperiod_snapshots)
        if (s.period_index == period) max_phase = std::max(max_phase, s.phase_index);
    return max_phase > 0 ? max_phase + 1 : 1;
}

/// Uniform recentred frame xi in [-W, W] on the solution lattice.
struct Frame {
    double xi_left = 0.0;
    double h = 0.0;
    int n = 0;

    std::vector<double> sample(const GridProfile& profile, double center) const {
        std::vector<double> out(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            out[static_cast<std::size_t>(i)] = profile.interp_cubic(center + xi_left + i * h);
        return out;
    }
};

Frame make_frame(double halfwidth, double h) {
    Frame f;
    int half = static_cast<int>(std::lround(halfwidth / h));
    f.h = h;
    f.xi_left = -half * h;
    f.n = 2 * half + 1;
    return f;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

PeriodicOrbit constant_orbit(double value, double period, int n = 512) {
    PeriodicOrbit orbit;
    orbit.beta = value;
    orbit.t.resize(static_cast<std::size_t>(n) + 1);
    orbit.value.assign(static_cast<std::size_t>(n) + 1, value);
    for (int i = 0; i <= n; ++i)
        orbit.t[static_cast<std::size_t>(i)] = period * i / n;
    return orbit;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string format_g(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

bool try_level_position(const GridProfile& profile, double lambda, double& out) {
    const auto& u = profile.u;
    const int n = profile.grid.n;
    if (!(u.front() >= lambda) || !(u[static_cast<std::size_t>(n) - 1] < lambda)) return false;
    int lo = 0, hi = n - 1;
    while (hi - lo > 1) {
        int mid = lo + (hi - lo) / 2;
        if (u[static_cast<std::size_t>(mid)] >= lambda)
            lo = mid;
        else
            hi = mid;
    }
    double ulo = u[static_cast<std::size_t>(lo)];
    double uhi = u[static_cast<std::size_t>(hi)];
    out = profile.grid.x(lo) + profile.grid.h * (ulo - lambda) / (ulo - uhi);
    return true;
}

double level_position(const GridProfile& profile, double lambda) {
    double out = 0.0;
    if (!try_level_position(profile, lambda, out))
        throw LevelOutOfRange("level " + format_g(lambda) +
                              " is not crossed by the profile (range [" +
                              format_g(profile.u.back()) + ", " + format_g(profile.u.front()) +
                              "])");
    return out;
}

FitWindow trailing_window(const SolutionTimeline& timeline, double fraction) {
    int last = static_cast<int>(timeline.period_snapshots.size()) - 1;
    if (last < 1) throw ConfigError("timeline records no evolved periods");
    int count = std::max(2, static_cast<int>(std::lround(fraction * last)));
    FitWindow w;
    w.j_hi = last;
    w.j_lo = std::max(1, last - count + 1);
    return w;
}

LevelSetTrace trace_level(const SolutionTimeline& timeline, double lambda, FitWindow window) {
    LevelSetTrace trace;
    trace.lambda = lambda;
    bool started = false;
    for (const Snapshot& snap : timeline.period_snapshots) {
        double x = 0.0;
        if (try_level_position(snap.profile, lambda, x)) {
            started = true;
            if (!trace.period_index.empty() &&
                snap.period_index == trace.period_index.back() + 1)
                trace.increments.push_back(x - timeline.a - trace.positions.back());
            trace.period_index.push_back(snap.period_index);
            trace.positions.push_back(x - timeline.a);
        } else if (started) {
            if (snap.period_index <= window.j_hi) {
                trace.truncated = true;
                trace.annotation = "level lost at period " + std::to_string(snap.period_index);
            }
            break;
        }
    }
    std::vector<double> tfit, yfit;
    for (std::size_t i = 0; i < trace.period_index.size(); ++i) {
        int j = trace.period_index[i];
        if (j >= window.j_lo && j <= window.j_hi) {
            tfit.push_back(j * timeline.period);
            yfit.push_back(trace.positions[i]);
        }
    }
    trace.speed_fit = ols(tfit, yfit);
    if (trace.period_index.empty()) trace.annotation = "level never crossed";
    return trace;
}

FrontRecord extract_front(const SolutionTimeline& timeline, double lambda_ref,
                          const TerraceSettings& settings, FitWindow window) {
    FrontRecord front;
    front.lambda_ref = lambda_ref;
    front.lambda_window = {lambda_ref, lambda_ref};

    const int last = static_cast<int>(timeline.period_snapshots.size()) - 1;
    const Frame frame = make_frame(settings.frame_halfwidth, timeline.h);
    LevelSetTrace trace = trace_level(timeline, lambda_ref, window);
    front.fit = trace.speed_fit;
    front.speed = trace.speed_fit.slope;

    const Snapshot& final_snap = timeline.period_snapshots[static_cast<std::size_t>(last)];
    if (trace.period_index.empty()) {
        // No crossing anywhere: spatially flat dynamics. Keep raw profiles
        // centred on the window middle and classify by x-variation.
        double center = 0.5 * (final_snap.profile.grid.x(0) +
                               final_snap.profile.grid.x(final_snap.profile.grid.n - 1));
        int tail_lo = std::max(0, last - std::max(1, (window.j_hi - window.j_lo) / 4));
        std::vector<double> prev;
        for (int j = tail_lo; j <= last; ++j) {
            auto cur = frame.sample(timeline.period_snapshots[static_cast<std::size_t>(j)].profile,
                                    center);
            if (!prev.empty())
                front.convergence_defect = std::max(front.convergence_defect,
                                                    sup_diff(prev, cur));
            prev = std::move(cur);
        }
        FrontProfile prof;
        prof.phase = 0.0;
        prof.xi_left = frame.xi_left;
        prof.h = frame.h;
        prof.values = frame.sample(final_snap.profile, center);
        double lo = *std::min_element(prof.values.begin(), prof.values.end());
        double hi = *std::max_element(prof.values.begin(), prof.values.end());
        front.degenerate_flat = (hi - lo) <= settings.flat_tol;
        front.period_profiles.push_back(std::move(prof));
        front.phase_positions.push_back(center - timeline.a);
        return front;
    }

    std::vector<double> pos = positions_by_period(trace, last);
    auto have = [&](int j) {
        return j >= 0 && j <= last && std::isfinite(pos[static_cast<std::size_t>(j)]);
    };
    const int jf = trace.period_index.back();  // last mark where the level exists
    front.final_position = pos[static_cast<std::size_t>(jf)];

    // Convergence defect: successive recentred period-mark profiles over the
    // last quarter of the fit window.
    int tail = std::max(2, (window.j_hi - window.j_lo + 1) / 4);
    int tail_lo = std::max(window.j_lo, std::min(jf, window.j_hi) - tail);
    std::vector<double> prev;
    for (int j = tail_lo; j <= std::min(jf, window.j_hi); ++j) {
        if (!have(j)) {
            prev.clear();
            continue;
        }
        auto cur = frame.sample(timeline.period_snapshots[static_cast<std::size_t>(j)].profile,
                                timeline.a + pos[static_cast<std::size_t>(j)]);
        if (!prev.empty())
            front.convergence_defect = std::max(front.convergence_defect, sup_diff(prev, cur));
        prev = std::move(cur);
    }

    if (jf < 1) return front;
    if (have(jf - 1))
        front.period_displacement =
            pos[static_cast<std::size_t>(jf)] - pos[static_cast<std::size_t>(jf) - 1];

    // Final-period phase profiles: phase 0 is the mark opening the last
    // recorded period, interior phases come from the subperiod snapshots.
    const int phases = subperiod_phase_count(timeline, jf);
    const double dt_phase = timeline.period / phases;
    double prev_cross = have(jf - 1) ? timeline.a + pos[static_cast<std::size_t>(jf) - 1]
                                     : timeline.a + pos[static_cast<std::size_t>(jf)];
    for (int p = 0; p < phases; ++p) {
        const Snapshot* snap = nullptr;
        if (p == 0)
            snap = &timeline.period_snapshots[static_cast<std::size_t>(jf) - 1];
        else
            snap = find_subperiod(timeline, jf, p);
        if (snap == nullptr) continue;
        double cross = prev_cross;
        if (!try_level_position(snap->profile, lambda_ref, cross)) cross = prev_cross;
        prev_cross = cross;
        FrontProfile prof;
        prof.phase = p * dt_phase;
        prof.xi_left = frame.xi_left;
        prof.h = frame.h;
        prof.values = frame.sample(snap->profile, cross);
        front.period_profiles.push_back(std::move(prof));
        front.phase_positions.push_back(cross - timeline.a);
    }

    if (!front.period_profiles.empty()) {
        const auto& v = front.period_profiles.front().values;
        double lo = *std::min_element(v.begin(), v.end());
        double hi = *std::max_element(v.begin(), v.end());
        front.degenerate_flat = (hi - lo) <= settings.flat_tol;
        // Width rule: smallest C with the profile inside eps/2 of its own
        // tail values outside [-C, C].
        double upper = v.front(), lower = v.back();
        int half = (frame.n - 1) / 2;
        int c_nodes = half;
        while (c_nodes > 0) {
            bool ok = true;
            for (int i = 0; ok && i <= half - c_nodes; ++i)
                if (std::abs(v[static_cast<std::size_t>(i)] - upper) > settings.eps / 2) ok = false;
            for (int i = half + c_nodes; ok && i < frame.n; ++i)
                if (std::abs(v[static_cast<std::size_t>(i)] - lower) > settings.eps / 2) ok = false;
            if (!ok) break;
            --c_nodes;
        }
        front.width_C = (c_nodes + 1) * frame.h;
    }

    // Pulsating-relation defects over the last two recorded periods: each
    // phase-p snapshot must equal the snapshot one period earlier translated
    // by the displacement its own tracked level realized over that period
    // (and, diagnostically, by fitted speed times period).
    bool sub_ok = find_subperiod(timeline, jf - 1, 1) != nullptr && phases > 1;
    int b_start = sub_ok ? jf - 1 : jf;  // mark opening the later block
    if (b_start >= 2 && have(b_start) && have(b_start - 1)) {
        double disp_fit = front.speed * timeline.period;
        for (int p = 0; p < (sub_ok ? phases : 1); ++p) {
            const Snapshot* sa = nullptr;
            const Snapshot* sb = nullptr;
            if (p == 0) {
                sa = &timeline.period_snapshots[static_cast<std::size_t>(b_start) - 1];
                sb = &timeline.period_snapshots[static_cast<std::size_t>(b_start)];
            } else {
                sa = find_subperiod(timeline, b_start, p);
                sb = find_subperiod(timeline, b_start + 1, p);
            }
            if (sa == nullptr || sb == nullptr) continue;
            double anchor = 0.0;
            double anchor_prev = 0.0;
            if (!try_level_position(sb->profile, lambda_ref, anchor)) continue;
            if (!try_level_position(sa->profile, lambda_ref, anchor_prev)) continue;
            double disp = anchor - anchor_prev;
            for (int i = 0; i < frame.n; ++i) {
                double x = anchor + frame.xi_left + i * frame.h;
                double vb = sb->profile.interp_cubic(x);
                front.pulsating_mismatch =
                    std::max(front.pulsating_mismatch,
                             std::abs(vb - sa->profile.interp_cubic(x - disp)));
                front.pulsating_mismatch_fitted =
                    std::max(front.pulsating_mismatch_fitted,
                             std::abs(vb - sa->profile.interp_cubic(x - disp_fit)));
            }
        }
    }
    return front;
}

DriftSeries drift(const SolutionTimeline& timeline, const FrontRecord& front, FitWindow window) {
    if (!(front.speed > 1e-6))
        throw NumericalError("drift is undefined for a front with speed " +
                             format_g(front.speed));
    LevelSetTrace trace = trace_level(timeline, front.lambda_ref, window);
    DriftSeries series;
    for (std::size_t i = 0; i < trace.period_index.size(); ++i) {
        double t = trace.period_index[i] * timeline.period;
        series.t.push_back(t);
        series.g.push_back(trace.period_index[i] * timeline.period -
                           trace.positions[i] / front.speed);
    }
    if (series.t.empty()) return series;
    double t_end = series.t.back();
    std::vector<double> tt;
    for (std::size_t i = 0; i < series.t.size(); ++i) {
        if (series.t[i] >= 0.5 * t_end && series.t[i] > 0.0) {
            series.ratio_tail.push_back(std::abs(series.g[i]) / series.t[i]);
            tt.push_back(series.t[i]);
        }
    }
    if (!series.ratio_tail.empty()) {
        series.final_ratio = series.ratio_tail.back();
        series.ratio_trend = ols(tt, series.ratio_tail).slope;
    }
    return series;
}

namespace {

struct Cluster {
    std::size_t first = 0;  // indices into the usable-trace list
    std::size_t last = 0;
    double speed = 0.0;  // median of member speeds
};

}  // namespace

TerraceDecomposition detect_terrace(const SolutionTimeline& timeline, const PhaseLadder& ladder,
                                    const TerraceSettings& settings) {
    TerraceDecomposition out;
    out.fit_window = trailing_window(timeline, settings.fit_fraction);
    const double alpha = timeline.alpha;
    const int last = static_cast<int>(timeline.period_snapshots.size()) - 1;

    for (int i = 0; i < settings.lambda_count; ++i) {
        double lambda = alpha * (i + 1) / (settings.lambda_count + 1);
        out.traces.push_back(trace_level(timeline, lambda, out.fit_window));
    }

    std::vector<std::size_t> usable;
    std::vector<double> residuals;
    for (std::size_t i = 0; i < out.traces.size(); ++i) {
        const LevelSetTrace& tr = out.traces[i];
        if (tr.speed_fit.n >= 3 && !tr.truncated) {
            usable.push_back(i);
            residuals.push_back(tr.speed_fit.residual_rms);
        } else {
            out.diagnostics.push_back("lambda " + format_g(tr.lambda) + " unusable: " +
                                      (tr.annotation.empty() ? "too few fit points"
                                                             : tr.annotation));
        }
    }
    if (usable.empty())
        throw StructuralError("no level produced a usable trace; the run is too short or "
                              "the solution never develops an interface");

    // Residual outliers are levels grazing a floor, where the crossing hops
    // between fronts; they carry no speed information. The half-cell floor
    // keeps honestly curved traces (a pulled front approaching its asymptotic
    // speed bends its position curve by a few millicells over the window).
    double med = median(residuals);
    double residual_cut = std::max(5.0 * med, 0.5 * timeline.h);
    std::vector<std::size_t> kept;
    for (std::size_t i : usable) {
        if (out.traces[i].speed_fit.residual_rms <= residual_cut)
            kept.push_back(i);
        else
            out.diagnostics.push_back("lambda " + format_g(out.traces[i].lambda) +
                                      " excluded: fit residual " +
                                      format_g(out.traces[i].speed_fit.residual_rms) +
                                      " above cut " + format_g(residual_cut));
    }
    if (kept.empty()) throw StructuralError("all level traces are residual outliers");

    double c_max = 0.0, pooled = 0.0;
    for (std::size_t i : kept) {
        c_max = std::max(c_max, std::abs(out.traces[i].speed_fit.slope));
        pooled += out.traces[i].speed_fit.slope_se * out.traces[i].speed_fit.slope_se;
    }
    pooled = std::sqrt(pooled / static_cast<double>(kept.size()));
    out.speed_gap = settings.speed_gap > 0.0
                        ? settings.speed_gap
                        : std::max({3.0 * pooled, 1e-3 * c_max, 1e-12});

    // Contiguous clusters in increasing lambda; a boundary opens where the
    // adjacent fitted speeds separate by more than the gap.
    std::vector<Cluster> clusters;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        double c = out.traces[kept[i]].speed_fit.slope;
        if (!clusters.empty()) {
            double c_prev = out.traces[kept[i - 1]].speed_fit.slope;
            if (std::abs(c - c_prev) <= out.speed_gap) {
                clusters.back().last = i;
                continue;
            }
        }
        Cluster cl;
        cl.first = cl.last = i;
        clusters.push_back(cl);
    }
    for (Cluster& cl : clusters) {
        std::vector<double> speeds;
        for (std::size_t i = cl.first; i <= cl.last; ++i)
            speeds.push_back(out.traces[kept[i]].speed_fit.slope);
        cl.speed = median(speeds);
    }
    for (std::size_t i = 1; i < clusters.size(); ++i) {
        if (clusters[i].speed < clusters[i - 1].speed - out.speed_gap) continue;
        std::ostringstream os;
        os << "speed clusters are not decreasing in lambda: " << clusters[i - 1].speed
           << " then " << clusters[i].speed
           << "; the run is too short to separate the fronts";
        throw StructuralError(os.str());
    }

    // Terrace order: front 1 is the slowest, i.e. the highest-lambda cluster.
    const int n_fronts = static_cast<int>(clusters.size());
    std::vector<const Cluster*> by_front;
    for (int k = n_fronts - 1; k >= 0; --k) by_front.push_back(&clusters[static_cast<std::size_t>(k)]);

    auto lambda_of = [&](std::size_t kept_idx) { return out.traces[kept[kept_idx]].lambda; };

    for (int k = 0; k < n_fronts; ++k) {
        const Cluster& cl = *by_front[static_cast<std::size_t>(k)];
        double lo = lambda_of(cl.first), hi = lambda_of(cl.last);
        FrontRecord front =
            extract_front(timeline, 0.5 * (lo + hi), settings, out.fit_window);
        front.index = k + 1;
        front.lambda_window = {lo, hi};
        out.fronts.push_back(std::move(front));
    }

    // Floors: sample the final profile midway between adjacent fronts (and
    // behind the slowest front for the top floor), then snap to the ladder.
    const Snapshot& fin = timeline.period_snapshots[static_cast<std::size_t>(last)];
    const GridProfile& fp = fin.profile;
    auto plateau_value = [&](double position) {
        return fp.interp_cubic(timeline.a + position);
    };
    std::vector<double> front_pos;
    for (const FrontRecord& fr : out.fronts) front_pos.push_back(fr.final_position);
    for (int k = 0; k + 1 < n_fronts; ++k)
        if (!(front_pos[static_cast<std::size_t>(k)] <
              front_pos[static_cast<std::size_t>(k) + 1]))
            out.diagnostics.push_back("front positions out of order at the final mark");

    auto snap_to_ladder = [&](double measured, bool require_stable_below) {
        FloorMatch m;
        m.measured = measured;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < ladder.records.size(); ++r) {
            const FixedPointRecord& rec = ladder.records[r];
            if (require_stable_below && !rec.stable_below) continue;
            double d = std::abs(rec.beta - measured);
            if (d < best) {
                best = d;
                m.ladder_index = static_cast<int>(r);
                m.mismatch = d;
                m.stable_below = rec.stable_below;
            }
        }
        return m;
    };

    // The window keeps only a thin maintained plateau behind the slowest
    // front (deeper nodes are dropped once they sit on the clamp orbit), so
    // the top floor is sampled just inside the left edge.
    double left_edge = fp.grid.x(0) - timeline.a;
    double top_sample = plateau_value(left_edge + 2.0 * timeline.h);
    FloorMatch top = snap_to_ladder(top_sample, true);
    if (top.ladder_index < 0)
        throw StructuralError("no stable-from-below ladder entry exists for the top floor");
    out.floors.push_back(ladder.records[static_cast<std::size_t>(top.ladder_index)].orbit);
    if (top.mismatch > settings.fp_match_tol)
        out.diagnostics.push_back("top floor measured at " + format_g(top_sample) +
                                  " sits " + format_g(top.mismatch) +
                                  " from the nearest stable-from-below ladder entry");

    for (int k = 0; k + 1 < n_fronts; ++k) {
        double mid = 0.5 * (front_pos[static_cast<std::size_t>(k)] +
                            front_pos[static_cast<std::size_t>(k) + 1]);
        FloorMatch m = snap_to_ladder(plateau_value(mid), true);
        if (m.ladder_index < 0 || m.mismatch > settings.fp_match_tol)
            out.diagnostics.push_back("interior floor measured at " + format_g(m.measured) +
                                      " matches no stable-from-below ladder entry within " +
                                      format_g(settings.fp_match_tol));
        out.ladder_crosscheck.push_back(m);
        if (m.ladder_index >= 0)
            out.floors.push_back(ladder.records[static_cast<std::size_t>(m.ladder_index)].orbit);
        else
            out.floors.push_back(constant_orbit(m.measured, timeline.period));
    }
    out.floors.push_back(constant_orbit(0.0, timeline.period));

    for (int k = 0; k < n_fronts; ++k) {
        FrontRecord& fr = out.fronts[static_cast<std::size_t>(k)];
        fr.upper_floor = out.floors[static_cast<std::size_t>(k)];
        fr.lower_floor = out.floors[static_cast<std::size_t>(k) + 1];
        out.speeds.push_back(fr.speed);
    }

    // Width rule against the wired floors: smallest C with the phase-0
    // profile inside eps/2 of the upper floor left of -C and of the lower
    // floor right of +C. The frame-edge estimate from extraction undershoots
    // when a slow trailing tail is still above eps/2 at the frame edge.
    for (int k = 0; k < n_fronts; ++k) {
        FrontRecord& fr = out.fronts[static_cast<std::size_t>(k)];
        if (fr.period_profiles.empty()) continue;
        const FrontProfile& prof = fr.period_profiles.front();
        const std::vector<double>& v = prof.values;
        const int n = static_cast<int>(v.size());
        const int half = (n - 1) / 2;
        const double upper = fr.upper_floor.beta;
        const double lower = fr.lower_floor.beta;
        int c_nodes = half;
        while (c_nodes > 0) {
            bool ok = true;
            for (int i = 0; ok && i <= half - c_nodes; ++i)
                if (std::abs(v[static_cast<std::size_t>(i)] - upper) > settings.eps / 2) ok = false;
            for (int i = half + c_nodes; ok && i < n; ++i)
                if (std::abs(v[static_cast<std::size_t>(i)] - lower) > settings.eps / 2) ok = false;
            if (!ok) break;
            --c_nodes;
        }
        fr.width_C = (c_nodes + 1) * prof.h;
        if (c_nodes >= half)
            out.diagnostics.push_back("front " + std::to_string(k + 1) +
                                      " never settles to eps/2 of its floors inside the "
                                      "sampling frame; width capped at the frame half-width");
    }
    for (int k = 1; k < n_fronts; ++k)
        if (out.speeds[static_cast<std::size_t>(k)] <
            out.speeds[static_cast<std::size_t>(k) - 1] - out.speed_gap)
            throw StructuralError("front speeds decrease with depth; the terrace ordering "
                                  "is violated");

    for (int k = 0; k < n_fronts; ++k) {
        const FrontRecord& fr = out.fronts[static_cast<std::size_t>(k)];
        if (fr.speed > settings.speed_floor) {
            out.drifts.push_back(drift(timeline, fr, out.fit_window));
        } else {
            out.drifts.push_back(DriftSeries{});
            out.diagnostics.push_back("front " + std::to_string(k + 1) +
                                      " has near-zero speed; drift skipped");
        }
    }
    return out;
}

PlateauReport plateau_check(const SolutionTimeline& timeline, const TerraceDecomposition& terrace,
                            double eps, int last_marks) {
    PlateauReport report;
    report.eps = eps;
    const int n_fronts = static_cast<int>(terrace.fronts.size());
    const int last = static_cast<int>(timeline.period_snapshots.size()) - 1;

    std::vector<std::vector<double>> pos;
    for (const FrontRecord& fr : terrace.fronts) {
        LevelSetTrace tr = trace_level(timeline, fr.lambda_ref, terrace.fit_window);
        pos.push_back(positions_by_period(tr, last));
        report.width_C.push_back(fr.width_C);
    }

    for (int j = std::max(1, last - last_marks + 1); j <= last; ++j) {
        const Snapshot& snap = timeline.period_snapshots[static_cast<std::size_t>(j)];
        const GridProfile& profile = snap.profile;
        for (int k = 0; k <= n_fronts; ++k) {
            PlateauRow row;
            row.floor_index = k;
            row.period_index = j;
            bool have_lo = k > 0, have_hi = k < n_fronts;
            double lo = profile.grid.x(0) - timeline.a;
            double hi = profile.grid.x(profile.grid.n - 1) - timeline.a;
            if (have_lo) {
                double p = pos[static_cast<std::size_t>(k) - 1][static_cast<std::size_t>(j)];
                if (!std::isfinite(p)) continue;
                lo = p + terrace.fronts[static_cast<std::size_t>(k) - 1].width_C;
            }
            if (have_hi) {
                double p = pos[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
                if (!std::isfinite(p)) continue;
                hi = p - terrace.fronts[static_cast<std::size_t>(k)].width_C;
            }
            row.interval_lo = lo;
            row.interval_hi = hi;
            if (!(lo < hi)) {
                row.empty = true;
                report.rows.push_back(row);
                continue;
            }
            const PeriodicOrbit& orbit = terrace.floors[static_cast<std::size_t>(k)];
            double floor_value = orbit.beta;
            double dev = 0.0;
            const Grid1D& g = profile.grid;
            int i_lo = std::max(0, static_cast<int>(std::ceil(
                                       (timeline.a + lo) / g.h - static_cast<double>(g.i_left))));
            int i_hi = std::min(g.n - 1,
                                static_cast<int>(std::floor((timeline.a + hi) / g.h -
                                                            static_cast<double>(g.i_left))));
            if (i_lo > i_hi) {
                row.empty = true;
                report.rows.push_back(row);
                continue;
            }
            for (int i = i_lo; i <= i_hi; ++i)
                dev = std::max(dev, std::abs(profile.u[static_cast<std::size_t>(i)] - floor_value));
            row.sup_deviation = dev;
            row.within_eps = dev <= eps;
            report.rows.push_back(row);
        }
    }
    return report;
}

SandwichReport speed_sandwich(const SolutionTimeline& timeline, const PeriodicNonlinearity& nl,
                              const TerraceSettings& settings) {
    SandwichReport report;
    report.k_hat = lipschitz_bound(nl);
    report.c_upper_bound = 2.0 * std::sqrt(report.k_hat);
    FitWindow window = trailing_window(timeline, settings.fit_fraction);
    double slowest = std::numeric_limits<double>::infinity();
    double fastest = -std::numeric_limits<double>::infinity();
    int counted = 0;
    for (int i = 0; i < settings.lambda_count; ++i) {
        double lambda = timeline.alpha * (i + 1) / (settings.lambda_count + 1);
        LevelSetTrace tr = trace_level(timeline, lambda, window);
        if (tr.speed_fit.n < 3 || tr.truncated) continue;
        slowest = std::min(slowest, tr.speed_fit.slope);
        fastest = std::max(fastest, tr.speed_fit.slope);
        ++counted;
    }
    if (counted == 0) {
        report.c_lower_obs = 0.0;
        report.c_fastest_obs = 0.0;
        report.all_within_bound = true;  // vacuous: nothing propagates
        return report;
    }
    report.c_lower_obs = slowest;
    report.c_fastest_obs = fastest;
    report.all_within_bound = fastest <= report.c_upper_bound + settings.sandwich_slack;
    return report;
}

}  // namespace terrace
