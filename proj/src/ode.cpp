#include "terrace/ode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "terrace/errors.hpp"

namespace terrace {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247,
                 A64 = 49.0 / 176, A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
// b - b*: weights of the embedded error estimate (stage 2 drops out).
constexpr double E1 = B1 - 5179.0 / 57600, E3 = B3 - 7571.0 / 16695, E4 = B4 - 393.0 / 640,
                 E5 = B5 + 92097.0 / 339200, E6 = B6 - 187.0 / 2100, E7 = -1.0 / 40;

constexpr double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9;

constexpr long long kMaxSteps = 200'000'000LL;

/// Adaptive Dormand-Prince over a system of N scalar equations, with
/// endpoint-exact landing on a list of requested sample times.
template <int N, class Rhs, class OnSample>
void rk45_integrate(Rhs&& rhs, std::array<double, N>& y, double t0, double t1,
                    std::span<const double> sample_times, OnSample&& on_sample,
                    const OdeSettings& s, double escape_bound) {
    using Vec = std::array<double, N>;
    const double span = t1 - t0;
    if (span <= 0.0) {
        for (double ts : sample_times) on_sample(ts, y);
        return;
    }
    const double hmin = 1e-14 * std::max(1.0, std::abs(span));

    double t = t0;
    double h = span * 1e-3;
    std::size_t next_sample = 0;
    while (next_sample < sample_times.size() && sample_times[next_sample] <= t0) {
        on_sample(sample_times[next_sample], y);
        ++next_sample;
    }

    Vec k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
    rhs(t, y, k1);
    long long steps = 0;
    bool done = false;
    while (!done) {
        if (++steps > kMaxSteps)
            throw NumericalError("ode integration exceeded the step budget");
        double target = t1;
        bool hit_sample = false;
        if (next_sample < sample_times.size() && sample_times[next_sample] < target) {
            target = sample_times[next_sample];
            hit_sample = true;
        }
        if (t + h >= target) {
            h = target - t;
            if (h <= 0.0) h = hmin;
        }

        for (int i = 0; i < N; ++i) ytmp[i] = y[i] + h * A21 * k1[i];
        rhs(t + C2 * h, ytmp, k2);
        for (int i = 0; i < N; ++i) ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        rhs(t + C3 * h, ytmp, k3);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        rhs(t + C4 * h, ytmp, k4);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        rhs(t + C5 * h, ytmp, k5);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] +
                      h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        rhs(t + h, ytmp, k6);
        for (int i = 0; i < N; ++i)
            ynew[i] = y[i] +
                      h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        rhs(t + h, ynew, k7);

        double err = 0.0;
        for (int i = 0; i < N; ++i) {
            double e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] +
                            E7 * k7[i]);
            double scale = s.atol + s.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err = std::max(err, std::abs(e) / scale);
        }

        if (!std::isfinite(err) || !std::isfinite(ynew[0])) {
            h *= 0.2;
            if (h < hmin) throw NumericalError("ode step size underflow (non-finite state)");
            rhs(t, y, k1);
            continue;
        }

        if (err <= 1.0) {
            t += h;
            y = ynew;
            k1 = k7;  // first-same-as-last
            if (std::abs(y[0]) > escape_bound)
                throw NumericalError("ode trajectory escaped the admissible range at t = " +
                                     std::to_string(t));
            if (hit_sample && t >= target) {
                on_sample(target, y);
                ++next_sample;
                while (next_sample < sample_times.size() &&
                       sample_times[next_sample] <= t) {
                    on_sample(sample_times[next_sample], y);
                    ++next_sample;
                }
            }
            if (t >= t1) done = true;
            double factor = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
            h *= std::clamp(factor, 0.2, 5.0);
        } else {
            double factor = 0.9 * std::pow(err, -0.2);
            h *= std::clamp(factor, 0.1, 0.9);
            if (h < hmin) throw NumericalError("ode step size underflow");
        }
    }
    while (next_sample < sample_times.size()) {
        on_sample(sample_times[next_sample], y);
        ++next_sample;
    }
}

double escapeBound(const PeriodicNonlinearity& nl, const OdeSettings& s) {
    return s.escape_factor * (nl.u_max + 1.0);
}

}  // namespace

double flow(const PeriodicNonlinearity& nl, double beta, double t0, double t1,
            const OdeSettings& settings) {
    std::array<double, 1> y{beta};
    auto rhs = [&nl](double t, const std::array<double, 1>& v, std::array<double, 1>& d) {
        d[0] = nl.f(t, v[0]);
    };
    rk45_integrate<1>(rhs, y, t0, t1, {}, [](double, const std::array<double, 1>&) {},
                      settings, escapeBound(nl, settings));
    return y[0];
}

std::pair<double, double> flow_with_log_multiplier(const PeriodicNonlinearity& nl, double beta,
                                                   double t0, double t1,
                                                   const OdeSettings& settings) {
    std::array<double, 2> y{beta, 0.0};
    auto rhs = [&nl](double t, const std::array<double, 2>& v, std::array<double, 2>& d) {
        d[0] = nl.f(t, v[0]);
        d[1] = nl.derivative(t, v[0]);
    };
    rk45_integrate<2>(rhs, y, t0, t1, {}, [](double, const std::array<double, 2>&) {},
                      settings, escapeBound(nl, settings));
    return {y[0], y[1]};
}

std::vector<double> flow_samples(const PeriodicNonlinearity& nl, double beta, double t0,
                                 double t1, int n, const OdeSettings& settings) {
    std::vector<double> times(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
        times[static_cast<std::size_t>(i)] =
            t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n);
    std::vector<double> values;
    values.reserve(times.size());
    std::array<double, 1> y{beta};
    auto rhs = [&nl](double t, const std::array<double, 1>& v, std::array<double, 1>& d) {
        d[0] = nl.f(t, v[0]);
    };
    rk45_integrate<1>(rhs, y, t0, t1, times,
                      [&values](double, const std::array<double, 1>& v) {
                          values.push_back(v[0]);
                      },
                      settings, escapeBound(nl, settings));
    return values;
}

double poincare(const PeriodicNonlinearity& nl, double beta, const OdeSettings& settings) {
    return flow(nl, beta, 0.0, nl.period, settings);
}

PeriodicOrbit orbit_samples(const PeriodicNonlinearity& nl, double beta, int n,
                            const OdeSettings& settings) {
    if (n < 2 || n % 2 != 0) throw ConfigError("orbit sample count must be even and >= 2");
    PeriodicOrbit orbit;
    orbit.beta = beta;
    orbit.t.resize(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
        orbit.t[static_cast<std::size_t>(i)] =
            nl.period * static_cast<double>(i) / static_cast<double>(n);
    orbit.value = flow_samples(nl, beta, 0.0, nl.period, n, settings);
    orbit.residual = std::abs(orbit.value.back() - beta);
    return orbit;
}

double floquet_exponent(const PeriodicNonlinearity& nl, const PeriodicOrbit& orbit) {
    const std::size_t m = orbit.t.size();
    if (m < 3 || m % 2 == 0)
        throw ConfigError("floquet quadrature needs an even number of intervals");
    double h = orbit.t[1] - orbit.t[0];
    double sum = 0.0;
    for (std::size_t i = 0; i + 2 < m; i += 2) {
        double g0 = nl.derivative(orbit.t[i], orbit.value[i]);
        double g1 = nl.derivative(orbit.t[i + 1], orbit.value[i + 1]);
        double g2 = nl.derivative(orbit.t[i + 2], orbit.value[i + 2]);
        sum += (h / 3.0) * (g0 + 4.0 * g1 + g2);
    }
    return -sum / nl.period;
}

std::vector<double> eigenfunction(const PeriodicNonlinearity& nl, const PeriodicOrbit& orbit) {
    const std::size_t m = orbit.t.size();
    double h = orbit.t[1] - orbit.t[0];
    std::vector<double> g(m);
    for (std::size_t i = 0; i < m; ++i) g[i] = nl.derivative(orbit.t[i], orbit.value[i]);

    // Cumulative integral of g: Simpson across pairs, with a third-order
    // three-point rule for the odd half-way points.
    std::vector<double> cum(m, 0.0);
    for (std::size_t i = 0; i + 2 < m; i += 2) {
        cum[i + 1] = cum[i] + (h / 12.0) * (5.0 * g[i] + 8.0 * g[i + 1] - g[i + 2]);
        cum[i + 2] = cum[i] + (h / 3.0) * (g[i] + 4.0 * g[i + 1] + g[i + 2]);
    }
    double total = cum[m - 1];
    std::vector<double> phi(m);
    for (std::size_t i = 0; i < m; ++i)
        phi[i] = std::exp(cum[i] - (orbit.t[i] / nl.period) * total);
    return phi;
}

std::pair<bool, bool> classify_stability(const PeriodicNonlinearity& nl, double beta,
                                         const StabilitySettings& st,
                                         const OdeSettings& settings) {
    auto attracted = [&](double sign) {
        double x = beta + sign * st.delta;
        double prev = st.delta;
        double dist = prev;
        for (int i = 0; i < st.n_iter; ++i) {
            try {
                x = poincare(nl, x, settings);
            } catch (const NumericalError&) {
                return false;  // escaped: certainly not attracted
            }
            dist = std::abs(x - beta);
            if (dist <= 10.0 * st.tol_fp) return true;
            if (dist > prev + st.tol_fp) return false;  // moving away
            prev = dist;
        }
        return dist <= st.contraction * st.delta;
    };
    return {attracted(-1.0), attracted(+1.0)};
}

PhaseLadder scan_fixed_points(const PeriodicNonlinearity& nl, const ScanSettings& scan,
                              const OdeSettings& settings) {
    if (scan.n_grid < 16) throw ConfigError("fixed point scan needs n_grid >= 16");
    const int n = scan.n_grid;
    const double umax = nl.u_max;
    const double cell = umax / static_cast<double>(n);

    PhaseLadder ladder;
    std::vector<double> g(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) {
        double beta = umax * static_cast<double>(i) / static_cast<double>(n);
        g[static_cast<std::size_t>(i)] = poincare(nl, beta, settings) - beta;
        ladder.scan.emplace_back(beta, g[static_cast<std::size_t>(i)]);
    }

    // Identity bands: runs of at least three consecutive nodes where the
    // period map returns to itself within continuum_tol are candidates.
    // A candidate is confirmed only where the return stays at integrator
    // noise scale (atol + rtol*|beta|) on a refined grid: a high-order
    // tangency also keeps |P(beta) - beta| under continuum_tol across
    // whole cells, but its return grows polynomially away from the root
    // while a genuine identity band stays at noise everywhere.
    auto noise_bound = [&settings](double beta) {
        return 3.0 * (settings.atol + settings.rtol * std::abs(beta));
    };
    auto band_is_identity = [&](int lo_node, int hi_node) {
        for (int k = lo_node; k <= hi_node; ++k)
            if (std::abs(g[static_cast<std::size_t>(k)]) > noise_bound(k * cell)) return false;
        int cells = hi_node - lo_node;
        int per_cell = std::min(4, std::max(1, 512 / std::max(1, cells)));
        for (int c = lo_node; c < hi_node; ++c)
            for (int q = 1; q <= per_cell; ++q) {
                double beta = (c + q / (per_cell + 1.0)) * cell;
                if (std::abs(poincare(nl, beta, settings) - beta) > noise_bound(beta))
                    return false;
            }
        return true;
    };
    std::vector<bool> in_band(static_cast<std::size_t>(n) + 1, false);
    {
        int run_start = -1;
        for (int i = 0; i <= n + 0; ++i) {
            bool flat = i <= n && std::abs(g[static_cast<std::size_t>(i)]) < scan.continuum_tol;
            if (flat && run_start < 0) run_start = i;
            if ((!flat || i == n) && run_start >= 0) {
                int run_end = flat ? i : i - 1;
                if (run_end - run_start + 1 >= 3 && band_is_identity(run_start, run_end)) {
                    ladder.continua.emplace_back(run_start * cell, run_end * cell);
                    for (int k = run_start; k <= run_end; ++k)
                        in_band[static_cast<std::size_t>(k)] = true;
                }
                run_start = -1;
            }
        }
    }

    auto inContinuum = [&](double beta) {
        for (auto [lo, hi] : ladder.continua)
            if (beta >= lo - cell && beta <= hi + cell) return true;
        return false;
    };

    // Root candidates: the origin (f(t,0) = 0 always), exact grid zeros,
    // and bisection inside every sign-change cell.
    std::vector<double> roots;
    roots.push_back(0.0);
    for (int i = 0; i <= n; ++i) {
        if (in_band[static_cast<std::size_t>(i)]) continue;
        double gi = std::abs(g[static_cast<std::size_t>(i)]);
        if (gi > scan.tol_fp) continue;
        // Near a flat tangency several neighboring nodes can sit under
        // tol_fp; only the local minimum of |g| marks the root.
        if (i > 0 && gi > std::abs(g[static_cast<std::size_t>(i - 1)])) continue;
        if (i < n && gi > std::abs(g[static_cast<std::size_t>(i + 1)])) continue;
        roots.push_back(i * cell);
    }
    for (int i = 0; i < n; ++i) {
        double glo = g[static_cast<std::size_t>(i)];
        double ghi = g[static_cast<std::size_t>(i + 1)];
        if (in_band[static_cast<std::size_t>(i)] && in_band[static_cast<std::size_t>(i + 1)])
            continue;
        if (!(glo < 0.0) == !(ghi < 0.0)) continue;  // no strict sign change
        // An endpoint that is exactly fixed is the root itself (the grid
        // pass records it); bisecting toward it only resolves integrator
        // noise around a flat tangency.
        if (glo == 0.0 || ghi == 0.0) continue;
        double lo = i * cell, hi = (i + 1) * cell;
        double flo = glo;
        while (hi - lo > scan.tol_fp) {
            double mid = 0.5 * (lo + hi);
            double fmid = poincare(nl, mid, settings) - mid;
            if ((fmid < 0.0) == (flo < 0.0)) {
                lo = mid;
                flo = fmid;
            } else {
                hi = mid;
            }
        }
        roots.push_back(0.5 * (lo + hi));
    }

    std::sort(roots.begin(), roots.end());
    std::vector<double> unique_roots;
    for (double r : roots) {
        if (!unique_roots.empty() && r - unique_roots.back() < std::max(10.0 * scan.tol_fp, cell * 0.5))
            continue;
        unique_roots.push_back(r);
    }

    const double log_tol = std::log1p(scan.mult_tol);
    for (double beta : unique_roots) {
        FixedPointRecord rec;
        rec.beta = beta;
        rec.orbit = orbit_samples(nl, beta, scan.n_orbit, settings);
        auto [endpoint, log_mult] = flow_with_log_multiplier(nl, beta, 0.0, nl.period, settings);
        (void)endpoint;
        rec.log_multiplier = log_mult;
        rec.multiplier = std::exp(log_mult);
        rec.floquet_exponent = floquet_exponent(nl, rec.orbit);
        rec.degenerate = std::abs(log_mult) <= log_tol;
        rec.continuum_member = inContinuum(beta);

        if (!rec.degenerate && !rec.continuum_member) {
            bool stable = log_mult < 0.0;
            rec.stable_below = stable;
            rec.stable_above = stable;
        } else {
            StabilitySettings st = scan.stability;
            st.tol_fp = scan.tol_fp;
            // Shrink the probe to stay clear of the nearest neighbor.
            double gap = umax;
            for (double other : unique_roots)
                if (other != beta) gap = std::min(gap, std::abs(other - beta));
            for (auto [lo, hi] : ladder.continua) {
                if (beta < lo) gap = std::min(gap, lo - beta);
                if (beta > hi) gap = std::min(gap, beta - hi);
            }
            st.delta = std::min(st.delta, gap / 10.0);
            if (st.delta < 100.0 * scan.tol_fp) st.delta = 100.0 * scan.tol_fp;
            auto [below, above] = classify_stability(nl, beta, st, settings);
            rec.stable_below = below;
            rec.stable_above = above;
        }
        ladder.records.push_back(std::move(rec));
    }

    // Isolation from below: no other fixed point (root or band) in a
    // window just beneath beta.
    const double iso_window = std::max(2.0 * cell, 100.0 * scan.tol_fp);
    for (std::size_t i = 0; i < ladder.records.size(); ++i) {
        auto& rec = ladder.records[i];
        bool isolated = true;
        if (rec.continuum_member) isolated = false;
        if (i > 0 && rec.beta - ladder.records[i - 1].beta < iso_window) isolated = false;
        for (auto [lo, hi] : ladder.continua)
            if (hi < rec.beta + scan.tol_fp && rec.beta - hi < iso_window) isolated = false;
        rec.isolated_below = isolated && rec.beta > 0.0;
    }

    if (!ladder.records.empty()) {
        const auto& top = ladder.records.back();
        ladder.alpha = top.beta;
        ladder.alpha_stable_below = top.stable_below;
    }
    return ladder;
}

}  // namespace terrace
