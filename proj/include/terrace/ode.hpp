#pragma once

#include <utility>
#include <vector>

#include "terrace/nonlinearity.hpp"

namespace terrace {

/// Adaptive integrator settings for the kinetics ODE w' = f(t, w).
struct OdeSettings {
    double atol = 1e-10;
    double rtol = 1e-8;
    /// |w| beyond escape_factor * (u_max + 1) aborts with NumericalError.
    double escape_factor = 10.0;
};

/// Value of the flow w(t1) started from w(t0) = beta.
double flow(const PeriodicNonlinearity& nl, double beta, double t0, double t1,
            const OdeSettings& settings = {});

/// Flow endpoint together with log dP/dbeta, obtained by integrating the
/// variational equation eta' = f_u(t, w(t)) along the same trajectory.
/// Working in log space keeps strongly attracting or repelling orbits
/// representable (|log multiplier| can reach 1e5 for the stiff families).
std::pair<double, double> flow_with_log_multiplier(const PeriodicNonlinearity& nl, double beta,
                                                   double t0, double t1,
                                                   const OdeSettings& settings = {});

/// Flow sampled at n+1 uniformly spaced times covering [t0, t1].
std::vector<double> flow_samples(const PeriodicNonlinearity& nl, double beta, double t0,
                                 double t1, int n, const OdeSettings& settings = {});

/// The Poincare (period) map P(beta) = w(period) with w(0) = beta.
double poincare(const PeriodicNonlinearity& nl, double beta,
                const OdeSettings& settings = {});

/// One sampled periodic trajectory: value[i] = w(t[i]), t uniform over
/// [0, period], with the periodicity residual |P(beta) - beta|.
struct PeriodicOrbit {
    double beta = 0.0;
    std::vector<double> t;
    std::vector<double> value;
    double residual = 0.0;
};

PeriodicOrbit orbit_samples(const PeriodicNonlinearity& nl, double beta, int n = 512,
                            const OdeSettings& settings = {});

/// -(1/T) integral of f_u(t, w(t)) dt over one period, by composite Simpson
/// on the orbit samples.
double floquet_exponent(const PeriodicNonlinearity& nl, const PeriodicOrbit& orbit);

/// The normalized periodic eigenfunction phi(t[i]) along the orbit,
/// phi(0) = 1, via cumulative quadrature of f_u.
std::vector<double> eigenfunction(const PeriodicNonlinearity& nl, const PeriodicOrbit& orbit);

struct StabilitySettings {
    double delta = 1e-3;   // probe offset; shrunk to a tenth of the gap to neighbors
    int n_iter = 40;
    double tol_fp = 1e-8;
    /// A probe sequence counts as attracted when it stays monotone toward
    /// beta and either lands within 10*tol_fp or contracts below this
    /// fraction of the initial offset (degenerate roots converge
    /// algebraically, so a fixed iteration budget cannot reach tol_fp).
    double contraction = 0.6;
};

/// (stable_from_below, stable_from_above) by iterating P from beta -/+ delta.
std::pair<bool, bool> classify_stability(const PeriodicNonlinearity& nl, double beta,
                                         const StabilitySettings& st = {},
                                         const OdeSettings& settings = {});

struct FixedPointRecord {
    PeriodicOrbit orbit;
    double beta = 0.0;
    double multiplier = 1.0;      // exp(log_multiplier); may underflow to 0 or overflow to inf
    double log_multiplier = 0.0;  // variational route
    double floquet_exponent = 0.0;
    bool degenerate = false;      // |multiplier - 1| within mult_tol
    bool stable_below = false;
    bool stable_above = false;
    bool isolated_below = false;
    bool continuum_member = false;
};

struct ScanSettings {
    int n_grid = 256;
    int n_orbit = 512;
    double tol_fp = 1e-8;
    double continuum_tol = 1e-7;
    double mult_tol = 1e-3;
    StabilitySettings stability;
};

/// The phase ladder: every fixed point of P in [0, u_max] with its
/// stability data, plus any flat bands where P is the identity.
struct PhaseLadder {
    std::vector<FixedPointRecord> records;           // ascending beta
    std::vector<std::pair<double, double>> continua; // [lo, hi] bands of fixed points
    std::vector<std::pair<double, double>> scan;     // (beta, P(beta) - beta) on the grid
    double alpha = 0.0;                              // top fixed point
    bool alpha_stable_below = false;
};

PhaseLadder scan_fixed_points(const PeriodicNonlinearity& nl, const ScanSettings& scan = {},
                              const OdeSettings& settings = {});

}  // namespace terrace
