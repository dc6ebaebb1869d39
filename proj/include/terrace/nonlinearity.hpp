#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>

namespace terrace {

/// A time-periodic reaction term f(t, u) with f(t + period, u) = f(t, u)
/// and f(t, 0) = 0, defined on the state range [0, u_max].
///
/// `derivative` is analytic for the built-in families; for expression-built
/// terms it falls back to a central difference with step 1e-6 * max(1, |u|).
/// `eval_many` is the solver's hot path: one time, a whole profile.
struct PeriodicNonlinearity {
    std::string name;
    double period = 1.0;
    double u_max = 1.0;
    bool analytic_derivative = false;

    std::function<double(double, double)> f;
    std::function<double(double, double)> df;  // empty when not analytic
    std::function<void(double, std::span<const double>, std::span<double>)> f_batch;

    double eval(double t, double u) const { return f(t, u); }

    double derivative(double t, double u) const;

    void eval_many(double t, std::span<const double> u, std::span<double> out) const;
};

/// Named family plus parameter values, as read from a run config.
struct FamilyPreset {
    std::string name;
    std::map<std::string, double> params;
    std::string expression;  // only for name == "custom"
};

/// Instantiates one of the built-in families, or compiles a custom
/// expression (params: period, u_max). Unknown names and out-of-range
/// parameters raise ConfigError.
///
/// Families: threestable_paper, mixed_paper, bistable_cubic, kpp_logistic,
/// ignition_flat, linear_periodic, custom.
PeriodicNonlinearity build_preset(const FamilyPreset& preset);

PeriodicNonlinearity build_preset(const std::string& name,
                                  const std::map<std::string, double>& params = {});

/// Grid maximum of |f_u| over [0, period] x [0, u_cap]; u_cap <= 0 means
/// the full state range [0, u_max]. This is the constant the explicit
/// reaction step and the spreading-speed bound are calibrated against.
double lipschitz_bound(const PeriodicNonlinearity& nl, double u_cap = -1.0,
                       int n_t = 128, int n_u = 2048);

}  // namespace terrace
