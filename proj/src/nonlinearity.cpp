#include "terrace/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "terrace/errors.hpp"
#include "terrace/expression.hpp"

namespace terrace {

double PeriodicNonlinearity::derivative(double t, double u) const {
    if (analytic_derivative) return df(t, u);
    double h = 1e-6 * std::max(1.0, std::abs(u));
    return (f(t, u + h) - f(t, u - h)) / (2.0 * h);
}

void PeriodicNonlinearity::eval_many(double t, std::span<const double> u,
                                     std::span<double> out) const {
    if (f_batch) {
        f_batch(t, u, out);
        return;
    }
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = f(t, u[i]);
}

namespace {

double getParam(const std::map<std::string, double>& params, const std::string& key,
                double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void rejectUnknown(const FamilyPreset& preset, std::initializer_list<const char*> known) {
    for (const auto& [key, value] : preset.params) {
        (void)value;
        if (std::find_if(known.begin(), known.end(),
                         [&](const char* k) { return key == k; }) == known.end())
            throw ConfigError("preset '" + preset.name + "': unknown parameter '" + key + "'");
    }
}

PeriodicNonlinearity makeThreeStable() {
    PeriodicNonlinearity nl;
    nl.name = "threestable_paper";
    nl.period = 2.0 * std::numbers::pi;
    nl.u_max = 4.0;
    nl.analytic_derivative = true;

    auto poly = [](double u) {
        double um1 = u - 1.0;
        double um1_2 = um1 * um1;
        return u * u * um1_2 * um1_2 * um1 * (4.0 - u);
    };
    auto dpoly = [](double u) {
        double um1 = u - 1.0;
        double um1_2 = um1 * um1;
        double um1_4 = um1_2 * um1_2;
        return 2.0 * u * um1_4 * um1 * (4.0 - u) + 5.0 * u * u * um1_4 * (4.0 - u) -
               u * u * um1_4 * um1;
    };
    auto amp = [](double t, double u) { return (u < 1.0 ? 2.0 : 4.0) + std::sin(t); };

    nl.f = [poly, amp](double t, double u) { return amp(t, u) * poly(u); };
    nl.df = [dpoly, amp](double t, double u) { return amp(t, u) * dpoly(u); };
    nl.f_batch = [poly](double t, std::span<const double> u, std::span<double> out) {
        double s = std::sin(t);
        double lo = 2.0 + s, hi = 4.0 + s;
        for (std::size_t i = 0; i < u.size(); ++i)
            out[i] = (u[i] < 1.0 ? lo : hi) * poly(u[i]);
    };
    return nl;
}

PeriodicNonlinearity makeMixed(double eps, double rho) {
    if (!(eps > 0.0 && eps <= 1.0))
        throw ConfigError("mixed_paper: epsilon must lie in (0, 1], got " + std::to_string(eps));
    if (!(rho > 1.0))
        throw ConfigError("mixed_paper: rho must exceed 1, got " + std::to_string(rho));

    PeriodicNonlinearity nl;
    nl.name = "mixed_paper";
    nl.period = 2.0 * std::numbers::pi;
    nl.u_max = 8.0;
    nl.analytic_derivative = true;

    double er = eps * rho;
    auto lower = [er, rho](double u) {
        double um3 = u - 3.0;
        return er * u * std::exp(-rho * u) * (u - 1.0) * um3 * um3 * um3;
    };
    auto dlower = [er, rho](double u) {
        double um3 = u - 3.0;
        double um3_2 = um3 * um3;
        double g = u * (u - 1.0) * um3_2 * um3;
        double gp = (u - 1.0) * um3_2 * um3 + u * um3_2 * um3 + 3.0 * u * (u - 1.0) * um3_2;
        return er * std::exp(-rho * u) * (gp - rho * g);
    };
    auto upper = [](double t, double u) {
        double um3 = u - 3.0;
        return (4.0 + std::sin(t)) * um3 * um3 * um3 * (8.0 - u);
    };
    auto dupper = [](double t, double u) {
        double um3 = u - 3.0;
        return (4.0 + std::sin(t)) * um3 * um3 * (27.0 - 4.0 * u);
    };

    nl.f = [lower, upper](double t, double u) { return u < 3.0 ? lower(u) : upper(t, u); };
    nl.df = [dlower, dupper](double t, double u) { return u < 3.0 ? dlower(u) : dupper(t, u); };
    nl.f_batch = [lower](double t, std::span<const double> u, std::span<double> out) {
        double amp = 4.0 + std::sin(t);
        for (std::size_t i = 0; i < u.size(); ++i) {
            double v = u[i];
            if (v < 3.0) {
                out[i] = lower(v);
            } else {
                double vm3 = v - 3.0;
                out[i] = amp * vm3 * vm3 * vm3 * (8.0 - v);
            }
        }
    };
    return nl;
}

PeriodicNonlinearity makeBistableCubic(double theta, double period) {
    if (!(theta > 0.0 && theta < 1.0))
        throw ConfigError("bistable_cubic: theta must lie in (0, 1), got " + std::to_string(theta));
    PeriodicNonlinearity nl;
    nl.name = "bistable_cubic";
    nl.period = period;
    nl.u_max = 1.0;
    nl.analytic_derivative = true;
    nl.f = [theta](double, double u) { return u * (u - theta) * (1.0 - u); };
    nl.df = [theta](double, double u) { return -3.0 * u * u + 2.0 * (1.0 + theta) * u - theta; };
    nl.f_batch = [theta](double, std::span<const double> u, std::span<double> out) {
        for (std::size_t i = 0; i < u.size(); ++i)
            out[i] = u[i] * (u[i] - theta) * (1.0 - u[i]);
    };
    return nl;
}

PeriodicNonlinearity makeKpp(double r, double period) {
    if (!(r > 0.0)) throw ConfigError("kpp_logistic: r must be positive");
    PeriodicNonlinearity nl;
    nl.name = "kpp_logistic";
    nl.period = period;
    nl.u_max = 1.0;
    nl.analytic_derivative = true;
    nl.f = [r](double, double u) { return r * u * (1.0 - u); };
    nl.df = [r](double, double u) { return r * (1.0 - 2.0 * u); };
    nl.f_batch = [r](double, std::span<const double> u, std::span<double> out) {
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = r * u[i] * (1.0 - u[i]);
    };
    return nl;
}

PeriodicNonlinearity makeIgnition(double theta, double period) {
    if (!(theta > 0.0 && theta < 1.0))
        throw ConfigError("ignition_flat: theta must lie in (0, 1), got " + std::to_string(theta));
    PeriodicNonlinearity nl;
    nl.name = "ignition_flat";
    nl.period = period;
    nl.u_max = 1.0;
    nl.analytic_derivative = true;
    nl.f = [theta](double, double u) {
        if (u <= theta) return 0.0;
        double d = u - theta;
        return d * d * (1.0 - u);
    };
    nl.df = [theta](double, double u) {
        if (u <= theta) return 0.0;
        double d = u - theta;
        return 2.0 * d * (1.0 - u) - d * d;
    };
    nl.f_batch = [theta](double, std::span<const double> u, std::span<double> out) {
        for (std::size_t i = 0; i < u.size(); ++i) {
            double v = u[i];
            if (v <= theta) {
                out[i] = 0.0;
            } else {
                double d = v - theta;
                out[i] = d * d * (1.0 - v);
            }
        }
    };
    return nl;
}

PeriodicNonlinearity makeLinearPeriodic(double gamma, double period, double u_max) {
    PeriodicNonlinearity nl;
    nl.name = "linear_periodic";
    nl.period = period;
    nl.u_max = u_max;
    nl.analytic_derivative = true;
    double omega = 2.0 * std::numbers::pi / period;
    nl.f = [gamma, omega](double t, double u) { return gamma * u * std::sin(omega * t); };
    nl.df = [gamma, omega](double t, double) { return gamma * std::sin(omega * t); };
    nl.f_batch = [gamma, omega](double t, std::span<const double> u, std::span<double> out) {
        double s = gamma * std::sin(omega * t);
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = s * u[i];
    };
    return nl;
}

PeriodicNonlinearity makeCustom(const std::string& expression, double period, double u_max) {
    if (!(period > 0.0)) throw ConfigError("custom: period must be positive");
    if (!(u_max > 0.0)) throw ConfigError("custom: u_max must be positive");
    PeriodicNonlinearity nl;
    nl.name = "custom";
    nl.period = period;
    nl.u_max = u_max;
    nl.analytic_derivative = false;
    Expression expr = Expression::parse(expression);
    nl.f = [expr](double t, double u) { return expr.eval(t, u); };
    return nl;
}

}  // namespace

PeriodicNonlinearity build_preset(const FamilyPreset& preset) {
    const auto& p = preset.params;
    if (preset.name == "threestable_paper") {
        rejectUnknown(preset, {});
        return makeThreeStable();
    }
    if (preset.name == "mixed_paper") {
        rejectUnknown(preset, {"epsilon", "rho"});
        return makeMixed(getParam(p, "epsilon", 1.0), getParam(p, "rho", 2.0));
    }
    if (preset.name == "bistable_cubic") {
        rejectUnknown(preset, {"theta", "period"});
        return makeBistableCubic(getParam(p, "theta", 0.25), getParam(p, "period", 1.0));
    }
    if (preset.name == "kpp_logistic") {
        rejectUnknown(preset, {"r", "period"});
        return makeKpp(getParam(p, "r", 1.0), getParam(p, "period", 1.0));
    }
    if (preset.name == "ignition_flat") {
        rejectUnknown(preset, {"theta", "period"});
        return makeIgnition(getParam(p, "theta", 0.25), getParam(p, "period", 1.0));
    }
    if (preset.name == "linear_periodic") {
        rejectUnknown(preset, {"gamma", "period", "u_max"});
        return makeLinearPeriodic(getParam(p, "gamma", 1.0),
                                  getParam(p, "period", 2.0 * std::numbers::pi),
                                  getParam(p, "u_max", 2.0));
    }
    if (preset.name == "custom") {
        rejectUnknown(preset, {"period", "u_max"});
        if (preset.expression.empty())
            throw ConfigError("custom preset requires an expression");
        return makeCustom(preset.expression, getParam(p, "period", 1.0),
                          getParam(p, "u_max", 1.0));
    }
    throw ConfigError("unknown nonlinearity preset '" + preset.name + "'");
}

PeriodicNonlinearity build_preset(const std::string& name,
                                  const std::map<std::string, double>& params) {
    FamilyPreset preset;
    preset.name = name;
    preset.params = params;
    return build_preset(preset);
}

double lipschitz_bound(const PeriodicNonlinearity& nl, double u_cap, int n_t, int n_u) {
    if (u_cap <= 0.0) u_cap = nl.u_max;
    double best = 0.0;
    for (int i = 0; i <= n_t; ++i) {
        double t = nl.period * static_cast<double>(i) / static_cast<double>(n_t);
        for (int j = 0; j <= n_u; ++j) {
            double u = u_cap * static_cast<double>(j) / static_cast<double>(n_u);
            best = std::max(best, std::abs(nl.derivative(t, u)));
        }
    }
    return best;
}

}  // namespace terrace
