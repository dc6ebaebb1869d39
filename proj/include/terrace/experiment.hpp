#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "terrace/detector.hpp"
#include "terrace/nonlinearity.hpp"
#include "terrace/ode.hpp"
#include "terrace/pde.hpp"

namespace terrace {

/// One experiment definition, as read from a sectioned key-value config
/// file. Serialization is canonical: every field is always emitted, so
/// serialize(parse(serialize(c))) == serialize(c).
struct RunConfig {
    int schema_version = 1;

    // [nonlinearity]
    std::string preset = "bistable_cubic";
    std::map<std::string, double> params;
    std::string expression;  // preset == "custom" only
    double period = 1.0;     // custom only; presets carry their own
    double u_max = 1.0;      // custom only

    // [initial]
    double alpha = 1.0;
    double a = 0.0;
    bool flat_ic = false;

    // [solver]
    double h = 0.05;
    int steps_per_period = 0;  // 0 = derive
    int horizon_periods = 10;
    double x_left = -20.0;
    double x_right = 30.0;
    double window_margin = 20.0;
    double shift_trigger = 0.25;
    int n_max = 4'000'000;
    double plateau_tol = 1e-6;
    int check_every = 16;

    // [measure]
    int lambda_count = 64;
    double fit_fraction = 0.5;
    double eps = 1e-2;
    int subperiod_phases = 0;
    int capture_last_periods = 0;
    double sign_tol = 1e-9;
    int scan_grid = 256;

    // [output]
    std::string out_dir = "runs";
    std::string label;
    unsigned long seed = 0;
    bool pack = false;

    // [sweep]: preset parameter name -> value list; runs the cross product
    std::map<std::string, std::vector<double>> sweep;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& config);

/// Throws ConfigError naming the violated constraint.
void validate_config(const RunConfig& config);

PeriodicNonlinearity make_nonlinearity(const RunConfig& config);
TerraceSettings terrace_settings(const RunConfig& config);
RunOptions run_options(const RunConfig& config);

/// Worker budget: explicit value if > 0, else TERRACE_LAB_WORKERS, else
/// the hardware concurrency.
int worker_budget(int requested);

/// Command entry points. Each creates (or extends) a run directory and
/// returns the directory holding its artifacts. `out` empty means a fresh
/// timestamped directory under the config's output dir; a given `out` must
/// not already contain a run.
std::filesystem::path cmd_ode_scan(const RunConfig& config,
                                   const std::filesystem::path& out = {});
std::filesystem::path cmd_simulate(const RunConfig& config,
                                   const std::filesystem::path& out = {});
std::filesystem::path cmd_resume(const std::filesystem::path& run_dir);
std::filesystem::path cmd_terrace(const std::filesystem::path& run_dir,
                                  const std::filesystem::path& ladder_json);
std::filesystem::path cmd_signs(const std::filesystem::path& run_dir, const std::string& against,
                                int max_shift);
std::filesystem::path cmd_sweep(const RunConfig& config, const std::filesystem::path& out,
                                int workers);
std::filesystem::path cmd_report(const std::filesystem::path& run_dir);

/// Rebuilds a timeline from a run directory written by cmd_simulate.
SolutionTimeline load_timeline(const std::filesystem::path& run_dir);

PhaseLadder load_ladder(const std::filesystem::path& json_path);

}  // namespace terrace
