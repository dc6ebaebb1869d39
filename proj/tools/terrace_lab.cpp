#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

#include "terrace/errors.hpp"
#include "terrace/experiment.hpp"
#include "terrace/version.hpp"

namespace fs = std::filesystem;

namespace {

terrace::RunConfig load_and_validate(const std::string& path) {
    terrace::RunConfig config = terrace::load_config(path);
    terrace::validate_config(config);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for periodically forced reaction-diffusion fronts"};
    app.set_version_flag("--version", TERRACE_LAB_VERSION);
    app.require_subcommand(1);

    std::string config_path, out_dir, run_dir, ladder_path, against, resume_dir;
    int workers = 0;
    int max_shift = 2;

    CLI::App* scan = app.add_subcommand("ode-scan", "map the periodic orbits of the kinetics");
    scan->add_option("--config", config_path, "run configuration file")->required();
    scan->add_option("--out", out_dir, "output directory (must not already hold a run)");

    CLI::App* simulate = app.add_subcommand("simulate", "integrate the front experiment");
    simulate->add_option("--config", config_path, "run configuration file");
    simulate->add_option("--out", out_dir, "output directory (must not already hold a run)");
    simulate->add_option("--resume", resume_dir, "continue an interrupted run directory");

    CLI::App* terr = app.add_subcommand("terrace", "decompose a finished run into a terrace");
    terr->add_option("--run", run_dir, "simulation run directory")->required();
    terr->add_option("--ladder", ladder_path, "ladder.json from ode-scan")->required();

    CLI::App* signs = app.add_subcommand("signs", "sign words against another run or preset");
    signs->add_option("--run", run_dir, "simulation run directory")->required();
    signs->add_option("--against", against, "second run directory or preset name")->required();
    signs->add_option("--max-shift", max_shift, "largest period shift |k| to compare");

    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid concurrently");
    sweep->add_option("--config", config_path, "run configuration file with a [sweep] section")
        ->required();
    sweep->add_option("--out", out_dir, "output directory (must not already hold a run)");
    sweep->add_option("--workers", workers, "worker budget (default TERRACE_LAB_WORKERS)");

    CLI::App* report = app.add_subcommand("report", "emit plot-ready tables for a run");
    report->add_option("--run", run_dir, "simulation run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        fs::path result;
        if (scan->parsed()) {
            result = terrace::cmd_ode_scan(load_and_validate(config_path), out_dir);
        } else if (simulate->parsed()) {
            if (!resume_dir.empty()) {
                result = terrace::cmd_resume(resume_dir);
            } else if (!config_path.empty()) {
                result = terrace::cmd_simulate(load_and_validate(config_path), out_dir);
            } else {
                std::fprintf(stderr, "simulate requires --config or --resume\n");
                return 2;
            }
        } else if (terr->parsed()) {
            result = terrace::cmd_terrace(run_dir, ladder_path);
        } else if (signs->parsed()) {
            result = terrace::cmd_signs(run_dir, against, max_shift);
        } else if (sweep->parsed()) {
            result = terrace::cmd_sweep(load_and_validate(config_path), out_dir, workers);
        } else if (report->parsed()) {
            result = terrace::cmd_report(run_dir);
        }
        std::printf("%s\n", result.string().c_str());
        return 0;
    } catch (const terrace::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const terrace::StructuralError& e) {
        std::fprintf(stderr, "structural inconsistency: %s\n", e.what());
        return 4;
    } catch (const terrace::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "malformed artifact: %s\n", e.what());
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "filesystem error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
}
