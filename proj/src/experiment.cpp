#include "terrace/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <sstream>
#include <thread>

#include "terrace/errors.hpp"
#include "terrace/io.hpp"
#include "terrace/signs.hpp"
#include "terrace/version.hpp"

namespace terrace {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& section, const std::string& key, const std::string& v) {
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
    throw ConfigError("[" + section + "] " + key + " must be 0 or 1, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& v) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        std::size_t pos = v.find(',', start);
        std::string item = trim(pos == std::string::npos ? v.substr(start)
                                                         : v.substr(start, pos - start));
        if (!item.empty()) out.push_back(io::parse_double(item));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string utc_stamp() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
    return buf;
}

void write_json_atomic(const fs::path& path, const json& j) {
    fs::path tmp = path;
    tmp += ".tmp";
    io::write_text(tmp, j.dump(2) + "\n");
    fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
    json j = json::parse(io::read_text(path), nullptr, false);
    if (j.is_discarded()) throw ConfigError("malformed json: " + path.string());
    return j;
}

fs::path fresh_dir(const RunConfig& config, const fs::path& out, const std::string& command) {
    if (!out.empty()) {
        if (fs::exists(out) && !fs::is_empty(out))
            throw ConfigError("refusing to write into non-empty directory: " + out.string());
        fs::create_directories(out);
        return out;
    }
    fs::path base = config.out_dir.empty() ? fs::path("runs") : fs::path(config.out_dir);
    std::string name = (config.label.empty() ? command : config.label) + "-" + utc_stamp();
    fs::path dir = base / name;
    for (int i = 2; fs::exists(dir); ++i) dir = base / (name + "-" + std::to_string(i));
    fs::create_directories(dir);
    return dir;
}

json base_manifest(const RunConfig& config, const std::string& command) {
    json m;
    m["schema_version"] = 1;
    m["software_version"] = TERRACE_LAB_VERSION;
    m["command"] = command;
    m["created_utc"] = utc_now();
    m["status"] = "partial";
    m["config"] = serialize_config(config);
    m["seed"] = config.seed;
    return m;
}

void finalize_manifest(json& m, const fs::path& dir, double wall_seconds) {
    json files = json::object();
    std::vector<fs::path> paths;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
            paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    for (const fs::path& p : paths)
        files[fs::relative(p, dir).generic_string()] = io::digest_file(p);
    m["files"] = std::move(files);
    m["wall_seconds"] = wall_seconds;
    m["status"] = "complete";
    write_json_atomic(dir / "manifest.json", m);
}

std::string snapshot_name(int j) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "snapshots/period_%04d.csv", j);
    return buf;
}

std::string subperiod_name(int j, int phase) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "subperiod/period_%04d_phase_%02d.csv", j, phase);
    return buf;
}

void write_profile_csv(const fs::path& path, const GridProfile& profile) {
    io::CsvTable t;
    t.header = {"x", "u"};
    t.rows.reserve(static_cast<std::size_t>(profile.grid.n));
    for (int k = 0; k < profile.grid.n; ++k)
        t.rows.push_back({io::format_double(profile.grid.x(k)),
                          io::format_double(profile.u[static_cast<std::size_t>(k)])});
    io::write_csv(path, t);
}

GridProfile read_profile_csv(const fs::path& path, double h) {
    io::CsvTable t = io::read_csv(path);
    if (t.rows.empty()) throw ConfigError("empty profile csv: " + path.string());
    GridProfile p;
    p.grid.h = h;
    p.grid.i_left = std::llround(io::parse_double(t.rows.front()[0]) / h);
    p.grid.n = static_cast<int>(t.rows.size());
    p.u.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        if (row.size() != 2) throw ConfigError("malformed profile csv: " + path.string());
        p.u.push_back(io::parse_double(row[1]));
    }
    return p;
}

void write_window_log(const fs::path& path, const std::vector<WindowEvent>& events) {
    io::CsvTable t;
    t.header = {"t", "i_left", "n", "reason"};
    for (const WindowEvent& ev : events)
        t.rows.push_back({io::format_double(ev.t), std::to_string(ev.i_left),
                          std::to_string(ev.n), ev.reason});
    io::write_csv(path, t);
}

std::vector<WindowEvent> read_window_log(const fs::path& path) {
    std::vector<WindowEvent> events;
    if (!fs::exists(path)) return events;
    io::CsvTable t = io::read_csv(path);
    for (const auto& row : t.rows) {
        WindowEvent ev;
        ev.t = io::parse_double(row.at(0));
        ev.i_left = io::parse_int(row.at(1));
        ev.n = static_cast<int>(io::parse_int(row.at(2)));
        ev.reason = row.at(3);
        events.push_back(std::move(ev));
    }
    return events;
}

json orbit_to_json(const PeriodicOrbit& orbit) {
    json j;
    j["beta"] = orbit.beta;
    j["residual"] = orbit.residual;
    j["t"] = orbit.t;
    j["value"] = orbit.value;
    return j;
}

PeriodicOrbit orbit_from_json(const json& j) {
    PeriodicOrbit orbit;
    orbit.beta = j.at("beta").get<double>();
    orbit.residual = j.at("residual").get<double>();
    orbit.t = j.at("t").get<std::vector<double>>();
    orbit.value = j.at("value").get<std::vector<double>>();
    return orbit;
}

/// Shared driver for simulate and resume: advances period by period,
/// persisting snapshots, the window log, a restart checkpoint, and a
/// partial manifest after every period.
fs::path drive_simulation(const RunConfig& config, const fs::path& dir, int start_period,
                          GridProfile initial, long long start_step,
                          std::vector<WindowEvent> prior_events, json manifest) {
    auto t0 = std::chrono::steady_clock::now();
    PeriodicNonlinearity nl = make_nonlinearity(config);
    RunOptions options = run_options(config);
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
    const int spp = cfg.steps_per_period;
    const int phases = options.subperiod_phases;
    if (phases > 0 && spp % phases != 0)
        throw ConfigError("subperiod_phases must divide steps_per_period (" +
                          std::to_string(phases) + " vs " + std::to_string(spp) + ")");

    Pde1dSolver solver(nl, cfg, std::move(initial));
    if (start_step > 0) {
        GridProfile st = solver.state();
        solver.restore(std::move(st), start_step);
    }

    io::write_text(dir / "config.txt", serialize_config(config));
    {
        PeriodicOrbit orbit = orbit_samples(nl, options.alpha, 512, cfg.ode);
        io::CsvTable t;
        t.header = {"t", "value"};
        for (std::size_t i = 0; i < orbit.t.size(); ++i)
            t.rows.push_back({io::format_double(orbit.t[i]), io::format_double(orbit.value[i])});
        io::write_csv(dir / "orbit.csv", t);
    }
    if (start_period == 0) write_profile_csv(dir / snapshot_name(0), solver.state());

    manifest["headline"] = {{"steps_per_period", spp},
                            {"h", cfg.h},
                            {"alpha", options.alpha},
                            {"a", options.a},
                            {"horizon_periods", options.horizon_periods}};
    write_json_atomic(dir / "manifest.json", manifest);

    for (int j = start_period + 1; j <= options.horizon_periods; ++j) {
        bool capture =
            phases > 0 && j > options.horizon_periods - options.capture_last_periods;
        if (capture) {
            int chunk = spp / phases;
            for (int p = 1; p <= phases; ++p) {
                solver.advance_steps(chunk);
                if (p < phases)
                    write_profile_csv(dir / subperiod_name(j, p), solver.state());
            }
        } else {
            solver.advance_steps(spp);
        }
        write_profile_csv(dir / snapshot_name(j), solver.state());

        std::vector<WindowEvent> events = prior_events;
        events.insert(events.end(), solver.window_log().begin(), solver.window_log().end());
        write_window_log(dir / "window_log.csv", events);
        write_profile_csv(dir / "state.chk", solver.state());
        manifest["resume"] = {{"completed_periods", j},
                              {"step_index", solver.step_index()},
                              {"checkpoint", "state.chk"}};
        write_json_atomic(dir / "manifest.json", manifest);
    }

    if (config.pack) {
        std::vector<double> flat;
        json head;
        head["h"] = cfg.h;
        head["snapshots"] = json::array();
        for (int j = 0; j <= options.horizon_periods; ++j) {
            fs::path p = dir / snapshot_name(j);
            if (!fs::exists(p)) continue;
            GridProfile prof = read_profile_csv(p, cfg.h);
            head["snapshots"].push_back({{"period", j},
                                         {"i_left", prof.grid.i_left},
                                         {"n", prof.grid.n},
                                         {"offset", flat.size()}});
            flat.insert(flat.end(), prof.u.begin(), prof.u.end());
        }
        io::write_doubles(dir / "pack.bin", flat);
        write_json_atomic(dir / "pack.json", head);
    }

    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    finalize_manifest(manifest, dir, wall);
    return dir;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig c;
    c.params.clear();
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[' && s.back() == ']') {
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + s + "'");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        auto fail_key = [&]() {
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" +
                              key + "' in section [" + section + "]");
        };
        try {
            if (section.empty()) {
                if (key == "schema_version")
                    c.schema_version = static_cast<int>(io::parse_int(value));
                else
                    fail_key();
            } else if (section == "nonlinearity") {
                if (key == "preset")
                    c.preset = value;
                else if (key == "expression")
                    c.expression = value;
                else if (key == "period")
                    c.period = io::parse_double(value);
                else if (key == "u_max")
                    c.u_max = io::parse_double(value);
                else
                    fail_key();
            } else if (section == "params") {
                c.params[key] = io::parse_double(value);
            } else if (section == "initial") {
                if (key == "alpha")
                    c.alpha = io::parse_double(value);
                else if (key == "a")
                    c.a = io::parse_double(value);
                else if (key == "flat")
                    c.flat_ic = parse_bool(section, key, value);
                else
                    fail_key();
            } else if (section == "solver") {
                if (key == "h")
                    c.h = io::parse_double(value);
                else if (key == "steps_per_period")
                    c.steps_per_period = static_cast<int>(io::parse_int(value));
                else if (key == "horizon_periods")
                    c.horizon_periods = static_cast<int>(io::parse_int(value));
                else if (key == "x_left")
                    c.x_left = io::parse_double(value);
                else if (key == "x_right")
                    c.x_right = io::parse_double(value);
                else if (key == "window_margin")
                    c.window_margin = io::parse_double(value);
                else if (key == "shift_trigger")
                    c.shift_trigger = io::parse_double(value);
                else if (key == "n_max")
                    c.n_max = static_cast<int>(io::parse_int(value));
                else if (key == "plateau_tol")
                    c.plateau_tol = io::parse_double(value);
                else if (key == "check_every")
                    c.check_every = static_cast<int>(io::parse_int(value));
                else
                    fail_key();
            } else if (section == "measure") {
                if (key == "lambda_count")
                    c.lambda_count = static_cast<int>(io::parse_int(value));
                else if (key == "fit_fraction")
                    c.fit_fraction = io::parse_double(value);
                else if (key == "eps")
                    c.eps = io::parse_double(value);
                else if (key == "subperiod_phases")
                    c.subperiod_phases = static_cast<int>(io::parse_int(value));
                else if (key == "capture_last_periods")
                    c.capture_last_periods = static_cast<int>(io::parse_int(value));
                else if (key == "sign_tol")
                    c.sign_tol = io::parse_double(value);
                else if (key == "scan_grid")
                    c.scan_grid = static_cast<int>(io::parse_int(value));
                else
                    fail_key();
            } else if (section == "output") {
                if (key == "dir")
                    c.out_dir = value;
                else if (key == "label")
                    c.label = value;
                else if (key == "seed")
                    c.seed = static_cast<unsigned long>(io::parse_int(value));
                else if (key == "pack")
                    c.pack = parse_bool(section, key, value);
                else
                    fail_key();
            } else if (section == "sweep") {
                c.sweep[key] = parse_list(value);
            } else {
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unknown section [" + section + "]");
            }
        } catch (const ConfigError& e) {
            std::string what = e.what();
            if (what.find("config line") == 0) throw;
            throw ConfigError("config line " + std::to_string(lineno) + ", key '" + key +
                              "': " + what);
        }
    }
    return c;
}

RunConfig load_config(const fs::path& path) {
    return parse_config_text(io::read_text(path));
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    auto d = [](double v) { return io::format_double(v); };
    os << "schema_version = " << c.schema_version << "\n\n";
    os << "[nonlinearity]\n";
    os << "preset = " << c.preset << "\n";
    os << "expression = " << c.expression << "\n";
    os << "period = " << d(c.period) << "\n";
    os << "u_max = " << d(c.u_max) << "\n\n";
    os << "[params]\n";
    for (const auto& [k, v] : c.params) os << k << " = " << d(v) << "\n";
    os << "\n[initial]\n";
    os << "alpha = " << d(c.alpha) << "\n";
    os << "a = " << d(c.a) << "\n";
    os << "flat = " << (c.flat_ic ? 1 : 0) << "\n\n";
    os << "[solver]\n";
    os << "h = " << d(c.h) << "\n";
    os << "steps_per_period = " << c.steps_per_period << "\n";
    os << "horizon_periods = " << c.horizon_periods << "\n";
    os << "x_left = " << d(c.x_left) << "\n";
    os << "x_right = " << d(c.x_right) << "\n";
    os << "window_margin = " << d(c.window_margin) << "\n";
    os << "shift_trigger = " << d(c.shift_trigger) << "\n";
    os << "n_max = " << c.n_max << "\n";
    os << "plateau_tol = " << d(c.plateau_tol) << "\n";
    os << "check_every = " << c.check_every << "\n\n";
    os << "[measure]\n";
    os << "lambda_count = " << c.lambda_count << "\n";
    os << "fit_fraction = " << d(c.fit_fraction) << "\n";
    os << "eps = " << d(c.eps) << "\n";
    os << "subperiod_phases = " << c.subperiod_phases << "\n";
    os << "capture_last_periods = " << c.capture_last_periods << "\n";
    os << "sign_tol = " << d(c.sign_tol) << "\n";
    os << "scan_grid = " << c.scan_grid << "\n\n";
    os << "[output]\n";
    os << "dir = " << c.out_dir << "\n";
    os << "label = " << c.label << "\n";
    os << "seed = " << c.seed << "\n";
    os << "pack = " << (c.pack ? 1 : 0) << "\n";
    if (!c.sweep.empty()) {
        os << "\n[sweep]\n";
        for (const auto& [k, vals] : c.sweep) {
            os << k << " = ";
            for (std::size_t i = 0; i < vals.size(); ++i) os << (i ? ", " : "") << d(vals[i]);
            os << "\n";
        }
    }
    return os.str();
}

void validate_config(const RunConfig& c) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("config: " + what);
    };
    require(c.schema_version == 1, "schema_version must be 1");
    require(!c.preset.empty(), "preset must be set");
    require(c.h > 0.0, "h must be positive");
    require(c.alpha > 0.0, "alpha must be positive");
    if (!c.flat_ic)
        require(c.x_left < c.a && c.a < c.x_right, "a must lie inside [x_left, x_right]");
    require(c.x_left < c.x_right, "x_left must be below x_right");
    require(c.steps_per_period >= 0, "steps_per_period must be nonnegative");
    require(c.horizon_periods >= 0, "horizon_periods must be nonnegative");
    require(c.window_margin > 0.0, "window_margin must be positive");
    require(c.shift_trigger > 0.0 && c.shift_trigger < 1.0, "shift_trigger must be in (0,1)");
    require(c.n_max >= 64, "n_max must be at least 64");
    require(c.plateau_tol > 0.0, "plateau_tol must be positive");
    require(c.check_every >= 1, "check_every must be at least 1");
    require(c.lambda_count >= 1, "lambda_count must be at least 1");
    require(c.fit_fraction > 0.0 && c.fit_fraction <= 0.5,
            "fit_fraction must lie in (0, 0.5]: the horizon must cover at least twice "
            "the fit window");
    require(c.eps > 0.0, "eps must be positive");
    require(c.subperiod_phases >= 0, "subperiod_phases must be nonnegative");
    require(c.capture_last_periods >= 0 && c.capture_last_periods <= c.horizon_periods,
            "capture_last_periods must lie in [0, horizon_periods]");
    require(c.sign_tol >= 0.0, "sign_tol must be nonnegative");
    require(c.scan_grid >= 8, "scan_grid must be at least 8");
    if (c.preset == "custom") {
        require(!c.expression.empty(), "custom preset requires an expression");
        require(c.period > 0.0, "custom preset requires a positive period");
        require(c.u_max > 0.0, "custom preset requires a positive u_max");
    }
}

PeriodicNonlinearity make_nonlinearity(const RunConfig& c) {
    FamilyPreset fp;
    fp.name = c.preset;
    fp.params = c.params;
    if (c.preset == "custom") {
        fp.expression = c.expression;
        fp.params["period"] = c.period;
        fp.params["u_max"] = c.u_max;
    }
    return build_preset(fp);
}

TerraceSettings terrace_settings(const RunConfig& c) {
    TerraceSettings s;
    s.lambda_count = c.lambda_count;
    s.fit_fraction = c.fit_fraction;
    s.eps = c.eps;
    return s;
}

RunOptions run_options(const RunConfig& c) {
    RunOptions o;
    o.alpha = c.alpha;
    o.a = c.a;
    o.x_left = c.x_left;
    o.x_right = c.x_right;
    o.horizon_periods = c.horizon_periods;
    o.subperiod_phases = c.subperiod_phases;
    o.capture_last_periods = c.capture_last_periods;
    o.flat_ic = c.flat_ic;
    o.solver.h = c.h;
    o.solver.steps_per_period = c.steps_per_period;
    o.solver.horizon_periods = c.horizon_periods;
    o.solver.window.margin = c.window_margin;
    o.solver.window.shift_trigger = c.shift_trigger;
    o.solver.window.n_max = c.n_max;
    o.solver.window.plateau_tol = c.plateau_tol;
    o.solver.window.check_every = c.check_every;
    return o;
}

int worker_budget(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("TERRACE_LAB_WORKERS")) {
        try {
            long long v = io::parse_int(env);
            if (v >= 1) return static_cast<int>(v);
        } catch (const ConfigError&) {
            throw ConfigError("TERRACE_LAB_WORKERS must be a positive integer, got '" +
                              std::string(env) + "'");
        }
        throw ConfigError("TERRACE_LAB_WORKERS must be a positive integer");
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

fs::path cmd_ode_scan(const RunConfig& config, const fs::path& out) {
    validate_config(config);
    auto t0 = std::chrono::steady_clock::now();
    PeriodicNonlinearity nl = make_nonlinearity(config);
    fs::path dir = fresh_dir(config, out, "ode-scan");
    io::write_text(dir / "config.txt", serialize_config(config));
    json manifest = base_manifest(config, "ode-scan");

    ScanSettings settings;
    settings.n_grid = config.scan_grid;
    PhaseLadder ladder = scan_fixed_points(nl, settings);

    json jl;
    jl["schema_version"] = 1;
    jl["preset"] = config.preset;
    jl["period"] = nl.period;
    jl["u_max"] = nl.u_max;
    jl["alpha"] = ladder.alpha;
    jl["alpha_stable_below"] = ladder.alpha_stable_below;
    jl["continua"] = ladder.continua;
    jl["records"] = json::array();
    for (const FixedPointRecord& r : ladder.records) {
        json jr;
        jr["beta"] = r.beta;
        jr["multiplier"] = r.multiplier;
        jr["log_multiplier"] = r.log_multiplier;
        jr["floquet_exponent"] = r.floquet_exponent;
        jr["degenerate"] = r.degenerate;
        jr["stable_below"] = r.stable_below;
        jr["stable_above"] = r.stable_above;
        jr["isolated_below"] = r.isolated_below;
        jr["continuum_member"] = r.continuum_member;
        jr["orbit"] = orbit_to_json(r.orbit);
        jl["records"].push_back(std::move(jr));
    }
    write_json_atomic(dir / "ladder.json", jl);

    io::CsvTable scan;
    scan.header = {"beta", "poincare_minus_beta"};
    for (const auto& [beta, gap] : ladder.scan)
        scan.rows.push_back({io::format_double(beta), io::format_double(gap)});
    io::write_csv(dir / "scan.csv", scan);

    json betas = json::array();
    for (const FixedPointRecord& r : ladder.records) betas.push_back(r.beta);
    manifest["headline"] = {{"n_records", ladder.records.size()},
                            {"n_continua", ladder.continua.size()},
                            {"betas", betas}};
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    finalize_manifest(manifest, dir, wall);
    return dir;
}

PhaseLadder load_ladder(const fs::path& json_path) {
    json j = read_json(json_path);
    PhaseLadder ladder;
    ladder.alpha = j.at("alpha").get<double>();
    ladder.alpha_stable_below = j.at("alpha_stable_below").get<bool>();
    for (const auto& pair : j.at("continua"))
        ladder.continua.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
    for (const auto& jr : j.at("records")) {
        FixedPointRecord r;
        r.beta = jr.at("beta").get<double>();
        r.multiplier = jr.at("multiplier").get<double>();
        r.log_multiplier = jr.at("log_multiplier").get<double>();
        r.floquet_exponent = jr.at("floquet_exponent").get<double>();
        r.degenerate = jr.at("degenerate").get<bool>();
        r.stable_below = jr.at("stable_below").get<bool>();
        r.stable_above = jr.at("stable_above").get<bool>();
        r.isolated_below = jr.at("isolated_below").get<bool>();
        r.continuum_member = jr.at("continuum_member").get<bool>();
        r.orbit = orbit_from_json(jr.at("orbit"));
        ladder.records.push_back(std::move(r));
    }
    return ladder;
}

fs::path cmd_simulate(const RunConfig& config, const fs::path& out) {
    validate_config(config);
    fs::path dir = fresh_dir(config, out, "simulate");
    RunOptions options = run_options(config);
    PeriodicNonlinearity nl = make_nonlinearity(config);
    Grid1D grid = make_grid(options.x_left, options.x_right, config.h);
    GridProfile ic;
    if (config.flat_ic) {
        ic.grid = grid;
        ic.u.assign(static_cast<std::size_t>(grid.n), config.alpha);
    } else {
        ic = heaviside_ic(grid, config.alpha, config.a);
    }
    return drive_simulation(config, dir, 0, std::move(ic), 0, {},
                            base_manifest(config, "simulate"));
}

fs::path cmd_resume(const fs::path& run_dir) {
    json manifest = read_json(run_dir / "manifest.json");
    if (manifest.value("status", "") == "complete") return run_dir;
    if (!manifest.contains("resume"))
        throw ConfigError("run directory has no resume point: " + run_dir.string());
    RunConfig config = load_config(run_dir / "config.txt");
    validate_config(config);
    int completed = manifest["resume"]["completed_periods"].get<int>();
    long long step_index = manifest["resume"]["step_index"].get<long long>();
    GridProfile state = read_profile_csv(run_dir / "state.chk", config.h);
    std::vector<WindowEvent> prior = read_window_log(run_dir / "window_log.csv");
    return drive_simulation(config, run_dir, completed, std::move(state), step_index,
                            std::move(prior), std::move(manifest));
}

SolutionTimeline load_timeline(const fs::path& run_dir) {
    RunConfig config = load_config(run_dir / "config.txt");
    PeriodicNonlinearity nl = make_nonlinearity(config);
    json manifest = read_json(run_dir / "manifest.json");

    SolutionTimeline tl;
    tl.period = nl.period;
    tl.steps_per_period = manifest.at("headline").at("steps_per_period").get<int>();
    tl.h = config.h;
    tl.a = config.a;
    tl.alpha = config.alpha;
    tl.alpha_orbit = orbit_samples(nl, config.alpha);

    for (int j = 0;; ++j) {
        fs::path p = run_dir / snapshot_name(j);
        if (!fs::exists(p)) break;
        Snapshot s;
        s.period_index = j;
        s.phase_index = 0;
        s.t = j * tl.period;
        s.profile = read_profile_csv(p, config.h);
        tl.period_snapshots.push_back(std::move(s));
    }
    if (tl.period_snapshots.empty())
        throw ConfigError("run directory has no period snapshots: " + run_dir.string());

    if (fs::exists(run_dir / "subperiod")) {
        for (const auto& entry : fs::directory_iterator(run_dir / "subperiod")) {
            std::string name = entry.path().filename().string();
            int j = 0, p = 0;
            if (std::sscanf(name.c_str(), "period_%d_phase_%d.csv", &j, &p) != 2) continue;
            int phases = config.subperiod_phases;
            Snapshot s;
            s.period_index = j;
            s.phase_index = p;
            s.t = (j - 1) * tl.period + (phases > 0 ? p * tl.period / phases : 0.0);
            s.profile = read_profile_csv(entry.path(), config.h);
            tl.subperiod_snapshots.push_back(std::move(s));
        }
        std::sort(tl.subperiod_snapshots.begin(), tl.subperiod_snapshots.end(),
                  [](const Snapshot& a, const Snapshot& b) {
                      return std::tie(a.period_index, a.phase_index) <
                             std::tie(b.period_index, b.phase_index);
                  });
    }
    tl.window_log = read_window_log(run_dir / "window_log.csv");
    return tl;
}

fs::path cmd_terrace(const fs::path& run_dir, const fs::path& ladder_json) {
    auto t0 = std::chrono::steady_clock::now();
    RunConfig config = load_config(run_dir / "config.txt");
    PeriodicNonlinearity nl = make_nonlinearity(config);
    SolutionTimeline timeline = load_timeline(run_dir);
    PhaseLadder ladder = load_ladder(ladder_json);
    TerraceSettings settings = terrace_settings(config);

    TerraceDecomposition dec = detect_terrace(timeline, ladder, settings);
    SandwichReport sandwich = speed_sandwich(timeline, nl, settings);
    PlateauReport plateau = plateau_check(timeline, dec, settings.eps);

    fs::path dir = run_dir / "terrace";
    fs::create_directories(dir);
    json manifest = base_manifest(config, "terrace");

    json jd;
    jd["n_fronts"] = dec.fronts.size();
    jd["speeds"] = dec.speeds;
    jd["speed_gap"] = dec.speed_gap;
    jd["fit_window"] = {{"j_lo", dec.fit_window.j_lo}, {"j_hi", dec.fit_window.j_hi}};
    jd["floors"] = json::array();
    for (const PeriodicOrbit& fl : dec.floors)
        jd["floors"].push_back({{"beta", fl.beta}, {"residual", fl.residual}});
    jd["ladder_crosscheck"] = json::array();
    for (const FloorMatch& m : dec.ladder_crosscheck)
        jd["ladder_crosscheck"].push_back({{"measured", m.measured},
                                           {"ladder_index", m.ladder_index},
                                           {"mismatch", m.mismatch},
                                           {"stable_below", m.stable_below}});
    jd["fronts"] = json::array();
    for (const FrontRecord& fr : dec.fronts) {
        jd["fronts"].push_back({{"index", fr.index},
                                {"speed", fr.speed},
                                {"period_displacement", fr.period_displacement},
                                {"final_position", fr.final_position},
                                {"lambda_ref", fr.lambda_ref},
                                {"lambda_window", fr.lambda_window},
                                {"convergence_defect", fr.convergence_defect},
                                {"pulsating_mismatch", fr.pulsating_mismatch},
                                {"pulsating_mismatch_fitted", fr.pulsating_mismatch_fitted},
                                {"degenerate_flat", fr.degenerate_flat},
                                {"width_C", fr.width_C},
                                {"fit_residual_rms", fr.fit.residual_rms},
                                {"fit_slope_se", fr.fit.slope_se}});
    }
    jd["drifts"] = json::array();
    for (const DriftSeries& ds : dec.drifts)
        jd["drifts"].push_back(
            {{"final_ratio", ds.final_ratio}, {"ratio_trend", ds.ratio_trend}});
    jd["sandwich"] = {{"k_hat", sandwich.k_hat},
                      {"c_upper_bound", sandwich.c_upper_bound},
                      {"c_lower_obs", sandwich.c_lower_obs},
                      {"c_fastest_obs", sandwich.c_fastest_obs},
                      {"all_within_bound", sandwich.all_within_bound}};
    jd["diagnostics"] = dec.diagnostics;
    write_json_atomic(dir / "decomposition.json", jd);

    io::CsvTable traces;
    traces.header = {"lambda", "j", "t", "position", "increment", "fit_slope",
                     "fit_residual_rms"};
    for (const LevelSetTrace& tr : dec.traces) {
        for (std::size_t i = 0; i < tr.period_index.size(); ++i) {
            double inc = i > 0 ? tr.positions[i] - tr.positions[i - 1]
                               : std::numeric_limits<double>::quiet_NaN();
            traces.rows.push_back({io::format_double(tr.lambda),
                                   std::to_string(tr.period_index[i]),
                                   io::format_double(tr.period_index[i] * timeline.period),
                                   io::format_double(tr.positions[i]), io::format_double(inc),
                                   io::format_double(tr.speed_fit.slope),
                                   io::format_double(tr.speed_fit.residual_rms)});
        }
    }
    io::write_csv(dir / "traces.csv", traces);

    for (const FrontRecord& fr : dec.fronts) {
        for (std::size_t p = 0; p < fr.period_profiles.size(); ++p) {
            const FrontProfile& prof = fr.period_profiles[p];
            io::CsvTable t;
            t.header = {"xi", "value"};
            for (std::size_t i = 0; i < prof.values.size(); ++i)
                t.rows.push_back(
                    {io::format_double(prof.xi_left + static_cast<double>(i) * prof.h),
                     io::format_double(prof.values[i])});
            char buf[64];
            std::snprintf(buf, sizeof(buf), "fronts/front_%d_phase_%02zu.csv", fr.index, p);
            io::write_csv(dir / buf, t);
        }
    }

    for (std::size_t k = 0; k < dec.drifts.size(); ++k) {
        const DriftSeries& ds = dec.drifts[k];
        io::CsvTable t;
        t.header = {"t", "g", "abs_g_over_t"};
        for (std::size_t i = 0; i < ds.t.size(); ++i)
            t.rows.push_back({io::format_double(ds.t[i]), io::format_double(ds.g[i]),
                              io::format_double(ds.t[i] > 0.0 ? std::abs(ds.g[i]) / ds.t[i]
                                                              : 0.0)});
        io::write_csv(dir / ("drift_" + std::to_string(k + 1) + ".csv"), t);
    }

    io::CsvTable pl;
    pl.header = {"floor_index", "period_index", "interval_lo", "interval_hi", "empty",
                 "sup_deviation", "within_eps"};
    for (const PlateauRow& row : plateau.rows)
        pl.rows.push_back({std::to_string(row.floor_index), std::to_string(row.period_index),
                           io::format_double(row.interval_lo),
                           io::format_double(row.interval_hi), row.empty ? "1" : "0",
                           io::format_double(row.sup_deviation), row.within_eps ? "1" : "0"});
    io::write_csv(dir / "plateau.csv", pl);

    manifest["headline"] = {{"n_fronts", dec.fronts.size()},
                            {"speeds", dec.speeds},
                            {"diagnostics", dec.diagnostics.size()}};
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    finalize_manifest(manifest, dir, wall);
    return dir;
}

fs::path cmd_signs(const fs::path& run_dir, const std::string& against, int max_shift) {
    auto t0 = std::chrono::steady_clock::now();
    RunConfig config = load_config(run_dir / "config.txt");
    SolutionTimeline tl1 = load_timeline(run_dir);
    const double tol = config.sign_tol;
    const int j_max = static_cast<int>(tl1.period_snapshots.size()) - 1;

    bool against_dir = fs::exists(fs::path(against) / "config.txt");
    SolutionTimeline tl2;
    std::vector<double> flat_marks;
    if (against_dir) {
        tl2 = load_timeline(against);
        if (tl2.h != tl1.h)
            throw ConfigError("lattice mismatch: runs use h = " + io::format_double(tl1.h) +
                              " and h = " + io::format_double(tl2.h));
        if (std::abs(tl2.period - tl1.period) > 1e-12)
            throw ConfigError("period mismatch between runs");
    } else {
        FamilyPreset fp;
        fp.name = against;
        if (against == config.preset) fp.params = config.params;
        PeriodicNonlinearity nl2 = build_preset(fp);
        if (std::abs(nl2.period - tl1.period) > 1e-12)
            throw ConfigError("preset period differs from the run period");
        for (int j = 0; j <= 2 * j_max + 1; ++j)
            flat_marks.push_back(flow(nl2, tl1.alpha, 0.0, j * tl1.period));
    }

    io::CsvTable out;
    out.header = {"snapshot_index", "k_shift", "zero_number", "word", "violation"};
    for (int j = 0; j <= j_max; ++j) {
        for (int k = -max_shift; k <= max_shift; ++k) {
            const GridProfile& p1 = tl1.period_snapshots[static_cast<std::size_t>(j)].profile;
            std::vector<double> diff;
            if (against_dir) {
                int j2 = j + k;
                if (j2 < 0 || j2 >= static_cast<int>(tl2.period_snapshots.size())) continue;
                const GridProfile& p2 =
                    tl2.period_snapshots[static_cast<std::size_t>(j2)].profile;
                std::int64_t lo = std::max(p1.grid.i_left, p2.grid.i_left);
                std::int64_t hi = std::min(p1.grid.i_left + p1.grid.n - 1,
                                           p2.grid.i_left + p2.grid.n - 1);
                for (std::int64_t i = lo; i <= hi; ++i)
                    diff.push_back(p1.u[static_cast<std::size_t>(i - p1.grid.i_left)] -
                                   p2.u[static_cast<std::size_t>(i - p2.grid.i_left)]);
            } else {
                int j2 = j + k;
                if (j2 < 0 || j2 >= static_cast<int>(flat_marks.size())) continue;
                double v = flat_marks[static_cast<std::size_t>(j2)];
                for (double u : p1.u) diff.push_back(u - v);
            }
            if (diff.empty()) continue;
            int z = zero_number(diff, tol);
            SignWord word = sgn_word(diff, tol);
            bool violation = !is_subword(word, SignWord{"+-"});
            out.rows.push_back({std::to_string(j), std::to_string(k), std::to_string(z),
                                word.letters, violation ? "1" : "0"});
        }
    }
    fs::path dir = run_dir / "signs";
    fs::create_directories(dir);
    io::write_csv(dir / "signs.csv", out);
    json manifest = base_manifest(config, "signs");
    manifest["headline"] = {{"against", against}, {"rows", out.rows.size()}};
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    finalize_manifest(manifest, dir, wall);
    return dir;
}

fs::path cmd_sweep(const RunConfig& config, const fs::path& out, int workers) {
    validate_config(config);
    auto t0 = std::chrono::steady_clock::now();
    fs::path dir = fresh_dir(config, out, "sweep");
    io::write_text(dir / "config.txt", serialize_config(config));
    json manifest = base_manifest(config, "sweep");

    std::vector<std::string> keys;
    for (const auto& [k, vals] : config.sweep) {
        if (vals.empty()) throw ConfigError("sweep range for '" + k + "' is empty");
        keys.push_back(k);
    }
    std::vector<std::map<std::string, double>> points;
    if (!keys.empty()) {
        std::vector<std::size_t> idx(keys.size(), 0);
        while (true) {
            std::map<std::string, double> point;
            for (std::size_t i = 0; i < keys.size(); ++i)
                point[keys[i]] = config.sweep.at(keys[i])[idx[i]];
            points.push_back(std::move(point));
            std::size_t i = 0;
            for (; i < keys.size(); ++i) {
                if (++idx[i] < config.sweep.at(keys[i]).size()) break;
                idx[i] = 0;
            }
            if (i == keys.size()) break;
        }
    }

    struct PointResult {
        std::string status = "ok";
        int n_fronts = 0;
        std::vector<double> speeds;
        std::string run_dir;
    };
    std::vector<PointResult> results(points.size());

    auto run_point = [&](std::size_t pi) {
        PointResult& res = results[pi];
        try {
            RunConfig pc = config;
            pc.sweep.clear();
            for (const auto& [k, v] : points[pi]) pc.params[k] = v;
            char tag[32];
            std::snprintf(tag, sizeof(tag), "point_%03zu", pi);
            fs::path pdir = dir / "runs" / tag;
            fs::path ladder_dir = cmd_ode_scan(pc, pdir / "ladder");
            fs::path run = cmd_simulate(pc, pdir / "run");
            res.run_dir = fs::relative(run, dir).generic_string();
            fs::path tdir = cmd_terrace(run, ladder_dir / "ladder.json");
            json dec = read_json(tdir / "decomposition.json");
            res.n_fronts = dec.at("n_fronts").get<int>();
            res.speeds = dec.at("speeds").get<std::vector<double>>();
        } catch (const std::exception& e) {
            res.status = std::string("error: ") + e.what();
        }
    };

    const int budget = std::max(1, std::min<int>(worker_budget(workers),
                                                 static_cast<int>(points.size() ? points.size()
                                                                                : 1)));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < budget; ++w)
        pool.emplace_back([&]() {
            while (true) {
                std::size_t pi = next.fetch_add(1);
                if (pi >= points.size()) return;
                run_point(pi);
            }
        });
    for (std::thread& th : pool) th.join();

    io::CsvTable summary;
    summary.header = {"point"};
    for (const std::string& k : keys) summary.header.push_back(k);
    summary.header.insert(summary.header.end(), {"status", "n_fronts", "speeds", "run_dir"});
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        std::vector<std::string> row{std::to_string(pi)};
        for (const std::string& k : keys) row.push_back(io::format_double(points[pi].at(k)));
        std::string speeds;
        for (std::size_t i = 0; i < results[pi].speeds.size(); ++i)
            speeds += (i ? ";" : "") + io::format_double(results[pi].speeds[i]);
        row.push_back(results[pi].status);
        row.push_back(std::to_string(results[pi].n_fronts));
        row.push_back(speeds);
        row.push_back(results[pi].run_dir);
        summary.rows.push_back(std::move(row));
    }
    io::write_csv(dir / "summary.csv", summary);

    // Regime boundary: order the successful points by the product of their
    // swept parameters (the mixed family's control quantity) and mark every
    // change in the detected front count.
    std::vector<std::pair<double, int>> ordered;
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        if (results[pi].status != "ok") continue;
        double metric = 1.0;
        for (const auto& [k, v] : points[pi]) metric *= v;
        ordered.emplace_back(metric, results[pi].n_fronts);
    }
    std::sort(ordered.begin(), ordered.end());
    io::CsvTable regime;
    regime.header = {"metric_low", "metric_high", "n_fronts_low", "n_fronts_high"};
    for (std::size_t i = 1; i < ordered.size(); ++i)
        if (ordered[i].second != ordered[i - 1].second)
            regime.rows.push_back({io::format_double(ordered[i - 1].first),
                                   io::format_double(ordered[i].first),
                                   std::to_string(ordered[i - 1].second),
                                   std::to_string(ordered[i].second)});
    io::write_csv(dir / "regime_boundary.csv", regime);

    int failures = 0;
    for (const PointResult& r : results)
        if (r.status != "ok") ++failures;
    manifest["headline"] = {{"points", points.size()}, {"failures", failures}};
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    finalize_manifest(manifest, dir, wall);
    return dir;
}

fs::path cmd_report(const fs::path& run_dir) {
    auto t0 = std::chrono::steady_clock::now();
    RunConfig config = load_config(run_dir / "config.txt");
    SolutionTimeline timeline = load_timeline(run_dir);
    fs::path dir = run_dir / "report";
    fs::create_directories(dir);
    json manifest = base_manifest(config, "report");
    std::vector<std::string> notes;

    const int last = static_cast<int>(timeline.period_snapshots.size()) - 1;
    io::CsvTable staircase;
    staircase.header = {"j", "t", "x", "u"};
    std::vector<int> marks{0, last / 4, last / 2, 3 * last / 4, last};
    marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
    for (int j : marks) {
        const Snapshot& s = timeline.period_snapshots[static_cast<std::size_t>(j)];
        for (int k = 0; k < s.profile.grid.n; ++k)
            staircase.rows.push_back(
                {std::to_string(j), io::format_double(s.t),
                 io::format_double(s.profile.grid.x(k)),
                 io::format_double(s.profile.u[static_cast<std::size_t>(k)])});
    }
    io::write_csv(dir / "staircase.csv", staircase);

    if (fs::exists(run_dir / "terrace" / "traces.csv")) {
        fs::copy_file(run_dir / "terrace" / "traces.csv", dir / "level_curves.csv",
                      fs::copy_options::overwrite_existing);
    } else {
        notes.push_back("level_curves.csv skipped: no terrace decomposition present in "
                        "this run directory");
    }

    bool any_drift = false;
    io::CsvTable drift_all;
    drift_all.header = {"front", "t", "g", "abs_g_over_t"};
    for (int k = 1;; ++k) {
        fs::path p = run_dir / "terrace" / ("drift_" + std::to_string(k) + ".csv");
        if (!fs::exists(p)) break;
        io::CsvTable t = io::read_csv(p);
        for (auto& row : t.rows) {
            std::vector<std::string> r{std::to_string(k)};
            r.insert(r.end(), row.begin(), row.end());
            drift_all.rows.push_back(std::move(r));
        }
        any_drift = true;
    }
    if (any_drift) {
        io::write_csv(dir / "drift.csv", drift_all);
    } else {
        notes.push_back("drift.csv skipped: no terrace decomposition present in this run "
                        "directory");
    }

    std::string note_text;
    for (const std::string& n : notes) note_text += n + "\n";
    io::write_text(dir / "notes.txt", note_text.empty() ? "all artifacts written\n"
                                                        : note_text);
    manifest["headline"] = {{"notes", notes.size()}};
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    finalize_manifest(manifest, dir, wall);
    return dir;
}

}  // namespace terrace
