#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("terrace-cli-" + std::to_string(std::rand()) + "-" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this) & 0xffff));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
    std::string cmd = std::string(TERRACE_LAB_EXE) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

const char* kTinyBistable =
    "[nonlinearity]\n"
    "preset = bistable_cubic\n"
    "[params]\n"
    "theta = 0.25\n"
    "period = 1\n"
    "[initial]\n"
    "alpha = 1\n"
    "a = 0\n"
    "[solver]\n"
    "h = 0.1\n"
    "horizon_periods = 0\n"
    "x_left = -10\n"
    "x_right = 10\n"
    "[measure]\n"
    "scan_grid = 64\n";

}  // namespace

TEST_CASE("usage errors exit with the configuration code", "[cli]") {
    REQUIRE(run_cli("") == 2);
    REQUIRE(run_cli("no-such-command") == 2);
    REQUIRE(run_cli("simulate") == 2);
    REQUIRE(run_cli("simulate --config /nonexistent/path.cfg") == 2);
    REQUIRE(run_cli("terrace --run /nonexistent --ladder /nonexistent.json") == 2);
}

TEST_CASE("help and version exit cleanly", "[cli]") {
    REQUIRE(run_cli("--help") == 0);
    REQUIRE(run_cli("simulate --help") == 0);
    REQUIRE(run_cli("--version") == 0);
}

TEST_CASE("a malformed config exits with the configuration code", "[cli]") {
    TempDir tmp;
    write_file(tmp.path / "bad.cfg", "[solver]\nh = -1\n");
    REQUIRE(run_cli("simulate --config " + (tmp.path / "bad.cfg").string() + " --out " +
                    (tmp.path / "out").string()) == 2);
}

TEST_CASE("a step budget violating the stability guard is refused as configuration",
          "[cli]") {
    TempDir tmp;
    std::string cfg =
        "[nonlinearity]\n"
        "preset = threestable_paper\n"
        "[initial]\n"
        "alpha = 4\n"
        "a = 0\n"
        "[solver]\n"
        "h = 0.1\n"
        "steps_per_period = 1024\n"
        "horizon_periods = 1\n"
        "x_left = -10\n"
        "x_right = 10\n";
    write_file(tmp.path / "stiff.cfg", cfg);
    REQUIRE(run_cli("simulate --config " + (tmp.path / "stiff.cfg").string() + " --out " +
                    (tmp.path / "out").string()) == 2);
}

TEST_CASE("an escaping solution exits with the numerical code", "[cli]") {
    TempDir tmp;
    std::string cfg =
        "[nonlinearity]\n"
        "preset = custom\n"
        "expression = u^2\n"
        "period = 1\n"
        "u_max = 1\n"
        "[initial]\n"
        "alpha = 3\n"
        "a = 0\n"
        "flat = 1\n"
        "[solver]\n"
        "h = 0.1\n"
        "steps_per_period = 2048\n"
        "horizon_periods = 2\n"
        "x_left = -5\n"
        "x_right = 5\n";
    write_file(tmp.path / "runaway.cfg", cfg);
    REQUIRE(run_cli("simulate --config " + (tmp.path / "runaway.cfg").string() + " --out " +
                    (tmp.path / "out").string()) == 3);
}

TEST_CASE("scan, simulate, and terrace chain through exit codes", "[cli]") {
    TempDir tmp;
    write_file(tmp.path / "tiny.cfg", kTinyBistable);

    REQUIRE(run_cli("ode-scan --config " + (tmp.path / "tiny.cfg").string() + " --out " +
                    (tmp.path / "ladder").string()) == 0);
    REQUIRE(fs::exists(tmp.path / "ladder" / "ladder.json"));

    REQUIRE(run_cli("simulate --config " + (tmp.path / "tiny.cfg").string() + " --out " +
                    (tmp.path / "run").string()) == 0);
    REQUIRE(fs::exists(tmp.path / "run" / "manifest.json"));

    SECTION("a single-snapshot run is refused as unusable input") {
        REQUIRE(run_cli("terrace --run " + (tmp.path / "run").string() + " --ladder " +
                        (tmp.path / "ladder" / "ladder.json").string()) == 2);
    }
}
