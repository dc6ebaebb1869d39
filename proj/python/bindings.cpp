#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "terrace/errors.hpp"
#include "terrace/experiment.hpp"
#include "terrace/io.hpp"
#include "terrace/version.hpp"

namespace py = pybind11;
using namespace terrace;

namespace {

RunConfig config_from_text(const std::string& text) {
    RunConfig config = parse_config_text(text);
    validate_config(config);
    return config;
}

std::string ladder_summary(const PhaseLadder& ladder) {
    nlohmann::json j;
    j["alpha"] = ladder.alpha;
    j["alpha_stable_below"] = ladder.alpha_stable_below;
    j["continua"] = ladder.continua;
    j["records"] = nlohmann::json::array();
    for (const FixedPointRecord& r : ladder.records)
        j["records"].push_back({{"beta", r.beta},
                                {"multiplier", r.multiplier},
                                {"floquet_exponent", r.floquet_exponent},
                                {"degenerate", r.degenerate},
                                {"stable_below", r.stable_below},
                                {"stable_above", r.stable_above},
                                {"continuum_member", r.continuum_member}});
    return j.dump();
}

}  // namespace

PYBIND11_MODULE(_terrace_lab, m) {
    m.doc() = "time-periodic reaction-diffusion terrace laboratory";
    m.attr("__version__") = TERRACE_LAB_VERSION;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<StructuralError>(m, "StructuralError", PyExc_RuntimeError);

    py::class_<PeriodicNonlinearity>(m, "Nonlinearity")
        .def(py::init([](const std::string& preset, const std::map<std::string, double>& params,
                         const std::string& expression) {
                 FamilyPreset fp;
                 fp.name = preset;
                 fp.params = params;
                 fp.expression = expression;
                 return build_preset(fp);
             }),
             py::arg("preset"), py::arg("params") = std::map<std::string, double>{},
             py::arg("expression") = std::string{})
        .def_readonly("name", &PeriodicNonlinearity::name)
        .def_readonly("period", &PeriodicNonlinearity::period)
        .def_readonly("u_max", &PeriodicNonlinearity::u_max)
        .def("f", [](const PeriodicNonlinearity& nl, double t, double u) { return nl.f(t, u); })
        .def("df", [](const PeriodicNonlinearity& nl, double t, double u) {
            return nl.derivative(t, u);
        });

    m.def(
        "flow",
        [](const PeriodicNonlinearity& nl, double beta, double t0, double t1) {
            return flow(nl, beta, t0, t1);
        },
        py::arg("nl"), py::arg("beta"), py::arg("t0"), py::arg("t1"));
    m.def(
        "poincare",
        [](const PeriodicNonlinearity& nl, double beta) { return poincare(nl, beta); },
        py::arg("nl"), py::arg("beta"));
    m.def(
        "floquet_exponent",
        [](const PeriodicNonlinearity& nl, double beta) {
            return floquet_exponent(nl, orbit_samples(nl, beta));
        },
        py::arg("nl"), py::arg("beta"));
    m.def(
        "scan_fixed_points",
        [](const PeriodicNonlinearity& nl) { return ladder_summary(scan_fixed_points(nl)); },
        py::arg("nl"), "JSON summary of the periodic-orbit ladder",
        py::call_guard<py::gil_scoped_release>());

    m.def("parse_config", &config_from_text, py::arg("text"),
          "parse and validate a config; raises ConfigError on problems");
    m.def("serialize_config", &serialize_config, py::arg("config"));
    py::class_<RunConfig>(m, "RunConfig")
        .def_readwrite("preset", &RunConfig::preset)
        .def_readwrite("alpha", &RunConfig::alpha)
        .def_readwrite("horizon_periods", &RunConfig::horizon_periods)
        .def_readwrite("h", &RunConfig::h);

    m.def(
        "ode_scan",
        [](const std::string& config_text, const std::filesystem::path& out) {
            return cmd_ode_scan(config_from_text(config_text), out);
        },
        py::arg("config_text"), py::arg("out") = std::filesystem::path{},
        py::call_guard<py::gil_scoped_release>());
    m.def(
        "simulate",
        [](const std::string& config_text, const std::filesystem::path& out) {
            return cmd_simulate(config_from_text(config_text), out);
        },
        py::arg("config_text"), py::arg("out") = std::filesystem::path{},
        py::call_guard<py::gil_scoped_release>());
    m.def("resume", &cmd_resume, py::arg("run_dir"),
          py::call_guard<py::gil_scoped_release>());
    m.def("terrace", &cmd_terrace, py::arg("run_dir"), py::arg("ladder_json"),
          py::call_guard<py::gil_scoped_release>());
    m.def("signs", &cmd_signs, py::arg("run_dir"), py::arg("against"), py::arg("max_shift") = 2,
          py::call_guard<py::gil_scoped_release>());
    m.def(
        "sweep",
        [](const std::string& config_text, const std::filesystem::path& out, int workers) {
            return cmd_sweep(config_from_text(config_text), out, workers);
        },
        py::arg("config_text"), py::arg("out") = std::filesystem::path{},
        py::arg("workers") = 0, py::call_guard<py::gil_scoped_release>());
    m.def("report", &cmd_report, py::arg("run_dir"),
          py::call_guard<py::gil_scoped_release>());

    m.def("decomposition_json", [](const std::filesystem::path& run_dir) {
        return io::read_text(run_dir / "terrace" / "decomposition.json");
    });
}
