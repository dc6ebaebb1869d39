"""Python face of the terrace laboratory.

Thin re-export of the compiled module: kinetics presets, the periodic-orbit
scan, the front simulation driver, and the terrace decomposition, all
operating on the same run directories as the command-line tool.
"""

from ._terrace_lab import (
    ConfigError,
    Nonlinearity,
    NumericalError,
    RunConfig,
    StructuralError,
    __version__,
    decomposition_json,
    floquet_exponent,
    flow,
    ode_scan,
    parse_config,
    poincare,
    report,
    resume,
    scan_fixed_points,
    serialize_config,
    signs,
    simulate,
    sweep,
    terrace,
)

__all__ = [
    "ConfigError",
    "Nonlinearity",
    "NumericalError",
    "RunConfig",
    "StructuralError",
    "__version__",
    "decomposition_json",
    "floquet_exponent",
    "flow",
    "ode_scan",
    "parse_config",
    "poincare",
    "report",
    "resume",
    "scan_fixed_points",
    "serialize_config",
    "signs",
    "simulate",
    "sweep",
    "terrace",
]
