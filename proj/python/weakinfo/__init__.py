"""Value of weak information: minimal measures and utility maximization on lattices."""

import json

from ._weakinfo import (
    ConfigError,
    DomainError,
    InvalidParameter,
    SolverError,
    Utility,
    extremal_measures,
    minimal_measure,
    minimal_measure_exact,
    solve_binomial,
    solve_trinomial,
)
from ._weakinfo import run as _run


def run(config, command="", precision=7, threads=1):
    """Run a config (dict or JSON text). Returns (exit_code, report dict, files dict)."""
    text = config if isinstance(config, str) else json.dumps(config)
    code, report, files = _run(text, command, precision, threads)
    return code, json.loads(report), files


__all__ = [
    "ConfigError",
    "DomainError",
    "InvalidParameter",
    "SolverError",
    "Utility",
    "extremal_measures",
    "minimal_measure",
    "minimal_measure_exact",
    "run",
    "solve_binomial",
    "solve_trinomial",
]
