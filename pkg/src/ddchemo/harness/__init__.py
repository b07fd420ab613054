"""Configuration, persistence, sweeps and the command line."""

from .config import ConfigError, RunConfig, emit_config, load_config, parse_config
from .runs import (classify, execute_converge, execute_ineq, execute_run, execute_sweep,
                   run_report, simulate)

__all__ = [
    "ConfigError",
    "RunConfig",
    "emit_config",
    "load_config",
    "parse_config",
    "classify",
    "execute_converge",
    "execute_ineq",
    "execute_run",
    "execute_sweep",
    "run_report",
    "simulate",
]
