"""Run configuration: flat ``key = value`` text with ``[section]`` headers.

Parsing goes through :mod:`configparser`; this module adds the key table
(types, defaults, documentation), line-numbered errors and a canonical
emitter whose output re-parses to the same configuration.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

from ..calculus import Grid, build_grid
from ..diagnostics import MonitorConfig
from ..model import ModelParams, SensitivityForm
from ..stepper import StepControl

__all__ = [
    "ConfigError",
    "KeySpec",
    "KEYS",
    "RunConfig",
    "InitialSpec",
    "ClassificationRule",
    "parse_config",
    "load_config",
    "emit_config",
    "config_reference",
    "PRESETS",
]

PRESETS = ("constant", "gaussian_bump", "two_bumps", "checker")
INEQ_IDS = ("PHI1", "PHI2", "FI1", "FI2", "UV_INTERP", "UVNAV_INTERP", "UV1_HIGH")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


# --- value codecs ---------------------------------------------------------


def _float(s: str) -> float:
    return float(s)


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _float_list(s: str) -> tuple[float, ...]:
    s = s.strip()
    return tuple(float(x) for x in s.split(",")) if s else ()


def _int_list(s: str) -> tuple[int, ...]:
    s = s.strip()
    return tuple(int(x) for x in s.split(",")) if s else ()


def _opt_float(s: str) -> float | None:
    return None if s.strip().lower() in ("auto", "none", "") else float(s)


def _param_sets(s: str) -> tuple[tuple[tuple[str, float], ...], ...]:
    """``p=1 r=4 eta=0.1; p=0.5 r=2 eta=0.1`` → tuple of (name, value) tuples."""
    out = []
    for entry in s.split(";"):
        entry = entry.strip()
        if not entry:
            continue
        pairs = []
        for tok in entry.split():
            if "=" not in tok:
                raise ValueError(f"expected name=value, got {tok!r}")
            k, v = tok.split("=", 1)
            pairs.append((k.strip(), float(v)))
        out.append(tuple(pairs))
    return tuple(out)


def _fmt_param_sets(v) -> str:
    return "; ".join(" ".join(f"{k}={x!r}" for k, x in entry) for entry in v)


@dataclass(frozen=True)
class KeySpec:
    section: str
    name: str
    parse: Callable[[str], Any]
    emit: Callable[[Any], str]
    default: Any
    doc: str
    choices: tuple[str, ...] | None = None


def _k(section, name, kind, default, doc, choices=None) -> KeySpec:
    codecs = {
        "int": (int, str),
        "float": (_float, _fmt_float),
        "opt_float": (_opt_float, lambda x: "auto" if x is None else _fmt_float(x)),
        "bool": (_bool, lambda b: "true" if b else "false"),
        "str": (str.strip, str),
        "floats": (_float_list, lambda t: ", ".join(_fmt_float(x) for x in t)),
        "ints": (_int_list, lambda t: ", ".join(str(x) for x in t)),
        "params": (_param_sets, _fmt_param_sets),
    }
    p, e = codecs[kind]
    return KeySpec(section, name, p, e, default, doc, choices)


KEYS: tuple[KeySpec, ...] = (
    _k("grid", "dimension", "int", 1, "1 or 2"),
    _k("grid", "cells_x", "int", 256, "cells along x (>= 4)"),
    _k("grid", "cells_y", "int", 1, "cells along y; 1 in 1D"),
    _k("grid", "length_x", "float", 1.0, "domain extent along x"),
    _k("grid", "length_y", "float", 1.0, "domain extent along y; 1 in 1D"),
    _k("model", "m", "float", 2.0, "diffusion exponent, 1 <= m < 4"),
    _k("model", "alpha", "float", 1.5, "sensitivity exponent"),
    _k("model", "ell", "float", 0.0, "growth coefficient"),
    _k("model", "c_f", "float", 1.0, "sensitivity coefficient"),
    _k("model", "sensitivity_form", "str", "F2", "F1: c_f u (u+1)^(alpha-1); F2: c_f u^alpha",
       ("F1", "F2")),
    _k("model", "epsilon", "float", 0.05, "initial density shift (used for m < 3)"),
    _k("control", "t_end", "float", 1.0, "final time"),
    _k("control", "dt_init", "float", 1e-4, "initial step"),
    _k("control", "dt_min", "float", 1e-12, "smallest admissible step"),
    _k("control", "dt_max", "float", 1e-3, "largest admissible step"),
    _k("control", "safety", "float", 0.9, "factor on the stability bound, in (0, 1]"),
    _k("control", "u_blowup_threshold", "opt_float", None,
       "sup u stop threshold; auto = 1e6 (1 + sup u0)"),
    _k("control", "linear_solve_rtol", "float", 1e-10, "CG relative residual target"),
    _k("control", "linear_solve_maxiter", "int", 2000, "CG iteration cap"),
    _k("control", "max_halvings_per_step", "int", 40, "step halvings before DT_UNDERFLOW"),
    _k("initial", "preset", "str", "gaussian_bump", "initial u profile", PRESETS),
    _k("initial", "amplitude", "float", 1.0, "sup of the raw u0 profile"),
    _k("initial", "width", "float", 0.1, "gaussian standard deviation"),
    _k("initial", "center_x", "float", 0.5, "bump centre (two_bumps mirrors it)"),
    _k("initial", "center_y", "float", 0.5, "bump centre in 2D"),
    _k("initial", "modes", "int", 2, "checker half-wavelengths per side"),
    _k("initial", "v_level", "float", 1.0, "mean nutrient level"),
    _k("initial", "v_variation", "float", 0.0, "relative cosine variation of v0, in [0, 1)"),
    _k("initial", "noise", "float", 0.0, "relative seeded multiplicative noise on u0"),
    _k("diagnostics", "cadence", "int", 50, "steps between records"),
    _k("diagnostics", "p_list", "floats", (2.0, 4.0), "L^p norms of u"),
    _k("diagnostics", "q_list", "floats", (2.0, 4.0), "gradient functional exponents (>= 2)"),
    _k("diagnostics", "track_energy", "bool", True, "accumulate energy budgets every step"),
    _k("diagnostics", "g_coefficient", "float", 8.0, "weight of the u-part in G"),
    _k("diagnostics", "f_gradu_coefficient", "float", 0.25, "weight of int v |grad u|^2 in the F check"),
    _k("diagnostics", "f_flux_coefficient", "float", 0.5, "weight of int u |grad v|^2/v in the F check"),
    _k("output", "snapshot_times", "floats", (0.0, 1.0), "times of PGM snapshots"),
    _k("output", "write_trace", "bool", True, "write the per-step sup trace"),
    _k("output", "seed", "int", 0, "seed for initial noise and corpora"),
    _k("classification", "growth_factor", "float", 10.0, "BOUNDED if sup u(T) <= factor x baseline"),
    _k("classification", "baseline_fraction", "float", 0.1,
       "baseline = max sup u over this leading fraction of [0, T]"),
    _k("sweep", "m_values", "floats", (), "m axis"),
    _k("sweep", "alpha_values", "floats", (), "alpha axis"),
    _k("converge", "epsilons", "floats", (0.1, 0.05, 0.025, 0.0125), "epsilon ladder"),
    _k("converge", "h_levels", "ints", (32, 64, 128, 256), "cells_x ladder (>= 3 levels)"),
    _k("converge", "min_order", "float", 1.0, "required observed order of v"),
    _k("ineq", "count", "int", 200, "fields per corpus"),
    _k("ineq", "mode_cap", "int", 6, "highest cosine mode"),
    _k("ineq", "amplitude", "float", 1.0, "phi coefficient scale"),
    _k("ineq", "psi_bound", "float", 2.0, "bound on sum |b_k| for psi"),
    _k("ineq", "cells_1d", "int", 256, "1D corpus grid"),
    _k("ineq", "cells_2d", "int", 32, "2D corpus grid per side"),
    _k("ineq", "phi_levels", "ints", (64, 128, 256), "refinement ladder for PHI checks"),
    _k("ineq", "PHI1", "params", ((("q", 2.0),), (("q", 4.0),)), "q values"),
    _k("ineq", "PHI2", "params", ((("q", 2.0),),), "q values"),
    _k("ineq", "FI1", "params", ((("p", 1.0), ("r", 4.0), ("eta", 0.1)),), "p r eta"),
    _k("ineq", "FI2", "params", ((("p", 0.5), ("r", 2.0), ("eta", 0.1)),
                                 (("p", 1.0), ("r", 2.0), ("eta", 0.1))), "p r eta"),
    _k("ineq", "UV_INTERP", "params", ((("kappa", -0.5), ("beta", 1.0), ("eta", 0.1)),
                                       (("kappa", -0.5), ("beta", 2.0), ("eta", 0.1))),
       "kappa beta eta"),
    _k("ineq", "UVNAV_INTERP", "params", ((("kappa", -0.5), ("gamma", 0.0), ("eta", 0.1)),
                                          (("kappa", -0.5), ("gamma", 1.5), ("eta", 0.1))),
       "kappa gamma eta"),
    _k("ineq", "UV1_HIGH", "params", ((("p", 3.0), ("m", 2.0), ("p0", 1.5), ("q", 8.0),
                                       ("beta", 4.0), ("eta", 0.1)),), "p m p0 q beta eta [p0_cap]"),
)

_KEY_INDEX = {(k.section, k.name): k for k in KEYS}
SECTIONS = tuple(dict.fromkeys(k.section for k in KEYS))
_DEFAULTS = {(k.section, k.name): k.default for k in KEYS}


@dataclass(frozen=True)
class InitialSpec:
    preset: str = "gaussian_bump"
    amplitude: float = 1.0
    width: float = 0.1
    center_x: float = 0.5
    center_y: float = 0.5
    modes: int = 2
    v_level: float = 1.0
    v_variation: float = 0.0
    noise: float = 0.0

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"preset must be one of {PRESETS}")
        if self.amplitude <= 0 or self.width <= 0 or self.v_level <= 0:
            raise ValueError("amplitude, width and v_level must be positive")
        if not 0.0 <= self.v_variation < 1.0:
            raise ValueError("v_variation must lie in [0, 1)")
        if not 0.0 <= self.noise < 1.0:
            raise ValueError("noise must lie in [0, 1)")
        if self.modes < 1:
            raise ValueError("modes must be >= 1")


@dataclass(frozen=True)
class ClassificationRule:
    growth_factor: float = 10.0
    baseline_fraction: float = 0.1

    def __post_init__(self):
        if self.growth_factor <= 0:
            raise ValueError("growth_factor must be positive")
        if not 0.0 < self.baseline_fraction <= 1.0:
            raise ValueError("baseline_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class RunConfig:
    """Every section of a config file, typed; ``values`` keeps the flat key table."""

    values: dict[tuple[str, str], Any] = field(default_factory=lambda: dict(_DEFAULTS))
    source: str = field(default="<config>", compare=False)

    def __post_init__(self):
        for key, v in _DEFAULTS.items():
            self.values.setdefault(key, v)

    def get(self, section: str, name: str) -> Any:
        return self.values[(section, name)]

    def section(self, name: str) -> dict[str, Any]:
        return {k.name: self.get(name, k.name) for k in KEYS if k.section == name}

    def with_values(self, **updates: Any) -> RunConfig:
        """``with_values(model__m=1.5)`` style overrides."""
        vals = dict(self.values)
        for key, v in updates.items():
            section, name = key.split("__", 1)
            if (section, name) not in _KEY_INDEX:
                raise KeyError(f"unknown key {section}.{name}")
            vals[(section, name)] = v
        cfg = replace(self, values=vals)
        cfg.validate()
        return cfg

    # typed views
    @property
    def grid(self) -> Grid:
        return build_grid(**self.section("grid"))

    @property
    def params(self) -> ModelParams:
        s = self.section("model")
        return ModelParams(m=s["m"], alpha=s["alpha"], ell=s["ell"], c_f=s["c_f"],
                           sensitivity_form=SensitivityForm(s["sensitivity_form"]),
                           epsilon=s["epsilon"], dimension=self.get("grid", "dimension"))

    @property
    def control(self) -> StepControl:
        return StepControl(**self.section("control"))

    @property
    def initial(self) -> InitialSpec:
        return InitialSpec(**self.section("initial"))

    @property
    def monitor(self) -> MonitorConfig:
        s = self.section("diagnostics")
        return MonitorConfig(p_list=tuple(s["p_list"]), q_list=tuple(s["q_list"]),
                             cadence=s["cadence"], track_energy=s["track_energy"],
                             g_coefficient=s["g_coefficient"],
                             f_gradu_coefficient=s["f_gradu_coefficient"],
                             f_flux_coefficient=s["f_flux_coefficient"])

    @property
    def classification(self) -> ClassificationRule:
        return ClassificationRule(**self.section("classification"))

    @property
    def seed(self) -> int:
        return self.get("output", "seed")

    def validate(self, lines: dict | None = None) -> None:
        """Build every typed view once so bad values surface as ConfigError."""
        views = (("grid", lambda: self.grid), ("model", lambda: self.params),
                 ("control", lambda: self.control), ("initial", lambda: self.initial),
                 ("diagnostics", lambda: self.monitor),
                 ("classification", lambda: self.classification))
        lines = lines or {}
        for section, build in views:
            try:
                build()
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"[{section}] {exc}", _blame(section, str(exc), lines),
                                  self.source) from None


def _blame(section: str, message: str, lines: dict) -> int | None:
    """Line of the key an error message names, else of the section header."""
    names = sorted((k.name for k in KEYS if k.section == section), key=len, reverse=True)
    for name in names:
        if re.search(rf"\b{re.escape(name)}\b", message) and (section, name) in lines:
            return lines[(section, name)]
    return lines.get((section, None))


def _line_index(text: str) -> dict[tuple[str, str | None], int]:
    lines: dict[tuple[str, str | None], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), no)
        elif "=" in s and section is not None and not raw[:1].isspace():
            lines.setdefault((section, s.split("=", 1)[0].strip()), no)
    return lines


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                   strict=True, empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("expected a [section] header before the first key", exc.lineno,
                          source) from None
    except configparser.ParsingError as exc:
        line, raw = exc.errors[0]
        text_line = text.splitlines()[line - 1].strip() if line else raw
        raise ConfigError(f"expected 'key = value', got {text_line!r}", line, source) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(exc.message.split(": ", 1)[-1], exc.lineno, source) from None
    lines = _line_index(text)
    values: dict[tuple[str, str], Any] = {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", lines.get((section, None)), source)
        for name, raw in cp.items(section):
            line = lines.get((section, name))
            spec = _KEY_INDEX.get((section, name))
            if spec is None:
                raise ConfigError(f"unknown key {name!r} in [{section}]", line, source)
            try:
                val = spec.parse(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {name}: {exc}", line, source) from None
            if spec.choices is not None and val not in spec.choices:
                raise ConfigError(f"{name} must be one of {', '.join(spec.choices)}, got {val!r}",
                                  line, source)
            values[(section, name)] = val
    cfg = RunConfig(values, source)
    cfg.validate(lines)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


def emit_config(cfg: RunConfig) -> str:
    """Canonical text: every key of every section, in table order."""
    out = []
    for section in SECTIONS:
        out.append(f"[{section}]")
        for k in KEYS:
            if k.section == section:
                out.append(f"{k.name} = {k.emit(cfg.get(section, k.name))}")
        out.append("")
    return "\n".join(out)


def config_reference() -> str:
    """Markdown table of every key."""
    out = ["# Configuration keys", "",
           "Files hold `key = value` lines under `[section]` headers; `#` starts a comment.",
           "Missing keys take the defaults below.", ""]
    for section in SECTIONS:
        out += [f"## [{section}]", "", "| key | default | meaning |", "|---|---|---|"]
        for k in KEYS:
            if k.section == section:
                choices = f" ({' / '.join(k.choices)})" if k.choices else ""
                out.append(f"| `{k.name}` | `{k.emit(k.default)}` | {k.doc}{choices} |")
        out.append("")
    return "\n".join(out)
