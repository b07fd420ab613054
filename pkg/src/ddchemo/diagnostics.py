"""Run-time diagnostics: norms, energy functionals, budgets and bound checks.

Every accepted step updates left-endpoint time integrals ("budgets") of the
integrands that appear in the a priori estimates; every ``cadence`` steps a
:class:`DiagnosticsRecord` snapshot is taken.  Time derivatives of
functionals are backward difference quotients between consecutive records,
and segment averages of the dissipation/majorant integrands are read off the
budgets, so an energy inequality is checked in its time-integrated form

    Q(t_{k+1}) − Q(t_k) + ∫ dissipation ≤ C ∫ majorant      (over [t_k, t_{k+1}]).

Majorant constants are unknown a priori.  ``calibrate_*`` returns the smallest
constant making every segment residual nonpositive on a run; the matching
``*_residual`` function audits another run against a given constant.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .calculus import Grid, cell_gradient_sq, face_gradient_sup, hessian_log, integrate
from .model import InitialData, ModelParams
from .stepper import State, StepInfo

__all__ = [
    "MonitorConfig",
    "DiagnosticsRecord",
    "Violation",
    "ViolationLedger",
    "Monitor",
    "u_energy_part",
    "instantaneous_rates",
    "compute_record",
    "check_pointwise_bounds",
    "ResidualSeries",
    "F_residual_series",
    "G_residual_series",
    "navq_residual_series",
    "calibrate_F",
    "calibrate_G",
    "calibrate_navq",
    "energy_residual_F",
    "energy_residual_G",
    "dissipation_identity_navq",
    "g_case",
    "csv_header",
    "write_csv",
]

_FLOOR = 1e-300


@dataclass(frozen=True)
class MonitorConfig:
    p_list: tuple[float, ...] = (2.0, 4.0)
    q_list: tuple[float, ...] = (2.0, 4.0)
    cadence: int = 50
    track_energy: bool = True
    # coefficient of the u-part inside G
    g_coefficient: float = 8.0
    # dissipation weights kept on the left of the 1D energy inequality
    f_gradu_coefficient: float = 0.25
    f_flux_coefficient: float = 0.5

    def __post_init__(self):
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")
        if any(q < 2 for q in self.q_list):
            raise ValueError("q values must be >= 2")
        if any(p <= 1 for p in self.p_list):
            raise ValueError("p values must be > 1")

    @property
    def all_q(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.q_list) | {2.0, 4.0}))


@dataclass
class DiagnosticsRecord:
    t: float
    step: int
    mass_u: float
    sup_u: float
    sup_v: float
    lp_norms_u: dict[float, float]
    grad_v_functional_q: dict[float, float]
    dissipation_q: dict[float, float]
    F_energy: float
    G_energy: float
    cross_uv: float
    cross_v_gradu_sq: float
    cross_u_gradv2_over_v: float
    cross_u_gradv4_over_v3: float
    w1inf_v: float
    budgets: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Violation:
    t: float
    check_name: str
    lhs: float
    rhs: float
    tolerance: float
    severity: str = "error"


class ViolationLedger:
    """Append-only list of bound violations for one run."""

    def __init__(self):
        self._entries: list[Violation] = []

    def append(self, v: Violation) -> None:
        self._entries.append(v)

    def extend(self, vs: Iterable[Violation]) -> None:
        for v in vs:
            self.append(v)

    def __iter__(self):
        return iter(tuple(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def __bool__(self) -> bool:
        return bool(self._entries)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self._entries:
            out[e.check_name] = out.get(e.check_name, 0) + 1
        return out


def u_energy_part(grid: Grid, u: np.ndarray, m: float) -> float:
    """The m-dependent u-functional shared by the 1D energy and the 2D quasi-energy.

    ∫u^{3−m} (1 ≤ m < 2 or 3 < m < 4), ∫u ln u (m = 2), −∫ln u (m = 3),
    −∫u^{3−m} (2 < m < 3); 0·ln 0 is taken as 0.
    """
    if m == 2.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)
        return integrate(grid, vals)
    if m == 3.0:
        return -integrate(grid, np.log(np.maximum(u, _FLOOR)))
    e = 3.0 - m
    val = integrate(grid, np.maximum(u, _FLOOR) ** e if e < 0 else u**e)
    return -val if 2.0 < m < 3.0 else val


def g_case(m: float) -> str:
    """Which right-hand side applies to the 2D quasi-energy inequality."""
    if m == 1.0 or m == 2.0:
        return "G1"
    if 1.0 < m < 2.0:
        return "G2"
    return "G3"


_U_FLOOR = 1e-8  # negative powers of u: same floor as the inequality lab


def _pow(u: np.ndarray, e: float) -> np.ndarray:
    if e == 0:
        return np.ones_like(u)
    if e < 0:
        return np.maximum(u, _U_FLOOR) ** e
    return u**e


class _Fields:
    """Cell quantities shared by every functional of one state."""

    def __init__(self, grid: Grid, u: np.ndarray, v: np.ndarray):
        self.grid = grid
        self.u = u
        self.v = v
        self.gu2 = cell_gradient_sq(grid, u)
        self.gv2 = cell_gradient_sq(grid, v)
        self.frob = hessian_log(grid, v)["frob_sq"]

    def I(self, f: np.ndarray) -> float:
        return integrate(self.grid, f)

    def grad_v_q(self, q: float) -> np.ndarray:
        return self.gv2 ** (q / 2.0) / self.v ** (q - 1.0)

    def diss_q(self, q: float) -> np.ndarray:
        return self.gv2 ** ((q - 2.0) / 2.0) / self.v ** (q - 3.0) * self.frob


def instantaneous_rates(grid: Grid, u: np.ndarray, v: np.ndarray, p: ModelParams,
                        q_all: Sequence[float], fields: _Fields | None = None) -> dict[str, float]:
    """Integrands accumulated into the budgets, evaluated at one state."""
    F = fields or _Fields(grid, u, v)
    m, a = p.m, p.alpha
    vgv2 = v * F.gv2
    rates = {
        "uv": F.I(u * v),
        "vgradv": F.I(vgv2),
        "u_gradv2_over_v": F.I(u * F.gv2 / v),
        "v_gradu2": F.I(v * F.gu2),
        "u2v": F.I(u * u * v),
        "chemo_G": F.I(_pow(u, 2 - 2 * m + 2 * a) * vgv2),
        "chemo_G2": F.I(_pow(u, 4 - 2 * m) * vgv2),
        "u3mv": F.I(_pow(u, 3 - m) * v),
    }
    for q in q_all:
        rates[f"diss_q{q:g}"] = F.I(F.diss_q(q))
        rates[f"u_gradvq_q{q:g}"] = F.I(u * F.grad_v_q(q))
        rates[f"u_pow_q{q:g}"] = F.I(_pow(u, (q + 2.0) / 2.0) * v)
    return rates


def _rate_keys(q_all: Sequence[float]) -> list[str]:
    keys = ["uv", "vgradv", "u_gradv2_over_v", "v_gradu2", "u2v", "chemo_G", "chemo_G2", "u3mv"]
    for q in q_all:
        keys += [f"diss_q{q:g}", f"u_gradvq_q{q:g}", f"u_pow_q{q:g}"]
    return keys


def compute_record(grid: Grid, state: State, p: ModelParams, config: MonitorConfig,
                   budgets: dict[str, float] | None = None) -> DiagnosticsRecord:
    u, v = state.u, state.v
    if u.min() < 0 or v.min() <= 0:
        raise ValueError("diagnostics need u >= 0 and v > 0")
    F = _Fields(grid, u, v)
    upart = u_energy_part(grid, u, p.m)
    g4 = F.I(F.grad_v_q(4.0))
    return DiagnosticsRecord(
        t=state.t,
        step=state.step_index,
        mass_u=F.I(u),
        sup_u=float(u.max()),
        sup_v=float(v.max()),
        lp_norms_u={pp: F.I(u**pp) ** (1.0 / pp) for pp in config.p_list},
        grad_v_functional_q={q: F.I(F.grad_v_q(q)) for q in config.all_q},
        dissipation_q={q: F.I(F.diss_q(q)) for q in config.all_q},
        F_energy=upart,
        G_energy=config.g_coefficient * upart + g4,
        cross_uv=F.I(u * v),
        cross_v_gradu_sq=F.I(v * F.gu2),
        cross_u_gradv2_over_v=F.I(u * F.gv2 / v),
        cross_u_gradv4_over_v3=F.I(u * F.gv2**2 / v**3),
        w1inf_v=float(v.max()) + face_gradient_sup(grid, v),
        budgets=dict(budgets or {}),
    )


def check_pointwise_bounds(record: DiagnosticsRecord, previous: DiagnosticsRecord | None,
                           grid: Grid, initial: InitialData, p: ModelParams,
                           budgets: dict[str, float]) -> list[Violation]:
    """Maximum principle for v, two-sided mass bound for u, consumption budget.

    ``initial`` holds the regularised data the run started from.
    """
    out = []
    mass0 = integrate(grid, initial.u0)
    vmass0 = integrate(grid, initial.v0)
    supv0 = float(initial.v0.max())
    if previous is not None:
        tol = 1e-12 * supv0
        if record.sup_v > previous.sup_v + tol:
            out.append(Violation(record.t, "vin", record.sup_v, previous.sup_v, tol))
    tol = 1e-10 * (1.0 + mass0)
    if record.mass_u < mass0 - tol:
        out.append(Violation(record.t, "u1_lower", record.mass_u, mass0, tol))
    upper = mass0 + p.ell * vmass0
    if record.mass_u > upper + tol:
        out.append(Violation(record.t, "u1_upper", record.mass_u, upper, tol))
    consumed = budgets.get("consumption", 0.0)
    tol_c = 1e-10 * (1.0 + vmass0)
    if consumed > vmass0 + tol_c:
        out.append(Violation(record.t, "uv1", consumed, vmass0, tol_c))
    return out


class Monitor:
    """Diagnostics hook for :func:`ddchemo.stepper.advance`.

    Accumulates budgets every accepted step, checks the v maximum principle at
    every step, and snapshots a record every ``config.cadence`` steps.
    """

    def __init__(self, grid: Grid, p: ModelParams, initial: InitialData,
                 config: MonitorConfig | None = None, initial_state: State | None = None):
        self.grid = grid
        self.params = p
        self.initial = initial
        self.config = config or MonitorConfig()
        self.records: list[DiagnosticsRecord] = []
        self.ledger = ViolationLedger()
        self.budgets: dict[str, float] = {"consumption": 0.0}
        self.trace_t: list[float] = []
        self.trace_sup_u: list[float] = []
        self.trace_sup_v: list[float] = []
        self.steps_since_record = 0
        self._q_all = self.config.all_q
        if self.config.track_energy:
            for k in _rate_keys(self._q_all):
                self.budgets[k] = 0.0
        state = initial_state or State(0.0, initial.u0, initial.v0)
        self._push_trace(state)
        self.record(state)

    def _push_trace(self, s: State) -> None:
        self.trace_t.append(s.t)
        self.trace_sup_u.append(float(s.u.max()))
        self.trace_sup_v.append(float(s.v.max()))

    def _accumulate(self, info: StepInfo) -> None:
        b = self.budgets
        b["consumption"] += info.dt * info.consumption
        if not self.config.track_energy:
            return
        rates = instantaneous_rates(self.grid, info.prev.u, info.prev.v, self.params, self._q_all)
        for k, r in rates.items():
            b[k] = b.get(k, 0.0) + info.dt * r

    def __call__(self, info: StepInfo) -> None:
        self._accumulate(info)
        new = info.new
        sup_v_prev = self.trace_sup_v[-1]
        self._push_trace(new)
        if self.trace_sup_v[-1] > sup_v_prev:
            self.ledger.append(Violation(new.t, "vin_step", self.trace_sup_v[-1], sup_v_prev, 0.0))
        self.steps_since_record += 1
        if self.steps_since_record >= self.config.cadence:
            self.record(new)

    def record(self, state: State) -> DiagnosticsRecord:
        if self.records and self.records[-1].step == state.step_index:
            return self.records[-1]
        rec = compute_record(self.grid, state, self.params, self.config, self.budgets)
        prev = self.records[-1] if self.records else None
        self.ledger.extend(check_pointwise_bounds(rec, prev, self.grid, self.initial,
                                                  self.params, self.budgets))
        self.records.append(rec)
        self.steps_since_record = 0
        return rec

    def finalize(self, state: State) -> None:
        self.record(state)


# ---------------------------------------------------------------------------
# energy inequalities


@dataclass(frozen=True)
class ResidualSeries:
    """Per-segment left side (rate form), majorant and roundoff allowance of an energy inequality.

    ``roundoff`` bounds the floating-point error of each segment's difference
    quotients: a few ulps of every quantity differenced, divided by the
    segment length.
    """

    t: np.ndarray
    lhs: np.ndarray
    majorant: np.ndarray
    roundoff: np.ndarray

    def residuals(self, C: float) -> np.ndarray:
        return self.lhs - C * self.majorant

    def worst(self, C: float) -> float:
        return float(np.max(self.residuals(C))) if self.lhs.size else -math.inf

    def holds(self, C: float) -> bool:
        return bool(np.all(self.residuals(C) <= self.roundoff))

    def calibrate(self) -> float:
        """Smallest C >= 0 with every residual inside its roundoff allowance."""
        if not self.lhs.size:
            return 0.0
        excess = self.lhs - self.roundoff
        with np.errstate(divide="ignore", invalid="ignore"):
            need = np.where(excess > 0, excess / self.majorant, 0.0)
        if np.any(~np.isfinite(need)):
            return math.inf
        return float(max(0.0, need.max()))


_ULPS = 64 * np.finfo(float).eps


def _segments(records: Sequence[DiagnosticsRecord], quantity, dissipation: dict[str, float],
              majorant: Sequence[str]) -> ResidualSeries:
    if len(records) < 2:
        raise ValueError("need at least two records")
    keys = list(dissipation) + list(majorant)
    ts, lhs, maj, tol = [], [], [], []
    for a, b in zip(records[:-1], records[1:]):
        dt = b.t - a.t
        if dt <= 0:
            continue
        missing = [k for k in keys if k not in a.budgets or k not in b.budgets]
        if missing:
            raise ValueError(f"records lack budgets {missing}; run with track_energy")

        def avg(k):
            return (b.budgets[k] - a.budgets[k]) / dt

        qa, qb = quantity(a), quantity(b)
        lhs.append((qb - qa) / dt + sum(w * avg(k) for k, w in dissipation.items()))
        maj.append(sum(avg(k) for k in majorant))
        mag = abs(qa) + abs(qb) + sum(abs(a.budgets[k]) + abs(b.budgets[k]) for k in keys)
        tol.append(_ULPS * mag / dt)
        ts.append(b.t)
    return ResidualSeries(np.array(ts), np.array(lhs), np.array(maj), np.array(tol))


def F_residual_series(records: Sequence[DiagnosticsRecord], p: ModelParams,
                      config: MonitorConfig | None = None) -> ResidualSeries:
    """Segments of  d/dt(∫v_x²/v + F) + a∫u v_x²/v + c∫v u_x²  ≤  C(∫v v_x² + ∫uv)."""
    if p.dimension != 1:
        raise ValueError("the F energy inequality is one-dimensional")
    config = config or MonitorConfig()
    return _segments(records,
                     lambda r: r.grad_v_functional_q[2.0] + r.F_energy,
                     {"u_gradv2_over_v": config.f_flux_coefficient,
                      "v_gradu2": config.f_gradu_coefficient},
                     ("vgradv", "uv"))


def G_residual_series(records: Sequence[DiagnosticsRecord], p: ModelParams) -> ResidualSeries:
    """Segments of  G' + ∫(|∇v|²/v)|D² ln v|² + ∫u|∇v|⁴/v³ + ∫v|∇u|²  ≤  C·(case majorant)."""
    if p.dimension != 2:
        raise ValueError("the G quasi-energy inequality is two-dimensional")
    case = g_case(p.m)
    majorant = {"G1": ("chemo_G", "u2v", "uv"),
                "G2": ("chemo_G", "chemo_G2", "u3mv"),
                "G3": ("chemo_G",)}[case]
    return _segments(records, lambda r: r.G_energy,
                     {"diss_q4": 1.0, "u_gradvq_q4": 1.0, "v_gradu2": 1.0}, majorant)


def navq_residual_series(records: Sequence[DiagnosticsRecord], q: float) -> ResidualSeries:
    """Segments of  d/dt∫|∇v|^q/v^{q−1} + (q/2)·dissipation + (q−1)²∫u|∇v|^q/v^{q−1} ≤ C∫u^{(q+2)/2}v."""
    if q < 2:
        raise ValueError("q must be >= 2")
    return _segments(records, lambda r: r.grad_v_functional_q[q],
                     {f"diss_q{q:g}": q / 2.0, f"u_gradvq_q{q:g}": (q - 1.0) ** 2},
                     (f"u_pow_q{q:g}",))


def calibrate_F(records, p, config=None) -> float:
    return F_residual_series(records, p, config).calibrate()


def calibrate_G(records, p) -> float:
    return G_residual_series(records, p).calibrate()


def calibrate_navq(records, q) -> float:
    return navq_residual_series(records, q).calibrate()


def energy_residual_F(records, p, C: float, config=None) -> float:
    """Worst segment residual; nonpositive iff the discrete inequality held with constant C."""
    return F_residual_series(records, p, config).worst(C)


def energy_residual_G(records, p, C: float) -> float:
    return G_residual_series(records, p).worst(C)


def dissipation_identity_navq(records, q: float, C1: float) -> float:
    return navq_residual_series(records, q).worst(C1)


# ---------------------------------------------------------------------------
# CSV


_BUDGET_ORDER = ("consumption", "vgradv", "u_gradv2_over_v", "v_gradu2", "uv")


def csv_header(config: MonitorConfig, budget_keys: Sequence[str]) -> list[str]:
    cols = ["t", "mass_u", "sup_u", "sup_v"]
    cols += [f"lp_norm_u_p{pp:g}" for pp in config.p_list]
    for q in config.all_q:
        cols += [f"grad_v_functional_q{q:g}", f"dissipation_q{q:g}"]
    cols += ["F_energy", "G_energy"]
    cols += [f"budget_{k}" for k in budget_keys]
    cols += ["cross_uv", "cross_v_gradu_sq", "cross_u_gradv2_over_v", "cross_u_gradv4_over_v3",
             "w1inf_v"]
    return cols


def _budget_keys(records: Sequence[DiagnosticsRecord]) -> list[str]:
    keys = set()
    for r in records:
        keys.update(r.budgets)
    head = [k for k in _BUDGET_ORDER if k in keys]
    return head + sorted(keys - set(head))


def write_csv(records: Sequence[DiagnosticsRecord], config: MonitorConfig, stream=None) -> str:
    """Write one row per record; returns the text when ``stream`` is None."""
    keys = _budget_keys(records)
    own = stream is None
    stream = stream or io.StringIO()
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(csv_header(config, keys))
    fmt = "{:.17e}".format
    for r in records:
        row = [r.t, r.mass_u, r.sup_u, r.sup_v]
        row += [r.lp_norms_u[pp] for pp in config.p_list]
        for q in config.all_q:
            row += [r.grad_v_functional_q[q], r.dissipation_q[q]]
        row += [r.F_energy, r.G_energy]
        row += [r.budgets.get(k, 0.0) for k in keys]
        row += [r.cross_uv, r.cross_v_gradu_sq, r.cross_u_gradv2_over_v,
                r.cross_u_gradv4_over_v3, r.w1inf_v]
        w.writerow([fmt(float(x)) for x in row])
    return stream.getvalue() if own else ""
