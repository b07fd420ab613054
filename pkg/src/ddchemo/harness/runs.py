"""Drivers behind the CLI subcommands.

Each ``execute_*`` function writes its outputs plus a manifest under ``out``
and returns the process exit code:

    0  success
    1  configuration or precondition error (raised as ConfigError, mapped by the CLI)
    2  a monitored bound, threshold or holdout check failed
    3  a run stopped before t_end, or a sweep cell crashed
"""

from __future__ import annotations

import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from ..calculus import Grid, build_grid, integrate
from ..diagnostics import (Monitor, calibrate_F, calibrate_G, calibrate_navq, write_csv)
from ..ineqlab import (FieldCorpus, check_fi1, check_fi2, check_interp_high,
                       check_interp_uv, check_interp_uvnav, check_phi, validate_fi1, validate_fi2,
                       validate_high, validate_phi, validate_uv, validate_uvnav)
from ..model import InitialData, make_initial_data, regularize_initial, validate_params
from ..stepper import State, StepInfo, StopCause, run
from .config import INEQ_IDS, ClassificationRule, ConfigError, RunConfig, emit_config
from .outputs import write_json, write_manifest, write_snapshot
from .presets import initial_u, initial_v

__all__ = [
    "Simulation",
    "simulate",
    "classify",
    "run_report",
    "run_exit_code",
    "execute_run",
    "execute_sweep",
    "execute_converge",
    "execute_ineq",
    "BOUNDED",
    "GROWTH_SUSPECT",
    "ABORTED",
]

BOUNDED, GROWTH_SUSPECT, ABORTED = "BOUNDED", "GROWTH_SUSPECT", "ABORTED"
_ABORT_CAUSES = (StopCause.DT_UNDERFLOW, StopCause.LINEAR_SOLVE_FAILURE)


@dataclass
class Simulation:
    config: RunConfig
    grid: Grid
    initial: InitialData
    state: State
    cause: StopCause
    monitor: Monitor
    snapshots: list[tuple[str, float, np.ndarray, np.ndarray]] = field(default_factory=list)


class _SnapshotHook:
    """Keeps the first accepted state at or after each requested time."""

    def __init__(self, times: Iterable[float], initial: State):
        self.pending = sorted(set(float(t) for t in times))
        self.taken: list[tuple[str, float, np.ndarray, np.ndarray]] = []
        self._offer(initial)

    def _offer(self, s: State) -> None:
        while self.pending and s.t >= self.pending[0] - 1e-12:
            self.pending.pop(0)
            self.taken.append((f"{len(self.taken):03d}", s.t, s.u, s.v))

    def __call__(self, info: StepInfo) -> None:
        self._offer(info.new)


def simulate(cfg: RunConfig) -> Simulation:
    grid, p, ctrl = cfg.grid, cfg.params, cfg.control
    spec = cfg.initial
    try:
        initial = make_initial_data(grid, regularize_initial(initial_u(grid, spec, cfg.seed), p),
                                    initial_v(grid, spec))
    except ValueError as exc:
        raise ConfigError(f"[initial] {exc}", None, cfg.source) from None
    state = State(0.0, initial.u0, initial.v0)
    monitor = Monitor(grid, p, initial, cfg.monitor, state)
    snaps = _SnapshotHook(cfg.get("output", "snapshot_times"), state)

    def hook(info: StepInfo) -> None:
        monitor(info)
        snaps(info)

    state, cause = run(grid, state, p, ctrl, hook)
    monitor.finalize(state)
    return Simulation(cfg, grid, initial, state, cause, monitor, snaps.taken)


def classify(cause: StopCause, t: Iterable[float], sup_u: Iterable[float], t_end: float,
             rule: ClassificationRule) -> tuple[str, float]:
    """(classification, baseline sup u).  BOUNDED needs t_end reached and no growth past the rule."""
    t = np.asarray(list(t))
    sup_u = np.asarray(list(sup_u))
    early = sup_u[t <= rule.baseline_fraction * t_end]
    baseline = float(early.max()) if early.size else float(sup_u[0])
    if cause in _ABORT_CAUSES:
        return ABORTED, baseline
    if cause is StopCause.REACHED_T_END and sup_u[-1] <= rule.growth_factor * baseline:
        return BOUNDED, baseline
    return GROWTH_SUSPECT, baseline


def run_exit_code(cause: StopCause, ledger) -> int:
    if cause is not StopCause.REACHED_T_END:
        return 3
    return 2 if len(ledger) else 0


def _energy_constants(sim: Simulation) -> dict[str, float]:
    mon, p = sim.monitor, sim.config.params
    if not mon.config.track_energy or len(mon.records) < 2:
        return {}
    out = {}
    if p.dimension == 1:
        out["F"] = calibrate_F(mon.records, p, mon.config)
    else:
        out["G"] = calibrate_G(mon.records, p)
    for q in mon.config.all_q:
        out[f"navq_q{q:g}"] = calibrate_navq(mon.records, q)
    return out


def run_report(sim: Simulation) -> dict:
    cfg, mon, s = sim.config, sim.monitor, sim.state
    rule = cfg.classification
    cls, baseline = classify(sim.cause, mon.trace_t, mon.trace_sup_u, cfg.control.t_end, rule)
    verdict = validate_params(cfg.params)
    p = cfg.params
    return {
        "stop_cause": sim.cause.value,
        "final_time": s.t,
        "steps": s.step_index,
        "peak_sup_u": max(mon.trace_sup_u),
        "final_sup_u": float(s.u.max()),
        "final_sup_v": float(s.v.max()),
        "final_mean_v": integrate(sim.grid, s.v) / sim.grid.volume,
        "initial_mass_u": integrate(sim.grid, sim.initial.u0),
        "final_mass_u": integrate(sim.grid, s.u),
        "initial_mass_v": integrate(sim.grid, sim.initial.v0),
        "K": sim.initial.K,
        "ledger_counts": mon.ledger.counts(),
        "violations": [vars(v) for v in list(mon.ledger)[:20]],
        "budget_finals": dict(mon.budgets),
        "energy_constants": _energy_constants(sim),
        "verdict": {"regime": verdict.regime.value, "in_theory": verdict.in_theory,
                    "requires_positive_u0": verdict.requires_positive_u0, "notes": verdict.notes},
        "classification": cls,
        "classification_rule": {"growth_factor": rule.growth_factor,
                                "baseline_fraction": rule.baseline_fraction,
                                "baseline_sup_u": baseline},
        "params": {"m": p.m, "alpha": p.alpha, "ell": p.ell, "c_f": p.c_f,
                   "sensitivity_form": p.sensitivity_form.value, "epsilon": p.epsilon,
                   "dimension": p.dimension},
        "grid": {"dimension": sim.grid.dimension, "cells_x": sim.grid.cells_x,
                 "cells_y": sim.grid.cells_y, "length_x": sim.grid.length_x,
                 "length_y": sim.grid.length_y},
        "exit_code": run_exit_code(sim.cause, mon.ledger),
    }


def _write_run(sim: Simulation, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.cfg").write_text(emit_config(sim.config))
    with open(out / "diagnostics.csv", "w", newline="") as fh:
        write_csv(sim.monitor.records, sim.monitor.config, fh)
    if sim.config.get("output", "write_trace"):
        mon = sim.monitor
        rows = ["t,sup_u,sup_v"] + [f"{t:.17e},{a:.17e},{b:.17e}" for t, a, b in
                                    zip(mon.trace_t, mon.trace_sup_u, mon.trace_sup_v)]
        (out / "trace.csv").write_text("\n".join(rows) + "\n")
    for tag, t, u, v in sim.snapshots:
        write_snapshot(out / "snapshots", f"u_{tag}", t, u)
        write_snapshot(out / "snapshots", f"v_{tag}", t, v)
    report = run_report(sim)
    write_json(out / "report.json", report)
    return report


def execute_run(cfg: RunConfig, out: Path, manifest: bool = True) -> int:
    sim = simulate(cfg)
    report = _write_run(sim, Path(out))
    if manifest:
        write_manifest(Path(out))
    return report["exit_code"]


# --- sweep -------------------------------------------------------------------


def _cell_name(m: float, a: float) -> str:
    return f"m{m:g}_alpha{a:g}"


def _sweep_cell(job: tuple[RunConfig, float, float, str]) -> dict:
    base, m, a, out = job
    summary = {"m": m, "alpha": a, "in_theory": False, "regime": None, "notes": ""}
    try:
        cfg = base.with_values(model__m=m, model__alpha=a)
        verdict = validate_params(cfg.params)
        summary.update(in_theory=verdict.in_theory, regime=verdict.regime.value,
                       notes=verdict.notes)
        sim = simulate(cfg)
        report = _write_run(sim, Path(out))
        summary.update(classification=report["classification"], stop_cause=report["stop_cause"],
                       peak_sup_u=report["peak_sup_u"], final_sup_u=report["final_sup_u"],
                       ledger_counts=report["ledger_counts"], completed=True)
    except Exception as exc:  # recorded per cell; the sweep carries on
        summary.update(classification="FAILED", completed=False,
                       error=f"{type(exc).__name__}: {exc}",
                       traceback=traceback.format_exc(limit=3))
    return summary


def _pool_map(fn: Callable, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def _matrix_csv(ms, alphas, value: Callable[[float, float], str]) -> str:
    rows = ["m\\alpha," + ",".join(f"{a:g}" for a in alphas)]
    for m in ms:
        rows.append(f"{m:g}," + ",".join(value(m, a) for a in alphas))
    return "\n".join(rows) + "\n"


def execute_sweep(cfg: RunConfig, out: Path, workers: int = 1) -> int:
    ms, alphas = cfg.get("sweep", "m_values"), cfg.get("sweep", "alpha_values")
    if not ms or not alphas:
        raise ConfigError("[sweep] needs nonempty m_values and alpha_values", None, cfg.source)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, m, a, str(out / "cells" / _cell_name(m, a))) for m in ms for a in alphas]
    cells = _pool_map(_sweep_cell, jobs, workers)
    by = {(c["m"], c["alpha"]): c for c in cells}
    (out / "classification.csv").write_text(
        _matrix_csv(ms, alphas, lambda m, a: by[(m, a)]["classification"]))
    (out / "overlay.csv").write_text(_matrix_csv(
        ms, alphas, lambda m, a: "IN_THEORY" if by[(m, a)]["in_theory"] else "OUT_OF_THEORY"))
    (out / "config.cfg").write_text(emit_config(cfg))
    write_json(out / "sweep.json", {"m_values": list(ms), "alpha_values": list(alphas),
                                    "cells": cells})
    write_manifest(out)
    return 0 if all(c["completed"] for c in cells) else 3


# --- convergence -------------------------------------------------------------


def _restrict(fine: np.ndarray, coarse_shape: tuple[int, ...]) -> np.ndarray:
    """Block average of a fine cell field onto a nested coarse grid."""
    shape = []
    for nf, nc in zip(fine.shape, coarse_shape):
        if nf % nc:
            raise ConfigError(f"h_levels must nest: {nf} cells do not refine {nc}")
        shape += [nc, nf // nc]
    blocks = fine.reshape(shape)
    return blocks.mean(axis=tuple(range(1, 2 * len(coarse_shape), 2)))


def _final_state(job: tuple[RunConfig, dict]) -> tuple[np.ndarray, np.ndarray, str, dict]:
    base, updates = job
    sim = simulate(base.with_values(diagnostics__track_energy=False, **updates))
    budget = {"consumption": sim.monitor.budgets["consumption"],
              "initial_mass_v": integrate(sim.grid, sim.initial.v0),
              "ledger_counts": sim.monitor.ledger.counts()}
    return sim.state.u, sim.state.v, sim.cause.value, budget


def execute_converge(cfg: RunConfig, out: Path, workers: int = 1) -> int:
    eps = tuple(cfg.get("converge", "epsilons"))
    levels = tuple(cfg.get("converge", "h_levels"))
    if len(levels) < 3:
        raise ConfigError("[converge] h_levels needs at least 3 levels", None, cfg.source)
    if len(eps) < 3:
        raise ConfigError("[converge] epsilons needs at least 3 values", None, cfg.source)
    if list(levels) != sorted(set(levels)):
        raise ConfigError("[converge] h_levels must be strictly increasing", None, cfg.source)
    grid = cfg.grid
    dim = grid.dimension
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)

    eps_jobs = [(cfg, {"model__epsilon": e}) for e in eps]

    def level_updates(n):
        d = {"grid__cells_x": n}
        if dim == 2:
            d["grid__cells_y"] = n
        return d

    h_jobs = [(cfg, level_updates(n)) for n in levels]
    results = _pool_map(_final_state, eps_jobs + h_jobs, workers)
    eps_res, h_res = results[: len(eps)], results[len(eps):]

    diffs = [integrate(grid, np.abs(a[0] - b[0])) for a, b in zip(eps_res[:-1], eps_res[1:])]
    eps_ok = all(d2 <= d1 for d1, d2 in zip(diffs[:-1], diffs[1:]))

    v_fine = h_res[-1][1]
    errors = []
    for n, (_, v, _, _) in zip(levels[:-1], h_res[:-1]):
        g = build_grid(dim, n, n if dim == 2 else 1, grid.length_x, grid.length_y)
        errors.append(integrate(g, np.abs(v - _restrict(v_fine, g.shape))))
    orders = [math.log(e1 / e2) / math.log(n2 / n1) if e1 > 0 and e2 > 0 else math.inf
              for e1, e2, n1, n2 in zip(errors[:-1], errors[1:], levels[:-2], levels[1:-1])]
    min_order = cfg.get("converge", "min_order")
    h_ok = bool(orders) and min(orders) >= min_order
    causes = [r[2] for r in results]
    completed = all(c == StopCause.REACHED_T_END.value for c in causes)

    report = {
        "epsilon_study": {"epsilons": list(eps), "pairwise_l1_u": diffs,
                          "non_increasing": eps_ok,
                          "strictly_decreasing": all(d2 < d1 for d1, d2 in zip(diffs[:-1], diffs[1:])),
                          "stop_causes": causes[: len(eps)]},
        "h_study": {"levels": list(levels), "l1_error_v_vs_finest": errors,
                    "observed_orders": orders, "min_order_required": min_order, "passed": h_ok,
                    "epsilon": cfg.params.epsilon, "stop_causes": causes[len(eps):]},
        "run_budgets": [r[3] for r in results],
        "passed": eps_ok and h_ok and completed,
    }
    (out / "config.cfg").write_text(emit_config(cfg))
    write_json(out / "convergence.json", report)
    write_manifest(out)
    if not completed:
        return 3
    return 0 if report["passed"] else 2


# --- inequality lab ----------------------------------------------------------

_VALIDATORS = {
    "PHI1": validate_phi,
    "PHI2": validate_phi,
    "FI1": validate_fi1,
    "FI2": validate_fi2,
    "UV_INTERP": validate_uv,
    "UVNAV_INTERP": validate_uvnav,
    "UV1_HIGH": validate_high,
}


def _ineq_job(job: tuple[str, dict, FieldCorpus, FieldCorpus, tuple[int, ...]]) -> dict:
    ident, params, c1, c2, phi_levels = job
    if ident in ("PHI1", "PHI2"):
        rep = check_phi(params["q"], c1, ident, levels=phi_levels)
    elif ident == "FI1":
        rep = check_fi1(params["p"], params["r"], params["eta"], c1)
    elif ident == "FI2":
        rep = check_fi2(params["p"], params["r"], params["eta"], c2)
    elif ident == "UV_INTERP":
        rep = check_interp_uv(params["kappa"], params["beta"], params["eta"], c2)
    elif ident == "UVNAV_INTERP":
        rep = check_interp_uvnav(params["kappa"], params["gamma"], params["eta"], c2)
    else:
        rep = check_interp_high(corpus=c2, **params)
    return rep.to_dict()


def ineq_jobs(cfg: RunConfig, seed: int | None = None) -> list:
    """Validated job list for the configured suite; raises ConfigError on bad parameters."""
    s = cfg.section("ineq")
    seed = cfg.seed if seed is None else seed
    common = dict(seed=seed, count=s["count"], mode_cap=s["mode_cap"],
                  amplitude=s["amplitude"], psi_bound=s["psi_bound"])
    try:
        c1 = FieldCorpus(build_grid(1, s["cells_1d"]), **common)
        c2 = FieldCorpus(build_grid(2, s["cells_2d"], s["cells_2d"]), **common)
    except ValueError as exc:
        raise ConfigError(f"[ineq] {exc}", None, cfg.source) from None
    jobs = []
    for ident in INEQ_IDS:
        for entry in s[ident]:
            params = dict(entry)
            try:
                _VALIDATORS[ident](**params)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"[ineq] {ident} {params}: {exc}", None, cfg.source) from None
            jobs.append((ident, params, c1, c2, tuple(s["phi_levels"])))
    return jobs


def execute_ineq(cfg: RunConfig, out: Path, workers: int = 1, seed: int | None = None) -> int:
    jobs = ineq_jobs(cfg, seed)
    reports = _pool_map(_ineq_job, jobs, workers)
    out = Path(out)
    (out / "ineq").mkdir(parents=True, exist_ok=True)
    counts: dict[str, int] = {}
    for rep in reports:
        k = counts[rep["inequality_id"]] = counts.get(rep["inequality_id"], 0) + 1
        write_json(out / "ineq" / f"{rep['inequality_id']}_{k}.json", rep)
    passed = all(r["passed"] for r in reports)
    summary = [{"inequality_id": r["inequality_id"], "params": r["params"], "passed": r["passed"],
                "holdout_violations": r["holdout_violations"],
                "estimated_constant": r["estimated_constant"], "worst_margin": r["worst_margin"]}
               for r in reports]
    write_json(out / "ineq_summary.json", {"passed": passed, "checks": summary})
    (out / "config.cfg").write_text(emit_config(cfg))
    write_manifest(out)
    return 0 if passed else 2
