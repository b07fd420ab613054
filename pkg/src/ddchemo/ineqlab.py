"""Discrete checks of functional inequalities on random Neumann-compatible fields.

Fields are smooth cosine series, so each one is a fixed continuous function
that can be resampled on any grid.  Two families are drawn per corpus entry:

* φ = (Σ a_k cos-modes)² + offset, nonnegative;
* ψ = exp(Σ b_k cos-modes) with Σ|b_k| ≤ B, so e^{−B} ≤ ψ ≤ e^{B}.

Inequalities of the form ``LHS ≤ η·(structural terms) + C·D`` get an
empirical constant: C is the largest required value over the even-indexed
half of the corpus, and the odd-indexed half must then satisfy the inequality
with that C.  The sharp-constant inequalities PHI1/PHI2 are checked directly
as a ratio against their explicit factor, over a ladder of grids.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .calculus import (Grid, build_grid, cell_centers, cell_gradient_sq, hessian,
                       hessian_frobenius_sq, hessian_log, integrate)

__all__ = [
    "FieldCorpus",
    "InequalityReport",
    "generate_corpus",
    "check_phi",
    "check_fi1",
    "check_fi2",
    "check_interp_uv",
    "check_interp_uvnav",
    "check_interp_high",
    "Terms",
    "fi1_terms",
    "fi2_terms",
    "uv_terms",
    "uvnav_terms",
    "high_terms",
    "phi_factor",
    "phi_terms",
    "validate_phi",
    "validate_fi1",
    "validate_fi2",
    "validate_uv",
    "validate_uvnav",
    "validate_high",
]

U_FLOOR = 1e-8
_DENOM_MIN = 1e-14
_REL_TOL = 1e-12


@dataclass(frozen=True)
class FieldCorpus:
    """Recipe for a deterministic corpus; ``grid`` fixes dimension, extents and default resolution."""

    grid: Grid
    seed: int = 0
    count: int = 200
    mode_cap: int = 6
    amplitude: float = 1.0
    phi_offset: float = 0.0
    psi_bound: float = 2.0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.mode_cap < 1:
            raise ValueError("mode_cap must be >= 1")
        if self.amplitude <= 0 or self.psi_bound <= 0 or self.phi_offset < 0:
            raise ValueError("amplitude and psi_bound must be positive, phi_offset nonnegative")

    def on(self, grid: Grid) -> FieldCorpus:
        """Same continuous fields, sampled on another grid of the same domain."""
        if (grid.dimension, grid.length_x, grid.length_y) != (
                self.grid.dimension, self.grid.length_x, self.grid.length_y):
            raise ValueError("resampling grid must cover the same domain")
        return replace(self, grid=grid)

    def _mode_indices(self) -> list[tuple[int, ...]]:
        K = self.mode_cap
        if self.grid.dimension == 1:
            return [(k,) for k in range(K + 1)]
        return [(k, l) for k in range(K + 1) for l in range(K + 1)]

    def coefficients(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per field, the (a, b) coefficient vectors over ``_mode_indices``."""
        rng = np.random.default_rng(self.seed)
        modes = self._mode_indices()
        decay = np.array([1.0 / max(1, sum(k * k for k in mode)) for mode in modes])
        out = []
        for _ in range(self.count):
            a = self.amplitude * decay * rng.uniform(-1.0, 1.0, len(modes))
            b = decay * rng.uniform(-1.0, 1.0, len(modes))
            b[0] = 0.0  # constant shift of ln ψ only rescales ψ
            s = np.abs(b).sum()
            if s > self.psi_bound:
                b *= self.psi_bound / s
            out.append((a, b))
        return out

    def basis(self) -> np.ndarray:
        """Cosine modes sampled at cell centres, shape (n_modes, *grid.shape)."""
        g = self.grid
        centers = cell_centers(g)
        lengths = (g.length_x,) if g.dimension == 1 else (g.length_x, g.length_y)
        rows = []
        for mode in self._mode_indices():
            f = np.ones(g.shape)
            for k, X, L in zip(mode, centers, lengths):
                f = f * np.cos(k * np.pi * X / L)
            rows.append(f)
        return np.array(rows)


def generate_corpus(spec: FieldCorpus) -> list[tuple[np.ndarray, np.ndarray]]:
    """List of (φ, ψ) pairs on ``spec.grid``."""
    B = spec.basis()
    out = []
    for a, b in spec.coefficients():
        s = np.tensordot(a, B, axes=1)
        phi = s * s + spec.phi_offset
        psi = np.exp(np.tensordot(b, B, axes=1))
        out.append((phi, psi))
    return out


@dataclass
class InequalityReport:
    inequality_id: str
    params: dict[str, float]
    corpus_size: int
    estimated_constant: float
    holdout_violations: int
    worst_margin: float
    grid_levels: list[dict] = field(default_factory=list)
    refinement_consistent: bool = True

    @property
    def passed(self) -> bool:
        return (self.holdout_violations == 0 and self.refinement_consistent
                and math.isfinite(self.estimated_constant))

    def to_dict(self) -> dict:
        d = _strict(asdict(self))
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=False)


def _strict(obj):
    """Replace non-finite floats by None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _strict(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_strict(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _pow(f: np.ndarray, e: float) -> np.ndarray:
    if e < 0:
        return np.maximum(f, U_FLOOR) ** e
    if e == 0:
        return np.ones_like(f)
    return f**e


# ---------------------------------------------------------------------------
# PHI1 / PHI2


def phi_terms(grid: Grid, phi: np.ndarray, q: float, which: str) -> tuple[float, float]:
    """(LHS, dissipation) for one strictly positive field."""
    g2 = cell_gradient_sq(grid, phi)
    diss = integrate(grid, g2 ** ((q - 2) / 2) / phi ** (q - 3) * hessian_log(grid, phi)["frob_sq"])
    if which == "PHI1":
        lhs = integrate(grid, g2 ** ((q + 2) / 2) / phi ** (q + 1))
    else:
        lhs = integrate(grid, g2 ** ((q - 2) / 2) / phi ** (q - 1)
                        * hessian_frobenius_sq(hessian(grid, phi)))
    return lhs, diss


def validate_phi(q: float) -> None:
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")


def phi_factor(q: float, n: int, which: str) -> float:
    return (q + math.sqrt(n) + (1.0 if which == "PHI2" else 0.0)) ** 2


def check_phi(q: float, corpus: FieldCorpus, which: str = "PHI1",
              levels: Sequence[int] = (64, 128, 256), refinement_slack: float = 0.05,
              tol_coefficient: float = 10.0) -> InequalityReport:
    """Ratio LHS / (factor · dissipation) on the ψ-fields of the corpus, per grid level.

    A level passes when its worst ratio is at most 1 + tol_coefficient·h².
    Refinement consistency asks each level's worst ratio to stay within
    ``refinement_slack`` of the previous one.
    """
    if which not in ("PHI1", "PHI2"):
        raise ValueError("which must be PHI1 or PHI2")
    validate_phi(q)
    if len(levels) < 1:
        raise ValueError("need at least one grid level")
    n = corpus.grid.dimension
    factor = phi_factor(q, n, which)
    g0 = corpus.grid
    rows, violations, worst_margin = [], 0, -math.inf
    top_ratio = 0.0
    for cells in levels:
        grid = build_grid(n, cells, cells if n == 2 else 1, g0.length_x, g0.length_y)
        fields = generate_corpus(corpus.on(grid))
        h = max(grid.spacings)
        allowed = 1.0 + tol_coefficient * h * h
        worst = 0.0
        for _, psi in fields:
            lhs, diss = phi_terms(grid, psi, q, which)
            rhs = factor * diss
            ratio = 0.0 if lhs == 0.0 else (lhs / rhs if rhs > 0 else math.inf)
            worst = max(worst, ratio)
            if ratio > allowed:
                violations += 1
            if rhs > 0 or lhs > 0:
                worst_margin = max(worst_margin, (lhs - rhs) / max(lhs, rhs))
        top_ratio = max(top_ratio, worst)
        rows.append({"cells": cells, "h": h, "worst_ratio": worst, "allowed_ratio": allowed})
    consistent = all(b["worst_ratio"] <= a["worst_ratio"] * (1.0 + refinement_slack)
                     for a, b in zip(rows[:-1], rows[1:]))
    return InequalityReport(which, {"q": q, "n": n, "factor": factor}, corpus.count,
                            top_ratio * factor, violations, worst_margin, rows, consistent)


# ---------------------------------------------------------------------------
# calibration / holdout


@dataclass(frozen=True)
class Terms:
    lhs: float
    absorbed: float  # η-weighted plus unit-weight terms already on the right
    denom: float     # the term multiplied by the unknown constant


def _calibrate(inequality_id: str, params: dict, corpus: FieldCorpus,
               terms: Callable[[Grid, np.ndarray, np.ndarray], Terms]) -> InequalityReport:
    grid = corpus.grid
    fields = generate_corpus(corpus)
    evaluated = [terms(grid, phi, psi) for phi, psi in fields]
    C = 0.0
    for t in evaluated[0::2]:
        if t.denom < _DENOM_MIN:
            continue
        C = max(C, (t.lhs - t.absorbed) / t.denom)
    violations, worst_margin = 0, -math.inf
    for t in evaluated[1::2]:
        rhs = t.absorbed + C * t.denom
        if t.lhs > rhs * (1.0 + _REL_TOL):
            violations += 1
        scale = max(t.lhs, rhs)
        if scale > 0:
            worst_margin = max(worst_margin, (t.lhs - rhs) / scale)
    level = {"cells": grid.size, "shape": list(grid.shape), "calibration_size": len(evaluated[0::2]),
             "holdout_size": len(evaluated[1::2])}
    return InequalityReport(inequality_id, params, corpus.count, C, violations, worst_margin, [level])


def _lr_norm_sq(grid: Grid, f: np.ndarray, r: float) -> float:
    return integrate(grid, f**r) ** (2.0 / r)


def _fi_lhs(grid, phi, psi, p, r):
    return _lr_norm_sq(grid, phi ** ((p + 1) / 2) * np.sqrt(psi), r)


def _log_dissipation(grid: Grid, v: np.ndarray, q: float) -> float:
    gv2 = cell_gradient_sq(grid, v)
    return integrate(grid, gv2 ** ((q - 2) / 2) / v ** (q - 3) * hessian_log(grid, v)["frob_sq"])


def validate_fi1(p: float, r: float, eta: float) -> None:
    if p < 1 or r <= 1 or eta <= 0:
        raise ValueError(f"FI1 needs p >= 1, r > 1, eta > 0; got p={p}, r={r}, eta={eta}")


def validate_fi2(p: float, r: float, eta: float) -> None:
    if p <= 0 or r < 2 or eta <= 0:
        raise ValueError(f"FI2 needs p > 0, r >= 2, eta > 0; got p={p}, r={r}, eta={eta}")


def _validate_kappa_eta(kappa: float, eta: float) -> None:
    if not -1.0 < kappa < 0.0:
        raise ValueError(f"kappa must lie in (-1, 0), got {kappa}")
    if eta <= 0:
        raise ValueError("eta must be positive")


def validate_uv(kappa: float, beta: float, eta: float) -> None:
    _validate_kappa_eta(kappa, eta)
    if not 1.0 <= beta < kappa + 3.0:
        raise ValueError(f"beta must lie in [1, kappa+3) = [1, {kappa + 3:g}), got {beta}")


def validate_uvnav(kappa: float, gamma: float, eta: float) -> None:
    _validate_kappa_eta(kappa, eta)
    if not 0.0 <= gamma < kappa / 2.0 + 2.0:
        raise ValueError(f"gamma must lie in [0, kappa/2+2) = [0, {kappa / 2 + 2:g}), got {gamma}")


def validate_high(p: float, m: float, p0: float, q: float, beta: float, eta: float,
                  p0_cap: float = 1.0) -> None:
    if p <= 1 or m < 1 or p0 <= 1 or eta <= 0 or p0_cap <= 0:
        raise ValueError("need p > 1, m >= 1, p0 > 1, eta > 0, p0_cap > 0")
    lo, hi = p + m - 1.0, p0 + p + m - 1.0
    if not lo <= beta < hi:
        raise ValueError(f"beta must lie in [{lo:g}, {hi:g}), got {beta}")
    q_min = 2.0 * (p + m - 1.0) / p0
    if not q > q_min:
        raise ValueError(f"q must exceed 2(p+m-1)/p0 = {q_min:g}, got {q}")


def fi1_terms(grid: Grid, phi: np.ndarray, psi: np.ndarray, p: float, r: float,
              eta: float) -> Terms:
    t1 = integrate(grid, _pow(phi, p - 1) * psi * cell_gradient_sq(grid, phi))
    t2 = integrate(grid, phi**p) * integrate(grid, phi * cell_gradient_sq(grid, psi) / psi)
    denom = integrate(grid, phi) ** p * integrate(grid, phi * psi)
    return Terms(_fi_lhs(grid, phi, psi, p, r), eta * (t1 + t2), denom)


def fi2_terms(grid: Grid, phi: np.ndarray, psi: np.ndarray, p: float, r: float,
              eta: float) -> Terms:
    t1 = integrate(grid, _pow(phi, p - 1) * psi * cell_gradient_sq(grid, phi))
    t2 = integrate(grid, phi ** (p + 1) * cell_gradient_sq(grid, psi) / psi)
    denom = integrate(grid, phi) ** p * integrate(grid, phi * psi)
    return Terms(_fi_lhs(grid, phi, psi, p, r), eta * (t1 + t2), denom)


def uv_terms(grid: Grid, u: np.ndarray, v: np.ndarray, kappa: float, beta: float,
             eta: float) -> Terms:
    u = np.maximum(u, U_FLOOR)
    t1 = integrate(grid, _pow(u, kappa) * v * cell_gradient_sq(grid, u))
    t2 = _log_dissipation(grid, v, 4.0)
    return Terms(integrate(grid, u**beta * v), eta * (t1 + t2), integrate(grid, u * v))


def uvnav_terms(grid: Grid, u: np.ndarray, v: np.ndarray, kappa: float, gamma: float,
                eta: float) -> Terms:
    u = np.maximum(u, U_FLOOR)
    gv2 = cell_gradient_sq(grid, v)
    t1 = integrate(grid, _pow(u, kappa) * v * cell_gradient_sq(grid, u))
    t2 = integrate(grid, u * gv2 * gv2 / v**3)
    t3 = _log_dissipation(grid, v, 4.0)
    unit = integrate(grid, v * gv2)
    lhs = integrate(grid, _pow(u, gamma) * v * gv2)
    return Terms(lhs, eta * (t1 + t2 + t3) + unit, integrate(grid, u * v))


def high_terms(grid: Grid, u: np.ndarray, v: np.ndarray, p: float, m: float, p0: float,
               q: float, beta: float, eta: float, p0_cap: float = 1.0) -> Terms:
    mass = integrate(grid, u**p0)
    if mass > p0_cap:
        u = u * (p0_cap / mass) ** (1.0 / p0)
    u = np.maximum(u, U_FLOOR)
    t1 = integrate(grid, _pow(u, p + m - 3.0) * v * cell_gradient_sq(grid, u))
    t2 = _log_dissipation(grid, v, q)
    return Terms(integrate(grid, u**beta * v), eta * (t1 + t2), integrate(grid, u * v))


def check_fi1(p: float, r: float, eta: float, corpus: FieldCorpus) -> InequalityReport:
    """‖φ^{(p+1)/2}√ψ‖²_{L^r} ≤ η∫φ^{p−1}ψφ_x² + η(∫φ^p)∫φψ_x²/ψ + C(∫φ)^p∫φψ  in 1D."""
    if corpus.grid.dimension != 1:
        raise ValueError("FI1 is a one-dimensional inequality")
    validate_fi1(p, r, eta)
    return _calibrate("FI1", {"p": p, "r": r, "eta": eta}, corpus,
                      lambda g, a, b: fi1_terms(g, a, b, p, r, eta))


def check_fi2(p: float, r: float, eta: float, corpus: FieldCorpus) -> InequalityReport:
    """‖φ^{(p+1)/2}√ψ‖²_{L^r} ≤ η∫φ^{p−1}ψ|∇φ|² + η∫φ^{p+1}|∇ψ|²/ψ + C(∫φ)^p∫φψ  in 2D."""
    if corpus.grid.dimension != 2:
        raise ValueError("FI2 is a two-dimensional inequality")
    validate_fi2(p, r, eta)
    return _calibrate("FI2", {"p": p, "r": r, "eta": eta}, corpus,
                      lambda g, a, b: fi2_terms(g, a, b, p, r, eta))


def check_interp_uv(kappa: float, beta: float, eta: float, corpus: FieldCorpus) -> InequalityReport:
    """∫u^β v ≤ η∫u^κ v|∇u|² + η∫(|∇v|²/v)|D² ln v|² + C∫uv, with u = φ and v = ψ."""
    validate_uv(kappa, beta, eta)
    return _calibrate("UV_INTERP", {"kappa": kappa, "beta": beta, "eta": eta}, corpus,
                      lambda g, a, b: uv_terms(g, a, b, kappa, beta, eta))


def check_interp_uvnav(kappa: float, gamma: float, eta: float,
                       corpus: FieldCorpus) -> InequalityReport:
    """∫u^γ v|∇v|² ≤ η(∫u^κ v|∇u|² + ∫u|∇v|⁴/v³ + ∫(|∇v|²/v)|D² ln v|²) + ∫v|∇v|² + C∫uv."""
    validate_uvnav(kappa, gamma, eta)
    return _calibrate("UVNAV_INTERP", {"kappa": kappa, "gamma": gamma, "eta": eta}, corpus,
                      lambda g, a, b: uvnav_terms(g, a, b, kappa, gamma, eta))


def check_interp_high(p: float, m: float, p0: float, q: float, beta: float, eta: float,
                      corpus: FieldCorpus, p0_cap: float = 1.0) -> InequalityReport:
    """∫u^β v ≤ η∫u^{p+m−3}v|∇u|² + η∫(|∇v|^{q−2}/v^{q−3})|D² ln v|² + C∫uv.

    Fields u with ∫u^{p0} above ``p0_cap`` are rescaled onto the cap.
    """
    validate_high(p, m, p0, q, beta, eta, p0_cap)
    params = {"p": p, "m": m, "p0": p0, "q": q, "beta": beta, "eta": eta, "p0_cap": p0_cap}
    return _calibrate("UV1_HIGH", params, corpus,
                      lambda g, a, b: high_terms(g, a, b, p, m, p0, q, beta, eta, p0_cap))
