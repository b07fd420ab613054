"""Lie-split time stepping: implicit v, then explicit conservative u.

One accepted step solves

    (I − dt·L + dt·diag(u)) v_new = v            (L: Neumann Laplacian)
    u_new = u + dt·(∇·flux(u, v_new) + ℓ u v_new)

so the u step sees the v it is credited against, which makes the discrete
mass and consumption ledgers exact up to solver tolerance.  Negative u
triggers step halving, never clipping.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .calculus import Grid, integrate
from .model import ModelParams, sensitivity_ratio, u_rhs

__all__ = [
    "StepControl",
    "State",
    "StopCause",
    "StepInfo",
    "LinearSolveError",
    "NegativeDensityError",
    "stable_dt",
    "apply_v_operator",
    "conjugate_gradient",
    "step_v_implicit",
    "step_u_explicit",
    "advance",
    "run",
]

_TINY = 1e-300


class StopCause(str, enum.Enum):
    REACHED_T_END = "REACHED_T_END"
    BLOWUP_SUSPECT_SUP_U = "BLOWUP_SUSPECT_SUP_U"
    DT_UNDERFLOW = "DT_UNDERFLOW"
    LINEAR_SOLVE_FAILURE = "LINEAR_SOLVE_FAILURE"


class LinearSolveError(RuntimeError):
    pass


class NegativeDensityError(RuntimeError):
    """Raised by the explicit u step; the caller retries with a halved step."""


@dataclass(frozen=True)
class StepControl:
    t_end: float = 1.0
    dt_init: float = 1e-4
    dt_min: float = 1e-12
    dt_max: float = 1e-3
    safety: float = 0.9
    u_blowup_threshold: float | None = None  # None: 1e6 * (1 + sup u0), fixed at run start
    linear_solve_rtol: float = 1e-10
    linear_solve_maxiter: int = 2000
    max_halvings_per_step: int = 40

    def __post_init__(self):
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if self.u_blowup_threshold is not None and self.u_blowup_threshold <= 0:
            raise ValueError("u_blowup_threshold must be positive")
        if self.linear_solve_rtol <= 0:
            raise ValueError("linear_solve_rtol must be positive")

    def with_threshold_for(self, u0: np.ndarray) -> StepControl:
        if self.u_blowup_threshold is not None:
            return self
        return replace(self, u_blowup_threshold=1e6 * (1.0 + float(np.max(u0))))


@dataclass(frozen=True)
class State:
    t: float
    u: np.ndarray
    v: np.ndarray
    step_index: int = 0
    dt_last: float = 0.0


@dataclass(frozen=True)
class StepInfo:
    """What a diagnostics hook sees after each accepted step."""

    prev: State
    new: State
    dt: float
    halvings: int
    consumption: float  # ∫ u_prev · v_new, the quantity the v step actually consumed


def _face_pairs(a: np.ndarray, axis: int):
    if axis == 0:
        return a[:-1], a[1:]
    return a[:, :-1], a[:, 1:]


def stable_dt(grid: Grid, u: np.ndarray, v: np.ndarray, p: ModelParams, ctrl: StepControl,
              t: float = 0.0) -> float:
    """Positivity-motivated step bound, clamped to [dt_min, dt_max] and to t_end − t."""
    mob = u ** (p.m - 1.0) * v
    speed_cell = sensitivity_ratio(u, p.sensitivity_form, p.c_f, p.alpha) * v
    dim = grid.dimension
    dt = math.inf
    for axis, h in enumerate(grid.spacings):
        ml, mr = _face_pairs(mob, axis)
        sl, sr = _face_pairs(speed_cell, axis)
        vl, vr = _face_pairs(v, axis)
        gv = np.abs(vr - vl) / h
        denom = 0.5 * (ml + mr) + np.maximum(sl, sr) * gv * h + _TINY
        dt = min(dt, float(np.min(h * h / (2.0 * dim * denom))))
    dt *= ctrl.safety
    dt = min(max(dt, ctrl.dt_min), ctrl.dt_max)
    remaining = ctrl.t_end - t
    if remaining > 0:
        dt = min(dt, remaining)
    return dt


def _lap(x: np.ndarray, spacings: tuple[float, ...]) -> np.ndarray:
    out = np.zeros_like(x)
    for axis, h in enumerate(spacings):
        lo, hi = _face_pairs(x, axis)
        d = (hi - lo) / (h * h)
        if axis == 0:
            out[:-1] += d
            out[1:] -= d
        else:
            out[:, :-1] += d
            out[:, 1:] -= d
    return out


@functools.lru_cache(maxsize=32)
def _lap_diag(grid: Grid) -> np.ndarray:
    """Diagonal of −L: (number of interior neighbour faces) / h² per direction."""
    d = np.zeros(grid.shape)
    for axis, h in enumerate(grid.spacings):
        n = grid.shape[axis]
        c = np.full(n, 2.0)
        c[0] = c[-1] = 1.0
        shape = [1] * grid.dimension
        shape[axis] = n
        d = d + c.reshape(shape) / (h * h)
    return d


def apply_v_operator(grid: Grid, x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """(I − dt·L + dt·diag(u)) x."""
    return x - dt * _lap(x, grid.spacings) + dt * u * x


def conjugate_gradient(apply_A: Callable[[np.ndarray], np.ndarray], b: np.ndarray, x0: np.ndarray,
                       diag: np.ndarray, rtol: float, maxiter: int) -> tuple[np.ndarray, int, float]:
    """Jacobi-preconditioned CG; returns (x, iterations, relative residual)."""
    x = x0.copy()
    r = b - apply_A(x)
    bnorm = math.sqrt(float(np.vdot(b, b))) or 1.0
    rnorm = math.sqrt(float(np.vdot(r, r)))
    if rnorm <= rtol * bnorm:
        return x, 0, rnorm / bnorm
    inv_diag = 1.0 / diag
    z = inv_diag * r
    p = z.copy()
    rz = float(np.vdot(r, z))
    for it in range(1, maxiter + 1):
        Ap = apply_A(p)
        alpha = rz / float(np.vdot(p, Ap))
        x += alpha * p
        r -= alpha * Ap
        rnorm = math.sqrt(float(np.vdot(r, r)))
        if rnorm <= rtol * bnorm:
            return x, it, rnorm / bnorm
        z = inv_diag * r
        rz_new = float(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter, rnorm / bnorm


def step_v_implicit(grid: Grid, v: np.ndarray, u: np.ndarray, dt: float,
                    ctrl: StepControl) -> np.ndarray:
    """Backward-Euler nutrient step.

    The system matrix is a symmetric M-matrix with unit-dominated rows, so its
    exact solution satisfies 0 < v_new <= max(v).  The iterate is projected onto
    ``v_new <= max(v)``; that projection can only move it closer to the exact
    solution, and keeps the discrete maximum principle exact under roundoff.
    """
    if v.min() <= 0 or u.min() < 0:
        raise ValueError("step_v_implicit needs v > 0 and u >= 0")
    diag = 1.0 + dt * _lap_diag(grid) + dt * u
    x0 = v / (1.0 + dt * u)
    x, _, rel = conjugate_gradient(lambda y: apply_v_operator(grid, y, u, dt), v, x0, diag,
                                   ctrl.linear_solve_rtol, ctrl.linear_solve_maxiter)
    if not rel <= ctrl.linear_solve_rtol:
        raise LinearSolveError(f"CG stalled at relative residual {rel:.3e}")
    x = np.minimum(x, v.max())
    if x.min() <= 0:
        raise LinearSolveError("nutrient step lost positivity")
    return x


def step_u_explicit(grid: Grid, u: np.ndarray, v_new: np.ndarray, dt: float,
                    p: ModelParams) -> np.ndarray:
    u_new = u + dt * u_rhs(grid, u, v_new, p)
    if u_new.min() < 0:
        raise NegativeDensityError(f"min u = {np.min(u_new):.3e} at dt = {dt:.3e}")
    return u_new


def advance(grid: Grid, state: State, p: ModelParams, ctrl: StepControl,
            hook: Callable[[StepInfo], None] | None = None) -> tuple[State, StopCause | None]:
    """Take one accepted step; returns the new state and a stop cause if the run ends."""
    dt = stable_dt(grid, state.u, state.v, p, ctrl, state.t)
    halvings = 0
    while True:
        try:
            v_new = step_v_implicit(grid, state.v, state.u, dt, ctrl)
        except LinearSolveError:
            return state, StopCause.LINEAR_SOLVE_FAILURE
        try:
            u_new = step_u_explicit(grid, state.u, v_new, dt, p)
            break
        except NegativeDensityError:
            halvings += 1
            dt *= 0.5
            if halvings > ctrl.max_halvings_per_step or dt < ctrl.dt_min:
                return state, StopCause.DT_UNDERFLOW

    t_new = state.t + dt
    if ctrl.t_end - t_new <= 1e-12 * ctrl.t_end:
        t_new = ctrl.t_end
    new = State(t_new, u_new, v_new, state.step_index + 1, dt)
    if hook is not None:
        hook(StepInfo(state, new, dt, halvings, integrate(grid, state.u * v_new)))

    threshold = ctrl.u_blowup_threshold
    if threshold is not None and float(np.max(u_new)) > threshold:
        return new, StopCause.BLOWUP_SUSPECT_SUP_U
    if t_new >= ctrl.t_end:
        return new, StopCause.REACHED_T_END
    return new, None


def run(grid: Grid, state: State, p: ModelParams, ctrl: StepControl,
        hook: Callable[[StepInfo], None] | None = None,
        max_steps: int | None = None) -> tuple[State, StopCause | None]:
    """Advance until a stop cause fires; the cause is None if ``max_steps`` ran out first."""
    ctrl = ctrl.with_threshold_for(state.u)
    steps = 0
    while True:
        state, cause = advance(grid, state, p, ctrl, hook)
        steps += 1
        if cause is not None:
            return state, cause
        if max_steps is not None and steps >= max_steps:
            return state, None
