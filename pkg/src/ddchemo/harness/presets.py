"""Named initial profiles.  Each raw u0 is scaled so its discrete maximum equals ``amplitude``."""

from __future__ import annotations

import numpy as np

from ..calculus import Grid, cell_centers
from .config import InitialSpec

__all__ = ["initial_u", "initial_v"]


def _gauss(grid: Grid, centre: tuple[float, ...], width: float) -> np.ndarray:
    r2 = sum((X - c) ** 2 for X, c in zip(cell_centers(grid), centre))
    return np.exp(-r2 / (2.0 * width * width))


def _lengths(grid: Grid) -> tuple[float, ...]:
    return (grid.length_x,) if grid.dimension == 1 else (grid.length_x, grid.length_y)


def initial_u(grid: Grid, spec: InitialSpec, seed: int = 0) -> np.ndarray:
    centre = (spec.center_x,) if grid.dimension == 1 else (spec.center_x, spec.center_y)
    if spec.preset == "constant":
        u = np.ones(grid.shape)
    elif spec.preset == "gaussian_bump":
        u = _gauss(grid, centre, spec.width)
    elif spec.preset == "two_bumps":
        mirrored = tuple(L - c for L, c in zip(_lengths(grid), centre))
        u = _gauss(grid, centre, spec.width) + _gauss(grid, mirrored, spec.width)
    else:  # checker
        u = np.ones(grid.shape)
        for X, L in zip(cell_centers(grid), _lengths(grid)):
            u = u * np.cos(spec.modes * np.pi * X / L)
        u = 0.5 * (1.0 + u)
    u = spec.amplitude * u / u.max()
    if spec.noise > 0:
        rng = np.random.default_rng(seed)
        u = u * (1.0 + spec.noise * rng.uniform(-1.0, 1.0, grid.shape))
    return u


def initial_v(grid: Grid, spec: InitialSpec) -> np.ndarray:
    shape = np.ones(grid.shape)
    for X, L in zip(cell_centers(grid), _lengths(grid)):
        shape = shape * np.cos(np.pi * X / L)
    return spec.v_level * (1.0 + spec.v_variation * shape)
