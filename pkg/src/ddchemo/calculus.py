"""Cell-centred finite-volume calculus on uniform Cartesian grids.

Fields are plain numpy arrays shaped ``grid.shape``: ``(nx,)`` in 1D and
``(nx, ny)`` in 2D, axis 0 running along x.  Boundaries carry homogeneous
Neumann closure through mirror ghost cells, so every boundary face has zero
gradient and zero flux.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Grid",
    "FaceFluxes",
    "build_grid",
    "cell_centers",
    "face_gradient",
    "divergence",
    "laplacian",
    "integrate",
    "face_inner",
    "hessian",
    "hessian_log",
    "hessian_frobenius_sq",
    "cell_gradient_sq",
    "face_gradient_sup",
]


@dataclass(frozen=True)
class Grid:
    dimension: int
    cells_x: int
    cells_y: int = 1
    length_x: float = 1.0
    length_y: float = 1.0

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.length_x <= 0 or self.length_y <= 0:
            raise ValueError("domain lengths must be positive")
        if self.cells_x < 4:
            raise ValueError(f"cells_x must be >= 4, got {self.cells_x}")
        if self.dimension == 1:
            if self.cells_y != 1 or self.length_y != 1.0:
                raise ValueError("1D grids take cells_y = 1 and length_y = 1")
        elif self.cells_y < 4:
            raise ValueError(f"cells_y must be >= 4, got {self.cells_y}")

    @property
    def h_x(self) -> float:
        return self.length_x / self.cells_x

    @property
    def h_y(self) -> float:
        return self.length_y / self.cells_y

    @property
    def shape(self) -> tuple[int, ...]:
        if self.dimension == 1:
            return (self.cells_x,)
        return (self.cells_x, self.cells_y)

    @property
    def size(self) -> int:
        return self.cells_x * self.cells_y

    @property
    def cell_area(self) -> float:
        return self.h_x * self.h_y if self.dimension == 2 else self.h_x

    @property
    def volume(self) -> float:
        return self.length_x * self.length_y if self.dimension == 2 else self.length_x

    @cached_property
    def spacings(self) -> tuple[float, ...]:
        return (self.h_x,) if self.dimension == 1 else (self.h_x, self.h_y)


def build_grid(dimension: int, cells_x: int, cells_y: int = 1,
               length_x: float = 1.0, length_y: float = 1.0) -> Grid:
    return Grid(int(dimension), int(cells_x), int(cells_y), float(length_x), float(length_y))


def cell_centers(grid: Grid) -> tuple[np.ndarray, ...]:
    """Coordinate arrays of cell centres, broadcast to ``grid.shape``."""
    x = (np.arange(grid.cells_x) + 0.5) * grid.h_x
    if grid.dimension == 1:
        return (x,)
    y = (np.arange(grid.cells_y) + 0.5) * grid.h_y
    X, Y = np.meshgrid(x, y, indexing="ij")
    return (X, Y)


@dataclass(frozen=True)
class FaceFluxes:
    """Values on interior faces; boundary faces are implicitly zero.

    ``x`` has shape ``(nx-1,)`` (1D) or ``(nx-1, ny)``; ``y`` is ``None`` in 1D
    and ``(nx, ny-1)`` in 2D.
    """

    grid: Grid
    x: np.ndarray
    y: np.ndarray | None = None

    def __add__(self, other: FaceFluxes) -> FaceFluxes:
        y = None if self.y is None else self.y + other.y
        return FaceFluxes(self.grid, self.x + other.x, y)

    def __sub__(self, other: FaceFluxes) -> FaceFluxes:
        y = None if self.y is None else self.y - other.y
        return FaceFluxes(self.grid, self.x - other.x, y)

    def components(self) -> tuple[np.ndarray, ...]:
        return (self.x,) if self.y is None else (self.x, self.y)


def _check(grid: Grid, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match grid shape {grid.shape}")
    return f


def face_gradient(grid: Grid, f: np.ndarray) -> FaceFluxes:
    f = _check(grid, f)
    gx = (f[1:] - f[:-1]) / grid.h_x
    gy = (f[:, 1:] - f[:, :-1]) / grid.h_y if grid.dimension == 2 else None
    return FaceFluxes(grid, gx, gy)


def divergence(F: FaceFluxes) -> np.ndarray:
    grid = F.grid
    out = np.zeros(grid.shape)
    fx = F.x / grid.h_x
    out[:-1] += fx
    out[1:] -= fx
    if grid.dimension == 2:
        fy = F.y / grid.h_y
        out[:, :-1] += fy
        out[:, 1:] -= fy
    return out


def laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Neumann Laplacian, ``divergence(face_gradient(f))``."""
    return divergence(face_gradient(grid, f))


def integrate(grid: Grid, f: np.ndarray) -> float:
    """Midpoint quadrature over the domain."""
    return float(np.sum(f) * grid.cell_area)


def face_inner(F: FaceFluxes, G: FaceFluxes) -> float:
    """Discrete inner product of face fields, each face weighted by ``h_x*h_y``."""
    w = F.grid.cell_area
    return float(sum(np.sum(a * b) for a, b in zip(F.components(), G.components())) * w)


def hessian(grid: Grid, f: np.ndarray) -> dict[str, np.ndarray]:
    """Centred second differences with mirror ghosts.

    Returns ``{"xx"}`` in 1D and ``{"xx", "yy", "xy"}`` in 2D.
    """
    f = _check(grid, f)
    P = np.pad(f, 1, mode="edge")
    hx = grid.h_x
    if grid.dimension == 1:
        return {"xx": (P[2:] - 2.0 * P[1:-1] + P[:-2]) / hx**2}
    hy = grid.h_y
    fxx = (P[2:, 1:-1] - 2.0 * P[1:-1, 1:-1] + P[:-2, 1:-1]) / hx**2
    fyy = (P[1:-1, 2:] - 2.0 * P[1:-1, 1:-1] + P[1:-1, :-2]) / hy**2
    fxy = (P[2:, 2:] - P[2:, :-2] - P[:-2, 2:] + P[:-2, :-2]) / (4.0 * hx * hy)
    return {"xx": fxx, "yy": fyy, "xy": fxy}


def hessian_frobenius_sq(H: dict[str, np.ndarray]) -> np.ndarray:
    out = H["xx"] ** 2
    if "yy" in H:
        out = out + H["yy"] ** 2 + 2.0 * H["xy"] ** 2
    return out


def hessian_log(grid: Grid, v: np.ndarray) -> dict[str, np.ndarray]:
    """Hessian of ``ln v``; the dict also carries ``"frob_sq"`` = |D² ln v|² per cell."""
    v = _check(grid, v)
    if v.min() <= 0:
        raise ValueError("hessian_log requires a strictly positive field")
    H = hessian(grid, np.log(v))
    H["frob_sq"] = hessian_frobenius_sq(H)
    return H


def _axis_avg_sq(g: np.ndarray, axis: int, shape: tuple[int, ...]) -> np.ndarray:
    s = 0.5 * g * g
    out = np.zeros(shape)
    if axis == 0:
        out[:-1] += s
        out[1:] += s
    else:
        out[:, :-1] += s
        out[:, 1:] += s
    return out


def cell_gradient_sq(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Cell value of |∇f|²: per direction, the mean of the two adjacent squared face gradients.

    Boundary faces contribute zero, so a linear profile of slope ``s`` reads
    ``s**2`` inside and ``s**2/2`` in the first and last cell.
    """
    G = face_gradient(grid, f)
    out = _axis_avg_sq(G.x, 0, grid.shape)
    if grid.dimension == 2:
        out += _axis_avg_sq(G.y, 1, grid.shape)
    return out


def face_gradient_sup(grid: Grid, f: np.ndarray) -> float:
    """max |face gradient|, the scheme's discrete ‖∇f‖_∞."""
    G = face_gradient(grid, f)
    return float(max((np.max(np.abs(c)) if c.size else 0.0) for c in G.components()))
