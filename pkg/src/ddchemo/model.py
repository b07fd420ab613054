"""Model definition for the regularised doubly degenerate nutrient system.

    u_t = ∇·(u^{m-1} v ∇u) − ∇·(f(u) v ∇v) + ℓ u v
    v_t = Δv − u v

with no-flux boundaries.  The regularisation parameter only shifts the
initial cell density (see :func:`regularize_initial`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .calculus import FaceFluxes, Grid, divergence, face_gradient, face_gradient_sup

__all__ = [
    "SensitivityForm",
    "Regime",
    "ModelParams",
    "AdmissibilityVerdict",
    "InitialData",
    "sensitivity",
    "sensitivity_ratio",
    "validate_params",
    "regularize_initial",
    "make_initial_data",
    "u_fluxes",
    "u_rhs",
    "v_consumption",
]


class SensitivityForm(str, enum.Enum):
    F1 = "F1"  # C_f u (u+1)^{α-1}
    F2 = "F2"  # C_f u^α


class Regime(str, enum.Enum):
    WEAK_1D = "WEAK_1D"
    WEAK_2D = "WEAK_2D"
    CLASSICAL_1D = "CLASSICAL_1D"
    CLASSICAL_2D = "CLASSICAL_2D"
    OUT_OF_THEORY = "OUT_OF_THEORY"


@dataclass(frozen=True)
class ModelParams:
    m: float = 2.0
    alpha: float = 1.5
    ell: float = 0.0
    c_f: float = 1.0
    sensitivity_form: SensitivityForm = SensitivityForm.F2
    epsilon: float = 0.05
    dimension: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sensitivity_form", SensitivityForm(self.sensitivity_form))
        if not 1.0 <= self.m < 4.0:
            raise ValueError(f"m must lie in [1, 4), got {self.m}")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.ell < 0:
            raise ValueError("ell must be nonnegative")
        if self.c_f < 0:
            raise ValueError("c_f must be nonnegative")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.epsilon == 0.0 and self.m < 3.0:
            raise ValueError("epsilon = 0 is only admissible for m >= 3")
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")


@dataclass(frozen=True)
class AdmissibilityVerdict:
    regime: Regime
    requires_positive_u0: bool = False
    notes: str = ""

    @property
    def in_theory(self) -> bool:
        return self.regime is not Regime.OUT_OF_THEORY


def sensitivity(u, form: SensitivityForm | str, c_f: float, alpha: float):
    """Evaluate f(u); accepts scalars or arrays, rejects negative densities."""
    u_arr = np.asarray(u, dtype=float)
    if u_arr.size and u_arr.min() < 0:
        raise ValueError("sensitivity is defined for u >= 0 only")
    form = SensitivityForm(form)
    if form is SensitivityForm.F1:
        out = c_f * u_arr * (u_arr + 1.0) ** (alpha - 1.0)
    elif alpha == 0.0:
        # 0**0 = 1 would give f(0) = C_f; the hypothesis f(0) = 0 pins f(0).
        out = np.where(u_arr > 0, c_f, 0.0)
    else:
        out = c_f * u_arr**alpha
    return float(out) if np.ndim(u) == 0 else out


def sensitivity_ratio(u: np.ndarray, form: SensitivityForm, c_f: float, alpha: float,
                      floor: float = 1e-300) -> np.ndarray:
    """f(u)/u with its u → 0 limit (infinite limits are cut at ``1/floor``)."""
    u = np.asarray(u, dtype=float)
    if form is SensitivityForm.F1:
        return c_f * (u + 1.0) ** (alpha - 1.0)
    return c_f * np.maximum(u, floor) ** (alpha - 1.0)


def _form_satisfies(form: SensitivityForm, alpha: float, bound: SensitivityForm) -> bool:
    # u^α <= u(u+1)^{α-1} iff α >= 1, and the reverse inequality iff α <= 1.
    if form is bound:
        return True
    if bound is SensitivityForm.F1:
        return alpha >= 1.0
    return alpha <= 1.0


def validate_params(p: ModelParams) -> AdmissibilityVerdict:
    """Classify (m, α, form, n) against the proven existence ranges.

    Never raises: parameters outside every case are OUT_OF_THEORY but remain runnable.
    """
    m, a, n = p.m, p.alpha, p.dimension
    lo = m - 1.0
    if m < 2.0:
        hi, bound, classical = m, SensitivityForm.F1, False
    elif m < 3.0:
        hi, bound, classical = m / 2.0 + 1.0, SensitivityForm.F2, False
    else:
        hi, bound, classical = m / 2.0 + 1.0, SensitivityForm.F2, True

    if n == 1:
        in_range = lo <= a <= hi
        span = f"[{lo:g}, {hi:g}]"
    else:
        in_range = lo < a < hi
        span = f"({lo:g}, {hi:g})"
    if not in_range:
        return AdmissibilityVerdict(Regime.OUT_OF_THEORY, False,
                                    f"alpha={a:g} outside {span} for m={m:g}, n={n}")
    if not _form_satisfies(p.sensitivity_form, a, bound):
        return AdmissibilityVerdict(
            Regime.OUT_OF_THEORY, False,
            f"form {p.sensitivity_form.value} with alpha={a:g} does not satisfy the "
            f"{bound.value} growth bound required for m={m:g}")
    if classical:
        regime = Regime.CLASSICAL_1D if n == 1 else Regime.CLASSICAL_2D
        return AdmissibilityVerdict(regime, True, f"alpha in {span}; classical case needs u0 > 0")
    regime = Regime.WEAK_1D if n == 1 else Regime.WEAK_2D
    return AdmissibilityVerdict(regime, False, f"alpha in {span}")


def regularize_initial(u0: np.ndarray, p: ModelParams) -> np.ndarray:
    u0 = np.asarray(u0, dtype=float)
    if np.any(u0 < 0):
        raise ValueError("initial density must be nonnegative")
    if p.m < 3.0:
        return u0 + p.epsilon
    if validate_params(p).requires_positive_u0 and np.min(u0) <= 0:
        raise ValueError("the classical case 3 <= m < 4 requires u0 > 0 everywhere")
    return u0.copy()


@dataclass(frozen=True)
class InitialData:
    u0: np.ndarray
    v0: np.ndarray
    K: float = field(default=np.nan)


def make_initial_data(grid: Grid, u0: np.ndarray, v0: np.ndarray) -> InitialData:
    """Validate raw initial data and compute K = ‖u0‖∞ + ‖v0‖∞ + ‖∇ln v0‖∞."""
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if np.min(v0) <= 0:
        raise ValueError("v0 must be strictly positive")
    if np.min(u0) < 0 or np.max(u0) <= 0:
        raise ValueError("u0 must be nonnegative and not identically zero")
    K = float(np.max(u0) + np.max(v0) + face_gradient_sup(grid, np.log(v0)))
    return InitialData(u0, v0, K)


def _lr(a: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    if axis == 0:
        return a[:-1], a[1:]
    return a[:, :-1], a[:, 1:]


def _upwind(a: np.ndarray, g: np.ndarray, axis: int) -> np.ndarray:
    left, right = _lr(a, axis)
    # the transport velocity is +∇v: take the cell the gradient points away from
    return np.where(g > 0, left, right)


def _face_mean(a: np.ndarray, axis: int) -> np.ndarray:
    left, right = _lr(a, axis)
    return 0.5 * (left + right)


def _check_state(u: np.ndarray, v: np.ndarray) -> None:
    if v.min() <= 0:
        raise ValueError("v must be strictly positive")


def u_fluxes(grid: Grid, u: np.ndarray, v: np.ndarray, p: ModelParams) -> FaceFluxes:
    """Face flux u^{m-1} v ∇u − f(u) v ∇v.

    Mobility is the arithmetic face mean; the chemotactic coefficient f(u) v is upwinded.
    """
    _check_state(u, v)
    up = np.maximum(u, 0.0)
    mob = up ** (p.m - 1.0) * v
    chem = sensitivity(up, p.sensitivity_form, p.c_f, p.alpha) * v
    Gu = face_gradient(grid, u)
    Gv = face_gradient(grid, v)
    comps = []
    for axis, (gu, gv) in enumerate(zip(Gu.components(), Gv.components())):
        comps.append(_face_mean(mob, axis) * gu - _upwind(chem, gv, axis) * gv)
    return FaceFluxes(grid, *comps)


def u_rhs(grid: Grid, u: np.ndarray, v: np.ndarray, p: ModelParams) -> np.ndarray:
    return divergence(u_fluxes(grid, u, v, p)) + p.ell * u * v


def v_consumption(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.asarray(u) * np.asarray(v)
