"""Structure-preserving finite volumes for a doubly degenerate nutrient-taxis system.

    u_t = ∇·(u^{m−1} v ∇u) − ∇·(f(u) v ∇v) + ℓ u v,    v_t = Δv − u v

Submodules: :mod:`calculus` (grids and operators), :mod:`model` (parameters,
fluxes, admissibility), :mod:`stepper` (time integration), :mod:`diagnostics`
(monitored functionals and bound checks), :mod:`ineqlab` (functional
inequality checks) and :mod:`harness` (config, CLI, sweeps).
"""

from .calculus import Grid, build_grid
from .model import ModelParams, SensitivityForm, validate_params
from .stepper import State, StepControl, StopCause, run

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "build_grid",
    "ModelParams",
    "SensitivityForm",
    "validate_params",
    "State",
    "StepControl",
    "StopCause",
    "run",
]
