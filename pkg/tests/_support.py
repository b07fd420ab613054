"""Small run helpers shared by the test modules."""

import numpy as np

from ddchemo.calculus import cell_centers
from ddchemo.diagnostics import Monitor, MonitorConfig
from ddchemo.model import InitialData, make_initial_data, regularize_initial
from ddchemo.stepper import State, StepControl, run


def gaussian(grid, amp=1.5, width=0.12, centre=0.5):
    X = cell_centers(grid)
    r2 = sum((x - centre) ** 2 for x in X)
    return amp * np.exp(-r2 / (2 * width**2))


def monitored_run(grid, p, u0_raw, v0, t_end=0.2, config=None, ctrl=None, raw_initial=False):
    """Run from raw data and return (final state, stop cause, monitor)."""
    u0 = regularize_initial(u0_raw, p)
    if raw_initial:
        initial = InitialData(u0, v0, float("nan"))
    else:
        initial = make_initial_data(grid, u0, v0)
    ctrl = ctrl or StepControl(t_end=t_end)
    config = config or MonitorConfig(cadence=10)
    s0 = State(0.0, initial.u0, initial.v0)
    mon = Monitor(grid, p, initial, config, s0)
    s, cause = run(grid, s0, p, ctrl, mon)
    mon.finalize(s)
    return s, cause, mon
