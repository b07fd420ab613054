import math

import numpy as np
import pytest

from ddchemo import stepper as stepper_mod
from ddchemo.calculus import build_grid, cell_centers, integrate
from ddchemo.model import ModelParams, SensitivityForm
from ddchemo.stepper import (LinearSolveError, NegativeDensityError, State, StepControl, StopCause,
                             advance, apply_v_operator, conjugate_gradient, run, stable_dt,
                             step_u_explicit, step_v_implicit)

G1 = build_grid(1, 32)
G2 = build_grid(2, 12, 10)


def bump(grid, amp=2.0, width=0.15):
    X = cell_centers(grid)
    r2 = sum((x - 0.5) ** 2 for x in X)
    return 0.1 + amp * np.exp(-r2 / (2 * width**2))


def brute_stable_dt(grid, u, v, p, ctrl, t=0.0):
    best = math.inf
    hs = grid.spacings
    idx = list(np.ndindex(grid.shape))
    for cell in idx:
        for axis, h in enumerate(hs):
            nb = list(cell)
            nb[axis] += 1
            nb = tuple(nb)
            if nb[axis] >= grid.shape[axis]:
                continue
            mob = 0.5 * (u[cell] ** (p.m - 1) * v[cell] + u[nb] ** (p.m - 1) * v[nb])
            ratio = lambda w: p.c_f * max(w, 1e-300) ** (p.alpha - 1)
            speed = max(ratio(u[cell]) * v[cell], ratio(u[nb]) * v[nb])
            gv = abs(v[nb] - v[cell]) / h
            best = min(best, h * h / (2 * grid.dimension * (mob + speed * gv * h + 1e-300)))
    dt = min(max(best * ctrl.safety, ctrl.dt_min), ctrl.dt_max)
    return min(dt, ctrl.t_end - t)


class TestStepControl:
    @pytest.mark.parametrize("kw", [dict(t_end=0), dict(dt_init=1e-2, dt_max=1e-3),
                                    dict(dt_min=1e-3, dt_init=1e-4), dict(safety=0.0),
                                    dict(safety=1.5), dict(u_blowup_threshold=-1.0)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            StepControl(**kw)

    def test_threshold_default(self):
        c = StepControl().with_threshold_for(np.array([0.5, 3.0]))
        assert c.u_blowup_threshold == pytest.approx(4e6)


class TestStableDt:
    def test_zero_mobility(self):
        p = ModelParams(c_f=0.0)
        ctrl = StepControl(t_end=1.0)
        assert stable_dt(G1, np.zeros(32), np.ones(32), p, ctrl) == ctrl.dt_max
        assert stable_dt(G1, np.zeros(32), np.ones(32), p, ctrl, t=1.0 - 1e-5) == \
            pytest.approx(1e-5)

    def test_doubling_v_halves_diffusive_bound(self):
        p = ModelParams(c_f=0.0)
        ctrl = StepControl(dt_max=10.0, dt_init=1e-3)
        u = bump(G1)
        v = 0.5 + 0.2 * np.cos(np.pi * cell_centers(G1)[0])
        assert stable_dt(G1, u, 2 * v, p, ctrl) == pytest.approx(0.5 * stable_dt(G1, u, v, p, ctrl),
                                                                 rel=1e-12)

    @pytest.mark.parametrize("grid", [G1, G2])
    def test_matches_brute_force(self, grid, rng):
        p = ModelParams(m=2.0, alpha=1.4, c_f=1.3, dimension=grid.dimension)
        ctrl = StepControl(dt_max=10.0, dt_init=1e-3)
        u = rng.random(grid.shape) * 3
        v = 0.2 + rng.random(grid.shape)
        assert stable_dt(grid, u, v, p, ctrl) == pytest.approx(brute_stable_dt(grid, u, v, p, ctrl),
                                                               rel=1e-12)


class TestImplicitV:
    ctrl = StepControl()

    def test_constant_is_steady(self):
        v = step_v_implicit(G2, np.full(G2.shape, 0.8), np.zeros(G2.shape), 0.1, self.ctrl)
        assert np.allclose(v, 0.8, rtol=1e-12)

    def test_homogeneous_backward_euler(self):
        v = step_v_implicit(G1, np.full(32, 0.8), np.full(32, 2.0), 0.05, self.ctrl)
        assert np.allclose(v, 0.8 / (1 + 0.05 * 2.0), rtol=1e-12)

    @pytest.mark.parametrize("n", [16, 64])
    def test_cosine_mode_decay(self, n):
        g = build_grid(1, n)
        (x,) = cell_centers(g)
        h, dt = g.h_x, 1e-3
        lam = 2 * (1 - np.cos(np.pi * h)) / h**2
        ctrl = StepControl(linear_solve_rtol=1e-13)
        v = step_v_implicit(g, 1 + 0.5 * np.cos(np.pi * x), np.zeros(n), dt, ctrl)
        assert np.allclose(v, 1 + 0.5 * np.cos(np.pi * x) / (1 + dt * lam), atol=1e-11)

    def test_max_principle_and_budget(self, rng):
        u = rng.random(G2.shape) * 4
        v = 0.1 + rng.random(G2.shape)
        dt = 0.02
        ctrl = StepControl(linear_solve_rtol=1e-13)
        v_new = step_v_implicit(G2, v, u, dt, ctrl)
        assert v_new.max() <= v.max()
        assert v_new.min() > 0
        balance = integrate(G2, v_new) + dt * integrate(G2, u * v_new) - integrate(G2, v)
        assert abs(balance) <= 1e-11 * integrate(G2, v)

    def test_solver_failure(self, rng):
        ctrl = StepControl(linear_solve_rtol=1e-14, linear_solve_maxiter=1)
        with pytest.raises(LinearSolveError):
            step_v_implicit(G2, 0.1 + rng.random(G2.shape), rng.random(G2.shape), 0.5, ctrl)

    def test_rejects_bad_state(self):
        with pytest.raises(ValueError):
            step_v_implicit(G1, np.zeros(32), np.ones(32), 0.1, self.ctrl)


def test_conjugate_gradient_matches_dense_solve(rng):
    g = build_grid(1, 12)
    u = rng.random(12)
    dt = 0.3
    A = np.column_stack([apply_v_operator(g, e, u, dt) for e in np.eye(12)])
    assert np.allclose(A, A.T)
    b = rng.random(12)
    x, iters, rel = conjugate_gradient(lambda y: apply_v_operator(g, y, u, dt), b, np.zeros(12),
                                       np.diag(A).copy(), 1e-13, 100)
    assert rel <= 1e-13 and iters <= 12 + 2
    assert np.allclose(x, np.linalg.solve(A, b), rtol=1e-10)


class TestExplicitU:
    def test_homogeneous(self):
        u, v = np.full(32, 1.5), np.full(32, 0.4)
        assert np.array_equal(step_u_explicit(G1, u, v, 0.01, ModelParams()), u)
        out = step_u_explicit(G1, u, v, 0.01, ModelParams(ell=0.7))
        assert np.allclose(out, 1.5 * (1 + 0.01 * 0.7 * 0.4))

    def test_mass_conservation(self, rng):
        u = 0.5 + rng.random(G2.shape)
        v = 0.5 + rng.random(G2.shape)
        p = ModelParams(m=2, alpha=1.3, dimension=2)
        dt = stable_dt(G2, u, v, p, StepControl())
        out = step_u_explicit(G2, u, v, dt, p)
        assert abs(integrate(G2, out) - integrate(G2, u)) <= 1e-12 * integrate(G2, u)

    def test_negative_raises(self):
        u = np.zeros(32)
        u[10] = 5.0
        with pytest.raises(NegativeDensityError):
            step_u_explicit(G1, u, np.ones(32), 10.0, ModelParams(m=1.0, alpha=1.0,
                                                                    sensitivity_form="F1"))


class TestAdvance:
    def test_zero_cells_decouple(self):
        g = build_grid(1, 32)
        (x,) = cell_centers(g)
        v0 = 1 + 0.5 * np.cos(np.pi * x)
        s = State(0.0, np.zeros(32), v0)
        ctrl = StepControl(t_end=0.05, linear_solve_rtol=1e-13)
        for _ in range(20):
            s, cause = advance(g, s, ModelParams(m=3.0, epsilon=0.0), ctrl)
            assert np.all(s.u == 0)
        assert integrate(g, s.v) == pytest.approx(integrate(g, v0), rel=1e-11)
        assert s.v.max() < v0.max()

    def test_hook_receives_consumption(self):
        seen = []
        s = State(0.0, np.full(32, 2.0), np.full(32, 1.0))
        s, _ = advance(G1, s, ModelParams(), StepControl(), seen.append)
        (info,) = seen
        assert info.prev.t == 0.0 and info.new is s
        assert info.consumption == pytest.approx(2.0 * s.v[0])

    def test_halving_on_overlarge_step(self, monkeypatch):
        u = np.zeros(32)
        u[16] = 3.0
        p = ModelParams(m=1.0, alpha=1.0, sensitivity_form="F1", epsilon=0.1)
        ctrl = StepControl(dt_max=1.0, dt_init=1e-3)
        monkeypatch.setattr(stepper_mod, "stable_dt", lambda *a, **k: 0.5)
        seen = []
        s, cause = advance(G1, State(0.0, u, np.ones(32)), p, ctrl, seen.append)
        assert seen[0].halvings > 0
        assert seen[0].dt == pytest.approx(0.5 * 2.0 ** -seen[0].halvings)
        assert s.u.min() >= 0 and cause is None

    def test_dt_underflow(self, monkeypatch):
        u = np.zeros(32)
        u[16] = 3.0
        p = ModelParams(m=1.0, alpha=1.0, sensitivity_form="F1", epsilon=0.1)
        ctrl = StepControl(dt_max=1.0, dt_init=1e-3, max_halvings_per_step=0)
        monkeypatch.setattr(stepper_mod, "stable_dt", lambda *a, **k: 0.5)
        s0 = State(0.0, u, np.ones(32))
        s, cause = advance(G1, s0, p, ctrl)
        assert cause is StopCause.DT_UNDERFLOW and s is s0

    def test_linear_solve_failure(self, rng):
        ctrl = StepControl(linear_solve_rtol=1e-15, linear_solve_maxiter=1)
        s0 = State(0.0, 0.1 + rng.random(32), 0.1 + rng.random(32))
        _, cause = advance(G1, s0, ModelParams(), ctrl)
        assert cause is StopCause.LINEAR_SOLVE_FAILURE

    def test_blowup_threshold(self):
        s = State(0.0, np.full(32, 2.0), np.ones(32))
        _, cause = run(G1, s, ModelParams(ell=5.0), StepControl(u_blowup_threshold=2.05))
        assert cause is StopCause.BLOWUP_SUSPECT_SUP_U

    def test_max_steps(self):
        s = State(0.0, np.ones(32), np.ones(32))
        s, cause = run(G1, s, ModelParams(), StepControl(), max_steps=3)
        assert cause is None and s.step_index == 3

    def test_mirror_symmetry(self):
        g = build_grid(2, 16, 12)
        u0 = bump(g)
        X, Y = cell_centers(g)
        v0 = 1 + 0.3 * np.cos(np.pi * X) * np.cos(np.pi * Y) ** 2
        # symmetric under x → 1 − x only when v0 is too
        v0 = 0.5 * (v0 + v0[::-1])
        s = State(0.0, u0, v0)
        p = ModelParams(m=2, alpha=1.3, dimension=2)
        for _ in range(30):
            s, _ = advance(g, s, p, StepControl())
            assert np.allclose(s.u, s.u[::-1], rtol=0, atol=1e-13 * s.u.max())
            assert np.allclose(s.v, s.v[::-1], rtol=0, atol=1e-13)


def _homogeneous_final(dt, ell, u0=1.0, v0=1.0, T=0.5):
    g = build_grid(1, 4)
    ctrl = StepControl(t_end=T, dt_init=dt, dt_min=dt / 4, dt_max=dt)
    p = ModelParams(m=2.0, ell=ell, epsilon=0.05)
    s, cause = run(g, State(0.0, np.full(4, u0), np.full(4, v0)), p, ctrl)
    assert cause is StopCause.REACHED_T_END
    return s.u[0], s.v[0]


@pytest.mark.parametrize("ell", [0.0, 0.5])
def test_first_order_splitting(ell):
    # u + ℓv is conserved, so v solves the Bernoulli equation v' = −c v + ℓ v²
    u0, v0, T = 1.0, 1.0, 0.5
    c = u0 + ell * v0
    w = ell / c + (1 / v0 - ell / c) * math.exp(c * T)
    v_exact = 1 / w
    errs = [abs(_homogeneous_final(dt, ell)[1] - v_exact) for dt in (0.02, 0.01, 0.005)]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 0.9
    u_T, v_T = _homogeneous_final(0.005, ell)
    assert u_T + ell * v_T == pytest.approx(c, rel=1e-12)
