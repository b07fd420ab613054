import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ddchemo.calculus import build_grid, divergence, integrate
from ddchemo.model import (ModelParams, Regime, SensitivityForm, make_initial_data,
                           regularize_initial, sensitivity, u_fluxes, u_rhs, v_consumption,
                           validate_params)

F1, F2 = SensitivityForm.F1, SensitivityForm.F2


class TestSensitivity:
    @pytest.mark.parametrize("form", [F1, F2])
    @pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 2.3])
    def test_vanishes_at_zero(self, form, alpha):
        assert sensitivity(0.0, form, 1.7, alpha) == 0.0

    def test_values(self):
        assert sensitivity(1.0, F2, 1.0, 2.0) == 1.0
        assert sensitivity(3.0, F1, 2.0, 1.5) == pytest.approx(12.0)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            sensitivity(np.array([1.0, -0.1]), F2, 1.0, 1.5)

    @pytest.mark.parametrize("form", [F1, F2])
    @pytest.mark.parametrize("alpha", [1.0, 1.3, 1.8, 2.5])
    def test_nonnegative_and_nondecreasing(self, form, alpha):
        u = np.linspace(0, 20, 401)
        f = sensitivity(u, form, 1.0, alpha)
        assert np.all(f >= 0)
        assert np.all(np.diff(f) >= 0)

    @pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0])
    def test_f1_dominates_f2(self, alpha):
        u = np.linspace(1e-3, 50, 300)
        assert np.all(sensitivity(u, F1, 1.0, alpha) >= sensitivity(u, F2, 1.0, alpha) * (1 - 1e-14))


class TestValidateParams:
    def test_2d_interior(self):
        assert validate_params(ModelParams(m=2, alpha=1.8, dimension=2)).regime is Regime.WEAK_2D

    def test_1d_closed_endpoint(self):
        assert validate_params(ModelParams(m=2, alpha=2.0, dimension=1)).regime is Regime.WEAK_1D

    def test_2d_endpoint_excluded(self):
        v = validate_params(ModelParams(m=2, alpha=2.0, dimension=2))
        assert v.regime is Regime.OUT_OF_THEORY
        assert not v.in_theory

    def test_low_m_needs_f1_bound(self):
        # F2 with α ≥ 1 lies under the F1 bound; with α < 1 it does not
        assert validate_params(ModelParams(m=1.5, alpha=1.2, sensitivity_form=F2)).in_theory
        assert not validate_params(ModelParams(m=1.5, alpha=0.8, sensitivity_form=F2)).in_theory
        assert validate_params(ModelParams(m=1.5, alpha=0.8, sensitivity_form=F1)).in_theory

    def test_mid_m_needs_f2_bound(self):
        assert not validate_params(ModelParams(m=2.5, alpha=1.8, sensitivity_form=F1)).in_theory

    def test_classical_case(self):
        v = validate_params(ModelParams(m=3.5, alpha=2.6, dimension=2))
        assert v.regime is Regime.CLASSICAL_2D
        assert v.requires_positive_u0

    def test_below_range(self):
        assert not validate_params(ModelParams(m=1.5, alpha=0.3)).in_theory

    def test_pure_and_1d_contains_2d(self):
        strictly_bigger = False
        for m in np.linspace(1.0, 3.9, 30):
            for a in np.linspace(0.0, 3.0, 61):
                for form in (F1, F2):
                    kw = dict(m=float(m), alpha=float(a), sensitivity_form=form, epsilon=0.1)
                    v1 = validate_params(ModelParams(dimension=1, **kw))
                    v2 = validate_params(ModelParams(dimension=2, **kw))
                    assert validate_params(ModelParams(dimension=2, **kw)) == v2
                    if v2.in_theory:
                        assert v1.in_theory
                    strictly_bigger |= v1.in_theory and not v2.in_theory
        assert strictly_bigger


class TestModelParams:
    @pytest.mark.parametrize("kw", [dict(m=0.5), dict(m=4.0), dict(alpha=-1), dict(ell=-0.1),
                                    dict(epsilon=1.0), dict(epsilon=0.0, m=2.0), dict(dimension=3)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)

    def test_zero_epsilon_for_high_m(self):
        assert ModelParams(m=3.0, epsilon=0.0).epsilon == 0.0

    def test_frozen(self):
        p = ModelParams()
        with pytest.raises(AttributeError):
            p.m = 3.0


class TestRegularizeInitial:
    def test_shift_below_three(self):
        assert np.allclose(regularize_initial(np.ones(8), ModelParams(m=2, epsilon=0.1)), 1.1)

    def test_unchanged_classical(self):
        assert np.allclose(regularize_initial(np.ones(8), ModelParams(m=3.5, alpha=2.5,
                                                                      epsilon=0.1)), 1.0)

    def test_zero_cell_classical(self):
        u0 = np.ones(8)
        u0[3] = 0.0
        with pytest.raises(ValueError):
            regularize_initial(u0, ModelParams(m=3.5, alpha=2.5, epsilon=0.1))


def test_initial_data_k():
    g = build_grid(1, 4)
    v0 = np.exp(np.array([0.0, 0.25, 0.5, 0.75]))
    d = make_initial_data(g, np.array([0.0, 2.0, 1.0, 0.0]), v0)
    assert d.K == pytest.approx(2.0 + np.exp(0.75) + 0.25 / 0.25)
    with pytest.raises(ValueError):
        make_initial_data(g, np.zeros(4), v0)
    with pytest.raises(ValueError):
        make_initial_data(g, np.ones(4), np.zeros(4))


class TestFluxes:
    def test_constant_state(self):
        g = build_grid(2, 6, 5)
        F = u_fluxes(g, np.full(g.shape, 2.0), np.full(g.shape, 0.7), ModelParams(dimension=2))
        assert all(np.all(c == 0) for c in F.components())

    def test_step_profile_hand_computation(self):
        g = build_grid(1, 4)
        u = np.array([1.0, 1.0, 3.0, 3.0])
        v = np.full(4, 0.5)
        p = ModelParams(m=2.0, c_f=0.0)
        F = u_fluxes(g, u, v, p)
        # face between cells 1 and 2: mean(u·v) · (3 − 1)/h = 1.0 · 2 / 0.25
        assert F.x[1] == pytest.approx(0.5 * (1.0 * 0.5 + 3.0 * 0.5) * 2.0 / 0.25)
        assert F.x[0] == 0.0 and F.x[2] == 0.0

    def test_upwinded_taxis(self):
        g = build_grid(1, 4)
        u = np.array([1.0, 2.0, 3.0, 4.0])
        v = np.array([1.0, 1.5, 1.25, 1.0])
        p = ModelParams(m=1.0, alpha=1.0, c_f=1.0, sensitivity_form=F2, epsilon=0.1)
        F = u_fluxes(g, u, v, p)
        diff = (u[1:] - u[:-1]) / g.h_x * 0.5 * (v[1:] + v[:-1])
        gv = (v[1:] - v[:-1]) / g.h_x
        coeff = np.where(gv > 0, (u * v)[:-1], (u * v)[1:])
        assert np.allclose(F.x, diff - coeff * gv)

    def test_rhs_examples(self):
        g = build_grid(1, 8)
        assert np.all(u_rhs(g, np.full(8, 2.0), np.full(8, 3.0), ModelParams()) == 0)
        assert np.allclose(u_rhs(g, np.full(8, 2.0), np.full(8, 3.0), ModelParams(ell=1.0)), 6.0)
        assert np.allclose(v_consumption(np.full(8, 2.0), np.full(8, 3.0)), 6.0)

    def test_rejects_nonpositive_v(self):
        g = build_grid(1, 8)
        with pytest.raises(ValueError):
            u_fluxes(g, np.ones(8), np.zeros(8), ModelParams())


G2D = build_grid(2, 6, 5)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, G2D.shape, elements=st.floats(0, 5)),
       arrays(np.float64, G2D.shape, elements=st.floats(0.01, 3)),
       st.sampled_from([1.0, 1.5, 2.0, 3.0]), st.floats(0.0, 2.5))
def test_flux_part_conserves_mass(u, v, m, alpha):
    p = ModelParams(m=m, alpha=alpha, dimension=2, epsilon=0.1)
    rhs = u_rhs(G2D, u, v, p)
    F = u_fluxes(G2D, u, v, p)
    scale = sum(np.abs(c).sum() for c in F.components()) * G2D.cell_area + 1e-300
    assert abs(integrate(G2D, rhs)) <= 1e-12 * scale
    assert np.array_equal(rhs, divergence(F))
