import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from critnls.errors import ResolutionError
from critnls.functionals import (
    action_derivative,
    action_gap,
    evaluate,
    ray_check,
    resample,
    scale_S,
    scale_T,
    wave_report,
)
from critnls.profiles import Nonlinearity, W, w_power_integral
from critnls.radial import RealField, field, make_grid


@pytest.fixture(scope="module")
def grid():
    return make_grid(1024, 400.0)


@pytest.fixture(scope="module")
def gauss(grid):
    return field(grid, lambda r: np.exp(-r * r / 2))


def test_zero_field(grid, p4):
    rep = evaluate(RealField(grid, np.zeros(grid.n)), 0.01, 0.001, p4)
    for name in ("mass", "energy", "action", "K", "K0", "I"):
        assert getattr(rep, name) == 0.0


def test_action_of_W(grid, p4):
    rep = evaluate(field(grid, W), 0.0, 0.0, p4, decay=1.0, w_coeff=1.0)
    assert rep.mass == np.inf
    assert rep.action == pytest.approx(np.sqrt(3) * np.pi**2 / 4, abs=1e-8)
    assert abs(rep.K) <= 1e-8
    assert rep.grad2 == pytest.approx(rep.l6, abs=1e-8)


def test_gaussian_functionals(gauss, p4):
    # int exp(-r^2) = pi^(3/2); int |grad e^{-r^2/2}|^2 = 3/2 pi^(3/2)
    rep = evaluate(gauss, 0.0, 0.5, p4)
    assert rep.mass == pytest.approx(0.5 * np.pi**1.5, rel=1e-10)
    assert rep.grad2 == pytest.approx(1.5 * np.pi**1.5, rel=1e-8)
    assert rep.l6 == pytest.approx((np.pi / 3) ** 1.5, rel=1e-10)


def test_I_forms_agree(gauss, p4):
    rep = evaluate(gauss, 0.03, 0.2, p4)
    assert rep.I == pytest.approx(rep.I_expanded, rel=1e-12)


@given(mu=st.floats(0.7, 1.5))
@settings(max_examples=15, deadline=None)
def test_scalings_preserve_norms(gauss, p4, mu):
    base = evaluate(gauss, 0.0, 1.0, p4)
    t = evaluate(scale_T(mu, gauss, decay=None), 0.0, 1.0, p4)
    s = evaluate(scale_S(mu, gauss, decay=None), 0.0, 1.0, p4)
    assert t.mass == pytest.approx(base.mass, rel=1e-8)
    assert s.l6 == pytest.approx(base.l6, rel=1e-8)
    assert s.grad2 == pytest.approx(base.grad2, rel=1e-8)


@given(r=st.floats(0.0, 30.0))
@settings(max_examples=30, deadline=None)
def test_resample_gaussian(gauss, r):
    assert resample(gauss, [r], decay=None)[0] == pytest.approx(np.exp(-r * r / 2), abs=1e-9)


def test_scaling_resolution_guard(gauss):
    with pytest.raises(ResolutionError):
        scale_T(1e4, gauss)
    with pytest.raises(ValueError):
        scale_S(-1.0, gauss)


def test_scaling_derivatives_are_pohozaev_functionals(gauss, p4):
    eps, omega = 0.05, 0.3
    rep = evaluate(gauss, eps, omega, p4)
    dT = action_derivative(gauss, eps, omega, p4, "T", field_decay=None)
    dS = action_derivative(gauss, eps, omega, p4, "S", field_decay=None)
    assert dT == pytest.approx(rep.K, rel=1e-6)
    assert dS == pytest.approx(rep.K0, rel=1e-6)


@pytest.mark.parametrize("name", ["wave_0001", "wave_001", "wave_005"])
def test_pohozaev_on_waves(request, name):
    rep = wave_report(request.getfixturevalue(name))
    assert rep.pohozaev_residual_K <= 1e-8
    assert rep.pohozaev_residual_K0 <= 1e-8


def test_action_gap_zero_eps(p4):
    assert action_gap(0.0, p4) == (0.0, 0.0)


def test_action_gap_leading_order(p4, wave_0001, wave_001):
    gap, pred = action_gap(0.001, p4, wave=wave_0001)
    assert pred == pytest.approx(-0.1 * 0.001 * 4 * np.sqrt(3) * np.pi, rel=1e-12)
    assert abs(gap / pred - 1.0) <= 0.1
    gap2, pred2 = action_gap(0.01, p4, wave=wave_001)
    assert pred2 == pytest.approx(-0.0217656, abs=1e-6)
    assert gap2 < 0


def test_action_gap_coefficient_oracle():
    p = 3.2
    nl = Nonlinearity.pure_power(p)
    oracle = integrate.quad(lambda r: 4 * np.pi * r * r * W(r) ** (p + 1), 0, np.inf, epsrel=1e-12)[0]
    assert w_power_integral(p + 1) == pytest.approx(oracle, rel=1e-10)
    assert action_gap(0.0, nl) == (0.0, 0.0)


def test_action_gap_rejects_other_powers():
    with pytest.raises(ValueError):
        action_gap(0.01, Nonlinearity.pure_power(2.5))


def test_ray_maximum(wave_001):
    ok, rows = ray_check(wave_001)
    assert ok
    ks = [k for a, _, k in rows]
    # K changes sign once along the ray
    assert ks[0] > 0 and ks[-1] < 0


def test_scaled_wave(wave_005):
    d = wave_005.diagnostics
    assert d["method"] == "scaled" and d["mu"] == pytest.approx(4.0)
    assert d["pde_residual"] <= 1e-8
    assert d["newton_steps"] <= 5
    assert wave_005.eps == 0.05
