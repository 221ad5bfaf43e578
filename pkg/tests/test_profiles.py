import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from critnls.errors import AssumptionError
from critnls.profiles import (
    Nonlinearity,
    W,
    dW,
    identity_table,
    lambda1,
    lambda_W,
    lambda_W_derivative_form,
    omega1,
    pairing_LambdaW_fW,
    resonance_residual,
    w_power_integral,
)
from critnls.radial import field, make_grid


def pairing_oracle(p):
    """<Lambda W, W^p> by adaptive quadrature of the closed-form integrand."""
    f = lambda r: 4 * np.pi * r * r * lambda_W(r) * W(r) ** p
    val, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-13, limit=1000)
    return val


def test_lambda_w_forms_agree():
    r = np.linspace(0, 50, 2001)
    assert np.max(np.abs(lambda_W(r) - lambda_W_derivative_form(r))) < 1e-12


def test_w_derivative_matches_finite_difference():
    r = np.linspace(0.1, 20, 50)
    h = 1e-5
    fd = (W(r + h) - W(r - h)) / (2 * h)
    assert np.max(np.abs(fd - dW(r))) < 1e-9


@pytest.mark.parametrize("p", [2.5, 3.0, 4.0, 4.9, 6.0])
def test_pairing_closed_form(ref_grid, p):
    nl = Nonlinearity.pure_power(p)
    closed = (0.5 - 3.0 / (p + 1.0)) * w_power_integral(p + 1.0)
    assert closed == pytest.approx(pairing_oracle(p), rel=1e-10)
    assert abs(pairing_LambdaW_fW(nl, ref_grid) - closed) < 1e-8


def test_pairing_named_values(ref_grid):
    assert pairing_LambdaW_fW(Nonlinearity.pure_power(4), ref_grid) == pytest.approx(-2.17656, abs=1e-4)
    assert pairing_LambdaW_fW(Nonlinearity.pure_power(3), ref_grid) == pytest.approx(-12.821, abs=1e-3)
    assert abs(pairing_LambdaW_fW(Nonlinearity.pure_power(5), ref_grid)) < 1e-8


def test_lambda1_p4(ref_grid):
    nl = Nonlinearity.pure_power(4)
    assert lambda1(nl, ref_grid) == pytest.approx(np.sqrt(3) / 15, abs=1e-10)
    assert omega1(nl, ref_grid) == pytest.approx(1 / 75, abs=1e-10)


def test_lambda1_rejects_p5(ref_grid):
    with pytest.raises(AssumptionError):
        lambda1(Nonlinearity.pure_power(5), ref_grid)


def test_supercritical_defocusing_admitted(ref_grid):
    assert lambda1(Nonlinearity.pure_power(7, sign=-1.0), ref_grid) > 0


def test_custom_matches_pure(ref_grid):
    p = 4.0
    custom = Nonlinearity.custom(
        f=lambda q: np.abs(q) ** 3 * q,
        fprime=lambda q: 4 * np.abs(q) ** 3,
        F=lambda q: np.abs(q) ** 5 / 5,
        p1=p,
        p2=p,
    )
    assert pairing_LambdaW_fW(custom, ref_grid) == pytest.approx(
        pairing_LambdaW_fW(Nonlinearity.pure_power(p), ref_grid), abs=1e-12
    )


def test_resonance_residual_converges():
    vals = [resonance_residual(make_grid(n, 400.0)) for n in (512, 1024, 2048)]
    assert vals[0] <= 1e-6
    assert vals[0] / vals[1] > 8 and vals[1] / vals[2] > 8


def test_resonance_residual_of_w(ref_grid):
    # H W = -Lap W - 5 W^5 = -4 W^5, largest at the origin
    assert resonance_residual(ref_grid, field(ref_grid, W)) == pytest.approx(4.0, abs=1e-3)


def test_identity_table(ref_grid):
    for name, computed, expected, err in identity_table(ref_grid):
        assert err < 1e-6, name


@given(p=st.floats(2.2, 7.0).filter(lambda p: abs(p - 5) > 0.05))
@settings(max_examples=15, deadline=None)
def test_pairing_sign(ref_grid, p):
    val = pairing_LambdaW_fW(Nonlinearity.pure_power(p), ref_grid)
    assert np.sign(val) == np.sign(p - 5.0)
