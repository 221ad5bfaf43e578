import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.special import beta

from critnls.errors import GridMismatchError, SizingError
from critnls.profiles import W, lambda_W, psi, V
from critnls.radial import (
    ComplexField,
    Decay,
    RealField,
    Stretch,
    apply_laplacian,
    derivative_values,
    field,
    grid_for_decay,
    inner,
    load_field,
    lp_norm,
    make_grid,
    quad,
    save_field,
)


@pytest.fixture(scope="module")
def grid():
    return make_grid(1024, 400.0)


def w_power_oracle(k):
    """4 pi int_0^inf r^2 (1 + r^2/3)^(-k/2) dr by adaptive quadrature."""
    val, _ = integrate.quad(lambda r: 4 * np.pi * r * r * (1 + r * r / 3) ** (-k / 2), 0, np.inf,
                            epsabs=0, epsrel=1e-13, limit=500)
    return val


def test_grid_contract():
    g = make_grid(512, 200.0, "geometric")
    assert g.r[0] < 0.1
    assert g.r[-1] == 200.0
    assert np.all(np.diff(g.r) > 0)


@pytest.mark.parametrize("n, r_max", [(8, 200.0), (512, 10.0)])
def test_grid_sizing_error(n, r_max):
    with pytest.raises(SizingError):
        make_grid(n, r_max)


def test_algebraic_stretch_ends_at_r_max():
    g = make_grid(400, 300.0, Stretch("algebraic", 10.0))
    assert g.r[-1] == 300.0 and g.r[0] > 0


def test_gaussian_integral():
    g = make_grid(512, 200.0)
    val = quad(field(g, lambda r: np.exp(-r * r)))
    assert abs(val - np.pi**1.5) < 1e-10


@given(a=st.floats(0.2, 5.0))
@settings(max_examples=25, deadline=None)
def test_gaussian_family_integral(a):
    g = make_grid(512, 200.0)
    val = quad(field(g, lambda r: np.exp(-a * r * r)))
    assert val == pytest.approx((np.pi / a) ** 1.5, rel=1e-9)


@pytest.mark.parametrize("k", [5, 6])
def test_w_power_integrals(grid, k):
    closed = 2 * np.pi * 3 * np.sqrt(3) * beta(1.5, (k - 3) / 2)
    assert closed == pytest.approx(w_power_oracle(k), rel=1e-11)
    assert abs(quad(field(grid, W) ** k, decay=k) - closed) < 1e-8


def test_named_constants(grid):
    assert quad(field(grid, W) ** 6, decay=6) == pytest.approx(3 * np.sqrt(3) * np.pi**2 / 4, abs=1e-8)
    assert quad(field(grid, W) ** 5, decay=5) == pytest.approx(4 * np.sqrt(3) * np.pi, abs=1e-8)


def test_inner_products(grid):
    zero = RealField(grid, np.zeros(grid.n))
    assert inner(field(grid, W), zero) == 0.0
    lw = field(grid, lambda_W)
    w4 = field(grid, W) ** 4
    assert inner(lw, w4, decay=5) == pytest.approx(-0.4 * np.sqrt(3) * np.pi, abs=1e-8)
    assert inner(field(grid, V), field(grid, psi), decay=5) == pytest.approx(np.sqrt(4 * np.pi), abs=1e-8)


def test_grid_mismatch(grid):
    other = make_grid(512, 400.0)
    with pytest.raises(GridMismatchError):
        inner(field(grid, W), field(other, W))


def test_laplacian_constant(grid):
    one = RealField(grid, np.ones(grid.n))
    lap = apply_laplacian(one, Decay("power", 0.0))
    assert np.max(np.abs(lap.values[:-2])) < 1e-9


def test_laplacian_of_W(grid):
    w = field(grid, W)
    lap = apply_laplacian(w)
    assert np.max(np.abs(lap.values + w.values**5)) < 1e-7


def test_laplacian_gaussian_converges():
    errs = []
    for n in (256, 512, 1024):
        g = make_grid(n, 60.0)
        r = g.r
        lap = apply_laplacian(field(g, lambda r: np.exp(-r * r)), Decay("zero"))
        errs.append(np.max(np.abs(lap.values - (4 * r * r - 6) * np.exp(-r * r))))
    assert errs[-1] < 1e-8
    # 4th order: each halving of h gains about 16
    assert errs[0] / errs[1] > 10 and errs[1] / errs[2] > 10


def test_derivative_of_gaussian(grid):
    r = grid.r
    d = derivative_values(grid, np.exp(-r * r))
    assert np.max(np.abs(d + 2 * r * np.exp(-r * r))) < 1e-8


def test_norms(grid):
    zero = RealField(grid, np.zeros(grid.n))
    assert lp_norm(zero, 3) == 0.0
    w = field(grid, W)
    assert lp_norm(w, 6, decay=1.0) == pytest.approx((3 * np.sqrt(3) * np.pi**2 / 4) ** (1 / 6), rel=1e-9)
    assert lp_norm(w, np.inf) == pytest.approx(1.0, abs=1e-8)


def test_field_arithmetic(grid):
    f = field(grid, W)
    z = f * 1j
    assert isinstance(z, ComplexField)
    assert np.allclose((f + f - 2 * f).values, 0)
    with pytest.raises(ValueError):
        RealField(grid, np.full(grid.n, np.nan))


def test_field_roundtrip(tmp_path, grid):
    f = field(grid, W)
    save_field(f, tmp_path / "w.csv")
    g = load_field(tmp_path / "w.csv")
    assert g.grid == grid
    assert np.array_equal(g.values, f.values)
    z = ComplexField(grid, f.values * (1 + 2j))
    save_field(z, tmp_path / "z.csv")
    assert np.array_equal(load_field(tmp_path / "z.csv").values, z.values)


def test_grid_for_decay_reaches_margin():
    g = grid_for_decay(100.0, margin=60.0)
    assert g.r_max == 6000.0
    assert g.h == pytest.approx(0.01, rel=0.01)


@given(c=st.floats(-3, 3), d=st.floats(-3, 3))
@settings(max_examples=25, deadline=None)
def test_quad_is_linear(grid, c, d):
    f = field(grid, lambda r: np.exp(-r * r))
    g = field(grid, lambda r: np.exp(-r))
    assert quad(c * f + d * g) == pytest.approx(c * quad(f) + d * quad(g), abs=1e-12 * (1 + abs(c) + abs(d)) * 50)
