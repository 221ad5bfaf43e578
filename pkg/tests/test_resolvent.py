import numpy as np
import pytest
from hypothesis import HealthCheck, example, given, settings, strategies as st
from scipy import integrate

from critnls.cli import _probe_data, _probe_grid
from critnls.profiles import Nonlinearity
from critnls.radial import RealField, field, make_grid
from critnls.resolvent import (
    ResolventWorkspace,
    apply_R0,
    forcing_gap,
    free_operator_values,
    loglog_slope,
    orth_pairing,
    r0_norm_ratio,
    resonance_limit,
    singularity_probe,
    solve_full,
)


@pytest.fixture(scope="module")
def grid():
    return make_grid(1024, 400.0)


def r0_oracle(lam, f, r):
    """Radial Yukawa convolution by adaptive quadrature."""
    inner_ = integrate.quad(lambda s: s * f(s) * np.sinh(lam * s) * np.exp(-lam * r), 0, r,
                            epsabs=1e-15, epsrel=1e-12)[0]
    outer = integrate.quad(lambda s: s * f(s) * np.exp(-lam * s), r, np.inf, epsabs=1e-15, epsrel=1e-12)[0]
    return (inner_ + np.sinh(lam * r) * outer) / (lam * r)


def test_r0_of_zero(grid):
    out = apply_R0(0.1, RealField(grid, np.zeros(grid.n)))
    assert np.all(out.values == 0)


def test_r0_rejects_nonpositive(grid):
    with pytest.raises(ValueError):
        apply_R0(0.0, field(grid, np.ones))


@pytest.mark.parametrize("lam", [0.05, 0.5, 3.0])
def test_r0_matches_quadrature(grid, lam):
    g = lambda r: np.exp(-r * r)
    u = apply_R0(lam, field(grid, g))
    for r in (0.05, 0.7, 2.0, 9.0, 40.0):
        i = np.searchsorted(grid.r, r)
        assert u.values[i] == pytest.approx(r0_oracle(lam, g, grid.r[i]), rel=1e-7, abs=1e-13)


def test_r0_inverts_free_operator(grid):
    lam = 0.1
    f = field(grid, lambda r: np.exp(-r * r))
    u = apply_R0(lam, f)
    back = free_operator_values(grid, lam, u.values)
    assert np.max(np.abs(back - f.values)[:-2]) < 1e-7


def test_r0_manufactured_converges():
    lam = 0.3
    errs = []
    for n in (512, 1024, 2048):
        r = make_grid(n, 400.0).r
        f = RealField(make_grid(n, 400.0), (6 - 4 * r * r + lam**2) * np.exp(-r * r))
        errs.append(np.max(np.abs(apply_R0(lam, f).values - np.exp(-r * r))))
    assert errs[-1] < 1e-9
    assert errs[0] / errs[1] > 10 and errs[1] / errs[2] > 10


def test_full_resolvent_residual(grid):
    lam = 0.05
    ws = ResolventWorkspace(grid, lam)
    F = field(grid, lambda r: np.exp(-r * r))
    eta = solve_full(lam, F, ws)
    assert ws.residual(eta.values, F.values) < 1e-10


def test_resonance_limit_and_rate():
    lams = np.geomspace(1e-3, 1e-1, 7)
    g = _probe_grid(lams)
    vals = resonance_limit(g, lams)
    target = 2 * np.sqrt(3 * np.pi)
    assert abs(loglog_slope(lams, vals - target) - 1.0) <= 0.2
    assert abs(vals[0] - target) < abs(vals[-1] - target)


def test_forcing_gap_vanishes_linearly():
    lams = np.geomspace(1e-3, 1e-1, 7)
    gaps = np.abs(forcing_gap(_probe_grid(lams), lams, Nonlinearity.pure_power(4)))
    assert np.all(np.diff(gaps) > 0)
    assert abs(loglog_slope(lams, gaps) - 1.0) <= 0.2


PROBE_LAMS = [0.02 * 2.0**-k for k in range(7)]


@pytest.fixture(scope="module")
def probe_grid():
    return _probe_grid(PROBE_LAMS)


@pytest.mark.parametrize("kind", ["gauss", "sech", "bump", "random", "psi"])
def test_probe_generic_slope(probe_grid, kind):
    amp = singularity_probe(PROBE_LAMS, _probe_data(kind, probe_grid, seed=0))
    assert abs(loglog_slope(*zip(*amp)) + 1.0) <= 0.15


@given(seed=st.integers(0, 2**31 - 1))
@example(seed=6874)
@example(seed=72594093)
@settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
def test_probe_random_singular_direction(probe_grid, seed):
    # the 1/lam growth lives in the psi direction: removing it leaves a bounded
    # amplification, and the generic/orthogonalized ratio grows like 1/lam
    f = _probe_data("random", probe_grid, seed=seed)
    gen = np.array([a for _, a in singularity_probe(PROBE_LAMS, f)])
    orth = np.array([a for _, a in singularity_probe(PROBE_LAMS, f, orthogonalize=True)])
    assert orth.max() / orth.min() <= 1.5
    q = gen / orth
    # lam shrinks 4x over the last three values
    assert q[-1] / q[-3] >= 2.0


@pytest.mark.parametrize("kind", ["gauss", "sech", "bump", "random"])
def test_probe_orthogonalized_slope(probe_grid, kind):
    amp = singularity_probe(PROBE_LAMS, _probe_data(kind, probe_grid, seed=0), orthogonalize=True)
    assert abs(loglog_slope(*zip(*amp))) <= 0.15


def test_psi_direction_is_most_amplified(probe_grid):
    lam = PROBE_LAMS[-1]
    a_psi = singularity_probe([lam], _probe_data("psi", probe_grid))[0][1]
    battery = [_probe_data(k, probe_grid) for k in ("gauss", "sech", "bump")]
    battery += [_probe_data("random", probe_grid, seed=s) for s in range(20)]
    for f in battery:
        assert singularity_probe([lam], f)[0][1] <= a_psi * 1.01


def test_orth_pairing_linear(grid):
    lam = 0.1
    ws = ResolventWorkspace(grid, lam)
    f = field(grid, lambda r: np.exp(-r * r))
    g = field(grid, lambda r: np.exp(-r))
    assert orth_pairing(lam, 2 * f - g, ws) == pytest.approx(
        2 * orth_pairing(lam, f, ws) - orth_pairing(lam, g, ws), rel=1e-12
    )


def test_young_bound_sample(grid):
    # R0 maps L^2 into L^inf with norm (8 pi lam)^(-1/2)
    lam = 0.5
    f = field(grid, lambda r: np.exp(-r * r))
    assert r0_norm_ratio(grid, lam, f, 2, np.inf) <= (8 * np.pi * lam) ** -0.5
