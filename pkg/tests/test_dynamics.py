import numpy as np
import pytest

from critnls.cli import conservation_run
from critnls.dynamics import (
    ClassifyConfig,
    EvolutionConfig,
    _monotone,
    absorbing_profile,
    choose_dt,
    classify,
    coherence_run,
    evolve,
    hypothesis_check,
    initial_state,
    observables,
    phase_rate,
    step,
    track_virial,
)
from critnls.errors import HypothesisError, StabilityError
from critnls.radial import ComplexField, make_grid


@pytest.fixture(scope="module")
def grid():
    return make_grid(1500, 200.0)


def gaussian(grid):
    return ComplexField(grid, np.exp(-grid.r**2 / 2))


def free_gaussian(r, t):
    s = 1.0 + 2.0j * t
    return s**-1.5 * np.exp(-r**2 / (2 * s))


def test_zero_stays_zero(grid):
    cfg = EvolutionConfig(eps=0.05, omega=0.01)
    st = evolve(initial_state(ComplexField(grid, np.zeros(grid.n)), cfg), 0.1, cfg).state
    assert np.all(st.u.values == 0)


@pytest.mark.parametrize("scheme, dt, tol", [("strang", 1e-3, 1e-6), ("yoshida4", 1e-2, 1e-6)])
def test_free_gaussian(grid, scheme, dt, tol):
    cfg = EvolutionConfig(nonlinear=False, scheme=scheme, dt=dt, adaptive=False)
    st = evolve(initial_state(gaussian(grid), cfg), 1.0, cfg).state
    assert st.t == pytest.approx(1.0)
    assert np.max(np.abs(st.u.values - free_gaussian(grid.r, 1.0))) <= tol


def test_strang_is_second_order(grid):
    errs = []
    for dt in (4e-2, 2e-2):
        cfg = EvolutionConfig(nonlinear=False, dt=dt, adaptive=False)
        st = evolve(initial_state(gaussian(grid), cfg), 0.4, cfg).state
        errs.append(np.max(np.abs(st.u.values - free_gaussian(grid.r, 0.4))))
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_virial_of_real_fields(grid):
    u = gaussian(grid)
    assert track_virial(u) == 0.0
    assert abs(track_virial(u * np.exp(0.7j))) <= 1e-15


def test_virial_sign_of_outgoing_chirp(grid):
    u = ComplexField(grid, np.exp(-grid.r**2 / 2 + 0.3j * grid.r**2))
    assert track_virial(u) > 0


def test_stability_guard(grid):
    cfg = EvolutionConfig(eps=0.05, dt=0.5, adaptive=False)
    st = initial_state(gaussian(grid) * 3.0, cfg)
    with pytest.raises(StabilityError):
        step(st, cfg)


def test_adaptive_dt_is_quantized(grid):
    cfg = EvolutionConfig(eps=0.05, dt=1e-3, cfl=0.05)
    st = initial_state(gaussian(grid) * 2.0, cfg)
    dt = choose_dt(st, cfg)
    k = np.log2(dt / cfg.dt)
    assert k == np.round(k) and dt <= 0.05 / (16 + 0.05 * 8 + 1)


def test_config_validation():
    with pytest.raises(ValueError):
        EvolutionConfig(scheme="yoshida4", absorb=True)


def test_absorbing_profile(grid):
    g = absorbing_profile(grid, 0.2, 1.0)
    assert np.all(g >= 0)
    inner = grid.s < 0.8 * grid.s[-1]
    assert np.all(g[inner] == 0) and g[-1] > 0


def test_absorbed_mass_is_accounted(grid):
    # an outgoing packet leaves through the layer; the mass balance closes at O(dt^2)
    u0 = ComplexField(grid, np.exp(-grid.r**2 / 50 + 2j * grid.r))
    errs = []
    for dt in (0.05, 0.025):
        cfg = EvolutionConfig(nonlinear=False, dt=dt, adaptive=False, absorb=True, drift_budget=np.inf)
        res = evolve(initial_state(u0, cfg), 60.0, cfg)
        assert res.state.absorbed > 0.9 * res.state.initial["mass"]
        errs.append(res.max_drift["mass"])
    assert errs[1] <= 5e-3
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_observables_of_gaussian(grid):
    obs = observables(gaussian(grid), EvolutionConfig(nonlinear=False))
    assert obs["mass"] == pytest.approx(0.5 * np.pi**1.5, rel=1e-10)
    assert obs["K"] == pytest.approx(1.5 * np.pi**1.5, rel=1e-6)


def test_phase_rate():
    t = np.linspace(0, 5, 40)
    assert phase_rate(t, 0.3 * np.exp(2.5j * t)) == pytest.approx(2.5, rel=1e-12)


def test_conservation_and_virial(wave_005):
    out = conservation_run(wave_005)
    assert out["mass"] <= 1e-6
    assert out["action"] <= 1e-6
    assert out["virial"] <= 1e-3
    assert len(out["virial_times"]) == 10


def test_coherence(wave_001):
    out = coherence_run(wave_001, 1.0, samples=10)
    assert out["trusted"]
    assert out["max_deviation"] <= 1e-4
    assert out["phase_rate_error"] <= 1e-2


def test_hypothesis_refused_at_ground_state(wave_005):
    u0 = ComplexField(wave_005.grid, wave_005.Q.values)
    with pytest.raises(HypothesisError):
        classify(u0, wave_005.eps, wave_005.omega, wave_005.nl, wave=wave_005)


def test_hypothesis_signs(wave_005):
    m = observables(wave_005.Q, EvolutionConfig(eps=0.05, p=4, omega=wave_005.omega))["action"]
    lo = hypothesis_check(wave_005.Q * 0.5, 0.05, wave_005.omega, wave_005.nl, m)
    hi = hypothesis_check(wave_005.Q * 1.5, 0.05, wave_005.omega, wave_005.nl, m)
    assert lo["K"] > 0 and hi["K"] < 0
    assert lo["S"] < m and hi["S"] < m


def test_classify_needs_reference(wave_005):
    with pytest.raises(ValueError):
        classify(wave_005.Q * 0.5, 0.05, wave_005.omega, wave_005.nl)


def test_monotone_ordering():
    ok = [{"a": 0.3, "verdict": "scatter-like"}, {"a": 1.2, "verdict": "blowup-like"},
          {"a": 1.0, "verdict": "hypothesis-not-met"}]
    bad = [{"a": 0.3, "verdict": "blowup-like"}, {"a": 0.8, "verdict": "scatter-like"}]
    assert _monotone(ok) and not _monotone(bad)


def test_classify_config_defaults():
    c = ClassifyConfig()
    assert c.blowup_growth == 1e3 and c.l6_decay == 10.0
