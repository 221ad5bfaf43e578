"""
Radial time evolution of

    i u_t = -Lap u - |u|^4 u - eps f(u)

by Strang splitting.  The nonlinear substep is an exact phase rotation
(``|u|`` is constant along it); the linear substep advances ``v = r u`` under
``v_t = i v_rr`` with Crank-Nicolson on the package's 4th-order radial
stencil.  An optional smooth absorbing potential ``-i gamma(r) u`` damps
outgoing radiation in the outer part of the mapped domain.

Classification of data below the ground-state action follows the usual
dichotomy: ``K(u0) >= 0`` should disperse, ``K(u0) < 0`` should concentrate.
Both outcomes are only *indicated* here, through L^6 decay and growth of
``sup |u_r|``.
"""

from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field, replace

import numpy as np
from scipy.linalg import lapack

from .errors import HypothesisError, StabilityError
from .functionals import _parts, resample
from .profiles import Nonlinearity
from .radial import (
    ComplexField,
    Decay,
    Stretch,
    banded_matvec,
    d2_bands,
    derivative_values,
    make_grid,
)

log = logging.getLogger(__name__)

_KL = _KU = 2
_Y1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_Y0 = 1.0 - 2.0 * _Y1
HISTORY_FIELDS = ("t", "mass", "energy", "K", "virial", "supgrad", "L6norm")


@dataclass(frozen=True)
class EvolutionConfig:
    """Parameters of one evolution.

    ``dt`` is the base step; adaptive steps are ``dt * 2**k`` bounded by
    ``cfl / sup(|u|^4 + eps |u|^(p-1) + 1)`` and by ``max(dt, dt_growth * t)``.
    ``nonlinear=False`` evolves the free equation.
    """

    eps: float = 0.0
    p: float = 4.0
    omega: float = 0.0
    nonlinear: bool = True
    scheme: str = "strang"
    dt: float = 1e-3
    cfl: float = 0.05
    adaptive: bool = True
    dt_growth: float = 0.0
    stability_limit: float = 1.0
    absorb: bool = False
    absorb_fraction: float = 0.2
    absorb_strength: float = 1.0
    closure: str = "zero"
    closure_value: float = 0.0
    drift_budget: float = 1e-6
    sample_every: int = 10
    history_size: int = 200_000

    def __post_init__(self):
        if self.scheme not in ("strang", "yoshida4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "yoshida4" and self.absorb:
            raise ValueError("yoshida4 takes negative substeps; disable the absorbing layer")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def nl(self):
        return Nonlinearity.pure_power(self.p)

    def decay(self):
        if self.closure == "zero":
            return Decay("zero", 0.0)
        if self.closure == "robin":
            return Decay("robin", self.closure_value)
        return Decay("power", self.closure_value)

    def to_dict(self):
        return asdict(self)


@dataclass
class EvolutionState:
    """Solution snapshot plus its sample history (single owner)."""

    u: ComplexField
    t: float = 0.0
    dt: float = 1e-3
    history: deque = dc_field(default_factory=deque)
    level: int = 0
    absorbed: float = 0.0
    initial: dict = dc_field(default_factory=dict)
    trusted: bool = True
    steps: int = 0

    @property
    def grid(self):
        return self.u.grid

    def history_array(self):
        return np.array(list(self.history), dtype=float).reshape(-1, len(HISTORY_FIELDS))


def initial_state(u0, cfg, level=0):
    """State at ``t = 0`` with its first history sample."""
    u0 = ComplexField(u0.grid, np.asarray(u0.values, dtype=complex))
    state = EvolutionState(
        u=u0, dt=cfg.dt, history=deque(maxlen=cfg.history_size), level=level
    )
    obs = observables(u0, cfg)
    state.initial = obs
    state.history.append(tuple(obs[k] if k != "t" else 0.0 for k in HISTORY_FIELDS))
    return state


# ---------------------------------------------------------------------------
# observables


def track_virial(state_or_u):
    """Radial momentum functional ``4 pi int r^3 Im(conj(u) u_r) dr``."""
    u = state_or_u.u if isinstance(state_or_u, EvolutionState) else state_or_u
    grid = u.grid
    du = derivative_values(grid, u.values)
    return float(grid.weights @ (grid.r * np.imag(np.conj(u.values) * du)))


def kinetic(u, decay):
    """``int |grad u|^2`` as ``-Re <u, Lap_h u>``, the form the propagator conserves."""
    grid = u.grid
    lap = banded_matvec(d2_bands(grid, decay), grid.r * u.values) / grid.r
    return float(-np.real(grid.weights @ (np.conj(u.values) * lap)))


def observables(u, cfg):
    """Mass, energy, ``K``, momentum, ``sup |u_r|`` and ``||u||_6``."""
    _, l2, l6, F, uf = _parts(u, cfg.nl if cfg.nonlinear else None)
    grad2 = kinetic(u, cfg.decay())
    mass = 0.5 * l2
    if cfg.nonlinear:
        energy = 0.5 * grad2 - l6 / 6.0 - cfg.eps * F
        K = grad2 - l6 + cfg.eps * (3.0 * F - 1.5 * uf)
    else:
        energy = 0.5 * grad2
        K = grad2
    du = derivative_values(u.grid, u.values)
    return {
        "t": 0.0,
        "mass": float(mass),
        "energy": float(energy),
        "action": float(energy + cfg.omega * mass),
        "K": float(K),
        "virial": track_virial(u),
        "supgrad": float(np.max(np.abs(du))),
        "L6norm": float(max(l6, 0.0) ** (1.0 / 6.0)),
    }


# ---------------------------------------------------------------------------
# propagators


def absorbing_profile(grid, fraction=0.2, strength=1.0):
    """``gamma`` vanishing on the inner ``1 - fraction`` of the mapped coordinate, quadratic ramp after."""
    s = grid.s
    s0 = (1.0 - fraction) * s[-1]
    x = np.clip((s - s0) / (s[-1] - s0), 0.0, None)
    return strength * x * x


class LinearPropagator:
    """Crank-Nicolson for ``v_t = i v_rr - gamma v`` with cached factorizations."""

    def __init__(self, grid, decay, gamma=None, cache_size=16):
        self.grid = grid
        self.A = d2_bands(grid, decay).astype(complex)
        self.gamma = np.zeros(grid.n) if gamma is None else np.asarray(gamma, dtype=float)
        self._gen = 1j * self.A
        self._gen[_KU] -= self.gamma
        self._cache = {}
        self._size = cache_size

    def _factor(self, dt):
        lu = self._cache.get(dt)
        if lu is None:
            ab = -0.5 * dt * self._gen
            ab[_KU] += 1.0
            work = np.zeros((2 * _KL + _KU + 1, self.grid.n), dtype=complex)
            work[_KL:] = ab
            lu, piv, info = lapack.zgbtrf(work, _KL, _KU)
            if info != 0:
                raise StabilityError(f"Crank-Nicolson matrix singular at dt={dt:g}")
            if len(self._cache) >= self._size:
                self._cache.pop(next(iter(self._cache)))
            lu = self._cache[dt] = (lu, piv)
        return lu

    def __call__(self, u_values, dt):
        r = self.grid.r
        v = r * u_values
        rhs = v + 0.5 * dt * banded_matvec(self._gen, v)
        lu, piv = self._factor(dt)
        v, info = lapack.zgbtrs(lu, _KL, _KU, rhs, piv)
        if info != 0:
            raise StabilityError(f"Crank-Nicolson solve failed with info={info}")
        return v / r


def _phase_rate_field(u_values, cfg):
    a = np.abs(u_values)
    if not cfg.nonlinear:
        return np.zeros_like(a)
    rate = a**4
    if cfg.eps:
        rate = rate + cfg.eps * a ** (cfg.p - 1.0)
    return rate


def _nonlinear(u_values, tau, cfg):
    if not cfg.nonlinear:
        return u_values
    return u_values * np.exp(1j * tau * _phase_rate_field(u_values, cfg))


def stability_bound(u_values, cfg):
    """``1 / sup(|u|^4 + eps |u|^(p-1) + 1)``."""
    return 1.0 / (float(np.max(_phase_rate_field(u_values, cfg))) + 1.0)


_PROPAGATORS = {}


def _propagator(grid, cfg):
    key = (grid, cfg.closure, cfg.closure_value, cfg.absorb, cfg.absorb_fraction, cfg.absorb_strength)
    prop = _PROPAGATORS.get(key)
    if prop is None:
        gamma = absorbing_profile(grid, cfg.absorb_fraction, cfg.absorb_strength) if cfg.absorb else None
        if len(_PROPAGATORS) > 8:
            _PROPAGATORS.clear()
        prop = _PROPAGATORS[key] = LinearPropagator(grid, cfg.decay(), gamma)
    return prop


def _strang(u, dt, prop, cfg):
    u = _nonlinear(u, 0.5 * dt, cfg)
    u = prop(u, dt)
    return _nonlinear(u, 0.5 * dt, cfg)


def _absorption_rate(u, prop):
    if not np.any(prop.gamma):
        return 0.0
    # dM/dt = -int gamma |u|^2 for M = 1/2 int |u|^2
    return float(prop.grid.weights @ (prop.gamma * np.abs(u) ** 2))


def step(state, cfg):
    """One step of size ``state.dt``; returns the advanced state.

    Raises :class:`StabilityError` when ``dt`` exceeds
    ``stability_limit / sup(|u|^4 + eps |u|^(p-1) + 1)``.
    """
    u = state.u.values
    dt = state.dt
    bound = cfg.stability_limit * stability_bound(u, cfg)
    weight = abs(_Y0) if cfg.scheme == "yoshida4" else 1.0
    if dt * weight > bound:
        raise StabilityError(f"dt = {dt:g} exceeds the stability bound {bound / weight:g} at t = {state.t:g}")
    prop = _propagator(state.grid, cfg)
    before = _absorption_rate(u, prop)
    if cfg.scheme == "strang":
        new = _strang(u, dt, prop, cfg)
    else:
        new = u
        for w in (_Y1, _Y0, _Y1):
            new = _strang(new, w * dt, prop, cfg)
    absorbed = state.absorbed + 0.5 * dt * (before + _absorption_rate(new, prop))
    if not np.all(np.isfinite(new)):
        raise StabilityError(f"non-finite solution at t = {state.t + dt:g}")
    return replace(
        state, u=ComplexField(state.grid, new), t=state.t + dt, absorbed=absorbed, steps=state.steps + 1
    )


def choose_dt(state, cfg):
    """Largest ``cfg.dt * 2**k`` within the accuracy bound and the growth cap."""
    if not cfg.adaptive:
        return cfg.dt
    limit = cfg.cfl * stability_bound(state.u.values, cfg)
    cap = max(cfg.dt, cfg.dt_growth * state.t) if cfg.dt_growth else cfg.dt
    limit = min(limit, cap)
    k = np.floor(np.log2(limit / cfg.dt))
    return float(cfg.dt * 2.0**k)


# ---------------------------------------------------------------------------
# driver


@dataclass
class EvolutionResult:
    state: EvolutionState
    reason: str
    max_drift: dict

    def history(self):
        return self.state.history_array()


def _drifts(state, obs):
    ini = state.initial
    mass_ref = abs(ini["mass"]) or 1.0
    act_ref = max(abs(ini["action"]), abs(ini["energy"]), 1e-300)
    return {
        "mass": abs(obs["mass"] + state.absorbed - ini["mass"]) / mass_ref,
        "action": abs(obs["action"] - ini["action"]) / act_ref,
    }


def evolve(state, t_end, cfg, stop=None, check_drift=True):
    """Advance to ``t_end`` (or until ``stop(state, obs)`` is true).

    Samples are appended every ``cfg.sample_every`` steps and at the end.
    With ``check_drift`` the run halts as untrusted once the mass balance
    (absorbed mass included) or, without absorption, the action drifts
    beyond ``cfg.drift_budget``.
    """
    reason = "horizon"
    worst = {"mass": 0.0, "action": 0.0}
    while state.t < t_end * (1.0 - 1e-14):
        state.dt = choose_dt(state, cfg)
        if state.t + state.dt > t_end:
            state.dt = t_end - state.t
        state = step(state, cfg)
        last = state.t >= t_end * (1.0 - 1e-14)
        if state.steps % cfg.sample_every and not last:
            continue
        obs = observables(state.u, cfg)
        state.history.append(tuple(obs[k] if k != "t" else state.t for k in HISTORY_FIELDS))
        d = _drifts(state, obs)
        worst = {k: max(worst[k], d[k]) for k in worst}
        budget_keys = ("mass",) if cfg.absorb else ("mass", "action")
        if check_drift and any(d[k] > cfg.drift_budget for k in budget_keys):
            state.trusted = False
            reason = "drift"
            break
        if stop is not None and stop(state, obs):
            reason = "stop"
            break
    return EvolutionResult(state=state, reason=reason, max_drift=worst)


def phase_rate(times, origin_values):
    """Least-squares slope of the unwrapped phase of ``u`` at the innermost node."""
    phase = np.unwrap(np.angle(np.asarray(origin_values)))
    return float(np.polyfit(np.asarray(times, dtype=float), phase, 1)[0])


def coherence_run(wave, t_end=5.0, cfg=None, samples=50):
    """Evolve ``u0 = Q`` and report ``max_t || |u(t)| - Q ||_inf`` and the phase rate."""
    cfg = cfg or EvolutionConfig(
        eps=wave.eps, p=wave.nl.p, omega=wave.omega, scheme="yoshida4", dt=2.5e-3,
        adaptive=False, closure="robin", closure_value=wave.lam, drift_budget=1e-6, sample_every=100,
    )
    state = initial_state(wave.Q, cfg)
    q = wave.Q.values
    times, origin, dev = [0.0], [complex(state.u.values[0])], 0.0
    for t in np.linspace(0.0, t_end, samples + 1)[1:]:
        state = evolve(state, t, cfg).state
        times.append(state.t)
        origin.append(complex(state.u.values[0]))
        dev = max(dev, float(np.max(np.abs(np.abs(state.u.values) - q))))
    rate = phase_rate(times, origin)
    return {
        "max_deviation": dev,
        "phase_rate": rate,
        "omega": wave.omega,
        "phase_rate_error": abs(rate - wave.omega) / wave.omega,
        "trusted": state.trusted,
    }


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ClassifyConfig:
    """Classification thresholds and resolution controls."""

    horizon: float = 2e5
    blowup_growth: float = 1e3
    l6_decay: float = 10.0
    core_refine: float = 16.0
    refine_factor: float = 4.0
    h: float = 0.01
    dt: float = 1e-3
    cfl: float = 0.05
    dt_growth: float = 0.02
    dt_floor: float = 1e-14
    drift_budget: float = 1e-2
    hypothesis_tol: float = 1e-8
    sample_every: int = 5

    def to_dict(self):
        return asdict(self)


@dataclass
class DichotomyVerdict:
    verdict: str
    evidence: dict
    hypothesis: dict

    def as_row(self):
        row = {"verdict": self.verdict}
        row.update({f"hyp_{k}": v for k, v in self.hypothesis.items()})
        row.update({f"ev_{k}": v for k, v in self.evidence.items()})
        return row


def evolution_grid(grid, core_refine=1.0, h=0.005):
    """Geometric grid over ``(0, grid.r_max]`` with a core spacing ``core_refine`` times finer."""
    scale = grid.stretch.scale / core_refine
    s_max = Stretch("geometric", scale).inverse(grid.r_max)
    n = int(np.ceil(s_max / h))
    return make_grid(n, grid.r_max, Stretch("geometric", scale))


def transfer(u, grid):
    """``u`` on ``grid`` (identity if already there)."""
    if u.grid == grid:
        return ComplexField(grid, np.asarray(u.values, dtype=complex))
    return ComplexField(grid, resample(u, grid.r, decay=None).astype(complex))


def _run(u0, eps, omega, nl, ccfg, mode, cfl, grid):
    """One classification run; scatter runs absorb radiation, blow-up runs are closed."""
    scatter = mode == "scatter"
    cfg = EvolutionConfig(
        eps=eps, p=nl.p, omega=omega, dt=ccfg.dt, cfl=cfl,
        dt_growth=ccfg.dt_growth if scatter else 0.0,
        absorb=scatter, drift_budget=ccfg.drift_budget, sample_every=ccfg.sample_every,
    )
    state = initial_state(transfer(u0, grid), cfg)
    g0, l0 = state.initial["supgrad"], state.initial["L6norm"]
    flags = {"K_negative": False}

    def stop(st, obs):
        if obs["K"] < 0:
            flags["K_negative"] = True
        if scatter:
            return flags["K_negative"] or l0 / max(obs["L6norm"], 1e-300) >= ccfg.l6_decay
        return st.dt <= ccfg.dt_floor or obs["supgrad"] / g0 >= ccfg.blowup_growth

    out = {"K_negative": False, "mass_drift": np.nan, "action_drift": np.nan}
    try:
        res = evolve(state, ccfg.horizon, cfg, stop=stop)
    except StabilityError as exc:
        log.warning("evolution stopped: %s", exc)
        out.update(reason="unstable", growth=np.nan, l6_factor=np.nan, t=np.nan, trusted=False, min_dt=np.nan)
        return out
    hist = res.history()
    out.update(
        reason=res.reason,
        growth=float(np.max(hist[:, 5]) / g0),
        l6_factor=float(l0 / max(hist[-1, 6], 1e-300)),
        t=float(res.state.t),
        trusted=res.state.trusted,
        mass_drift=res.max_drift["mass"],
        action_drift=res.max_drift["action"],
        K_negative=flags["K_negative"],
        min_dt=float(res.state.dt),
    )
    return out


def hypothesis_check(u0, eps, omega, nl, m, ccfg=None):
    """``S(u0)``, ``m`` and ``K(u0)``; raises :class:`HypothesisError` unless ``S(u0) < m``."""
    ccfg = ccfg or ClassifyConfig()
    if not (nl.is_pure and 3 < nl.p < 5):
        raise ValueError("classification needs a pure power with 3 < p < 5")
    cfg = EvolutionConfig(eps=eps, p=nl.p, omega=omega)
    obs = observables(u0, cfg)
    S, K = obs["action"], obs["K"]
    hyp = {"S": S, "m": float(m), "K": K}
    if not S < m - ccfg.hypothesis_tol * abs(m):
        raise HypothesisError(f"S(u0) = {S:.12g} is not below m = {m:.12g}; no verdict")
    scale = obs["energy"] and max(abs(obs["energy"]), 1.0)
    if abs(K) <= ccfg.hypothesis_tol * scale:
        raise HypothesisError(f"K(u0) = {K:.3e} has no resolvable sign")
    return hyp


def classify(u0, eps, omega, nl, cfg=None, m=None, wave=None):
    """Scatter-like / blowup-like / inconclusive verdict for ``u0`` below the ground-state action.

    ``m`` is the ground-state action; when omitted it is evaluated on ``wave``
    with the same quadrature as ``u0``.
    """
    ccfg = cfg or ClassifyConfig()
    if m is None:
        if wave is None:
            raise ValueError("need the ground-state action m or the wave")
        m = observables(wave.Q, EvolutionConfig(eps=eps, p=nl.p, omega=omega))["action"]
    hyp = hypothesis_check(u0, eps, omega, nl, m, ccfg)
    grid = evolution_grid(u0.grid, ccfg.core_refine, ccfg.h)
    if hyp["K"] > 0:
        run = _run(u0, eps, omega, nl, ccfg, "scatter", ccfg.cfl, grid)
        ok = run["trusted"] and not run["K_negative"] and run["l6_factor"] >= ccfg.l6_decay
        evidence = {
            "l6_decay": run["l6_factor"], "supgrad_growth": run["growth"],
            "horizon": run["t"], "mass_drift": run["mass_drift"], "action_drift": run["action_drift"],
            "K_stayed_nonnegative": not run["K_negative"],
            "stop": run["reason"],
        }
        return DichotomyVerdict("scatter-like" if ok else "inconclusive", evidence, hyp)

    runs = [_run(u0, eps, omega, nl, ccfg, "blowup", ccfg.cfl, grid)]
    if runs[0]["growth"] >= ccfg.blowup_growth:
        runs.append(_run(u0, eps, omega, nl, ccfg, "blowup", ccfg.cfl / 2.0, grid))
        fine = evolution_grid(u0.grid, ccfg.core_refine * ccfg.refine_factor, ccfg.h)
        runs.append(_run(u0, eps, omega, nl, ccfg, "blowup", ccfg.cfl, fine))
    ok = len(runs) == 3 and all(r["growth"] >= ccfg.blowup_growth and r["trusted"] for r in runs)
    evidence = {
        "supgrad_growth": runs[0]["growth"],
        "supgrad_growth_half_dt": runs[1]["growth"] if len(runs) > 1 else np.nan,
        "supgrad_growth_refined": runs[2]["growth"] if len(runs) > 2 else np.nan,
        "l6_decay": runs[0]["l6_factor"],
        "horizon": runs[0]["t"],
        "min_dt": min(r["min_dt"] for r in runs),
        "mass_drift": max(r["mass_drift"] for r in runs),
        "action_drift": max(r["action_drift"] for r in runs),
        "stop": runs[0]["reason"],
    }
    return DichotomyVerdict("blowup-like" if ok else "inconclusive", evidence, hyp)


@dataclass
class DichotomyReport:
    rows: list
    monotone: bool

    def table(self):
        return self.rows


def _classify_member(args):
    a, base, ccfg, m = args
    u0 = ComplexField(base.grid, a * base.Q.values)
    try:
        v = classify(u0, base.eps, base.omega, base.nl, ccfg, m=m)
    except HypothesisError as exc:
        return {"a": a, "verdict": "hypothesis-not-met", "note": str(exc)}
    row = {"a": a}
    row.update(v.as_row())
    return row


def dichotomy_sweep(a_values, base, cfg=None, workers=1):
    """Classify ``u0 = a Q`` over ``a_values``; rows are returned in input order."""
    ccfg = cfg or ClassifyConfig()
    m = observables(base.Q, EvolutionConfig(eps=base.eps, p=base.nl.p, omega=base.omega))["action"]
    jobs = [(float(a), base, ccfg, m) for a in a_values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_classify_member, jobs))
    else:
        rows = [_classify_member(j) for j in jobs]
    return DichotomyReport(rows=rows, monotone=_monotone(rows))


def _monotone(rows):
    """Scatter verdicts never appear above a blow-up verdict in ``a``."""
    order = sorted(
        (r["a"], r["verdict"]) for r in rows if r["verdict"] in ("scatter-like", "blowup-like")
    )
    seen_blowup = False
    for _, v in order:
        if v == "blowup-like":
            seen_blowup = True
        elif seen_blowup:
            return False
    return True
