"""
Mass, energy, action and the two Pohozaev functionals.

    M(u)   = 1/2 int |u|^2
    E(u)   = 1/2 int |grad u|^2 - 1/6 int |u|^6 - eps int F(u)
    S(u)   = E(u) + omega M(u)
    K(u)   = int |grad u|^2 - int |u|^6 + eps int (3 F(u) - 3/2 u f(u))
    K0(u)  = eps int (3 F(u) - 1/2 u f(u)) - omega int |u|^2
    I(u)   = S(u) - 2 / (3 (p - 1)) K(u)

``K`` and ``K0`` are the derivatives of ``S`` along ``T_mu u = mu^(3/2) u(mu x)``
and ``S_mu u = mu^(1/2) u(mu x)`` at ``mu = 1``; both vanish on solitary waves.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import make_interp_spline

from .construct import SolitaryWave, construct_Q, newton_oracle, pde_residual
from .errors import ResolutionError
from .profiles import W as W_of, dW as dW_of, profile_set, w_power_integral
from .radial import (
    ComplexField,
    RealField,
    Stretch,
    derivative_values,
    even_origin_value,
    make_grid,
    power_tail,
)


@dataclass(frozen=True)
class FunctionalReport:
    eps: float
    omega: float
    p: float
    mass: float
    energy: float
    action: float
    K: float
    K0: float
    I: float
    I_expanded: float
    grad2: float
    l6: float
    pert: float
    pohozaev_residual_K: float
    pohozaev_residual_K0: float

    def as_dict(self):
        return asdict(self)


def _integral(grid, values, decay):
    total = float(grid.weights @ values)
    if decay is not None and decay > 3.0:
        total += power_tail(grid, values, decay)
    elif decay is not None:
        return np.inf
    return total


def _parts(u, nl, decay=None, w_coeff=None):
    """The raw integrals: grad^2, |u|^2, |u|^6, F(|u|), |u| f(|u|)."""
    grid = u.grid
    vals = np.asarray(u.values)
    if w_coeff:
        rest = vals - w_coeff * profile_set(grid).W.values
        du = w_coeff * dW_of(grid.r) + derivative_values(grid, rest)
    else:
        du = derivative_values(grid, vals)
    a = np.abs(vals)
    k = decay
    grad2 = _integral(grid, np.abs(du) ** 2, None if k is None else 2 * k + 2)
    l2 = _integral(grid, a**2, None if k is None else 2 * k)
    l6 = _integral(grid, a**6, None if k is None else 6 * k)
    if nl is None:
        return grad2, l2, l6, 0.0, 0.0
    p1 = nl.p1 + 1.0
    F = _integral(grid, nl.primitive(a), None if k is None else p1 * k)
    uf = _integral(grid, a * nl(a), None if k is None else p1 * k)
    return grad2, l2, l6, F, uf


def evaluate(u, eps, omega, nl, decay=None, w_coeff=None):
    """All functionals of ``u`` at ``(eps, omega)``.

    ``decay`` declares ``|u| ~ r^-decay`` beyond ``r_max`` (tails are added);
    ``w_coeff = a`` differentiates the ``a W`` part of ``u`` analytically.
    A divergent mass is reported as ``inf`` and dropped from the action when
    ``omega == 0``.
    """
    grad2, l2, l6, F, uf = _parts(u, nl, decay, w_coeff)
    mass = 0.5 * l2
    energy = 0.5 * grad2 - l6 / 6.0 - eps * F
    action = energy + (omega * mass if omega else 0.0)
    pert = eps * (3.0 * F - 1.5 * uf)
    K = grad2 - l6 + pert
    K0 = eps * (3.0 * F - 0.5 * uf) - (omega * l2 if omega else 0.0)
    p = nl.p if (nl is not None and nl.is_pure) else np.nan
    if np.isfinite(p) and p != 1:
        c = 2.0 / (3.0 * (p - 1.0))
        I = action - c * K
        I_exp = (
            (p - 7.0 / 3.0) / (2.0 * (p - 1.0)) * grad2
            + (5.0 - p) / (6.0 * (p - 1.0)) * l6
            + (0.5 * omega * l2 if omega else 0.0)
        )
    else:
        I = I_exp = np.nan
    scale_K = max(grad2, l6, abs(pert), 1e-300)
    scale_K0 = max(abs(eps * 3.0 * F), abs(eps * 0.5 * uf), abs(omega * l2) if omega else 0.0, 1e-300)
    return FunctionalReport(
        eps=float(eps),
        omega=float(omega),
        p=float(p),
        mass=float(mass),
        energy=float(energy),
        action=float(action),
        K=float(K),
        K0=float(K0),
        I=float(I),
        I_expanded=float(I_exp),
        grad2=float(grad2),
        l6=float(l6),
        pert=float(pert),
        pohozaev_residual_K=float(abs(K) / scale_K),
        pohozaev_residual_K0=float(abs(K0) / scale_K0),
    )


def wave_report(wave):
    """:func:`evaluate` for a constructed wave (exponential decay, analytic W gradient)."""
    return evaluate(wave.Q, wave.eps, wave.omega, wave.nl, w_coeff=1.0)


# ---------------------------------------------------------------------------
# scaling


def resample(u, radii, decay=1.0):
    """Values of ``u`` at arbitrary radii.

    Quintic spline in the mapped coordinate on the even extension; beyond
    ``r_max`` the field is continued as ``u_N (r_N / r)^decay`` (``decay=None``
    continues by zero).
    """
    grid = u.grid
    vals = np.asarray(u.values)
    s = grid.s
    ext_s = np.concatenate((-s[:5][::-1], [0.0], s))
    ext_v = np.concatenate((vals[:5][::-1], [even_origin_value(vals)], vals))
    spline = make_interp_spline(ext_s, ext_v, k=5)
    radii = np.asarray(radii, dtype=float)
    out = np.zeros(radii.shape, dtype=vals.dtype)
    inside = radii <= grid.r_max
    s_new = np.array([grid.stretch.inverse(r) for r in radii[inside]])
    out[inside] = spline(s_new)
    if decay is not None:
        out[~inside] = vals[-1] * (grid.r_max / radii[~inside]) ** decay
    return out


def _check_mu(grid, mu):
    if not mu > 0:
        raise ValueError("mu must be positive")
    dr0 = grid.rs[0] * grid.h
    if mu * dr0 > 0.125:
        raise ResolutionError(f"mu = {mu:g} squeezes the core below 8 nodes per unit length")
    if mu * grid.r_max < 50.0:
        raise ResolutionError(f"mu = {mu:g} maps the whole grid inside r < 50")


def _scaled(mu, u, power, decay):
    _check_mu(u.grid, mu)
    if mu == 1:
        return u
    vals = mu**power * resample(u, mu * u.grid.r, decay)
    return u._wrap(vals)


def scale_T(mu, u, decay=1.0):
    """``mu^(3/2) u(mu x)`` resampled on the same grid (L^2 preserving)."""
    return _scaled(mu, u, 1.5, decay)


def scale_S(mu, u, decay=1.0):
    """``mu^(1/2) u(mu x)`` resampled on the same grid (L^6 and H^1-dot preserving)."""
    return _scaled(mu, u, 0.5, decay)


def action_derivative(u, eps, omega, nl, which="T", delta=1e-2, decay=None, field_decay=1.0):
    """``d/dmu S(scale(mu) u)`` at ``mu = 1`` by a 5-point central difference."""
    scale = scale_T if which == "T" else scale_S
    coef = {-2: 1.0, -1: -8.0, 1: 8.0, 2: -1.0}
    total = 0.0
    for k, c in coef.items():
        v = scale(1.0 + k * delta, u, decay=field_decay)
        total += c * evaluate(v, eps, omega, nl, decay=decay).action
    return total / (12.0 * delta)


# ---------------------------------------------------------------------------
# action level


def action_gap(eps, nl, cfg=None, wave=None):
    """``(S(Q_eps) - 1/3 int W^6, -(p-3)/(2(p+1)) eps int W^(p+1))`` for a pure power.

    ``eps = 0`` returns ``(0.0, 0.0)`` since then ``Q = W``.
    """
    if not (nl.is_pure and 3 < nl.p < 5):
        raise ValueError("action gap needs a pure power with 3 < p < 5")
    p = nl.p
    predicted = -(p - 3.0) / (2.0 * (p + 1.0)) * eps * nl.sign * w_power_integral(p + 1.0)
    if eps == 0:
        return 0.0, 0.0
    wave = wave or construct_Q(eps, nl, cfg)
    ps = profile_set(wave.grid)
    gap = wave_report(wave).action - ps.int_w6() / 3.0
    return float(gap), float(predicted)


def ray_profile(wave, a_values):
    """Rows ``(a, S(aQ), K(aQ))`` along the ray through the wave."""
    rows = []
    for a in a_values:
        rep = evaluate(wave.Q * a, wave.eps, wave.omega, wave.nl, w_coeff=a)
        rows.append((float(a), rep.action, rep.K))
    return rows


def ray_check(wave, a_values=None):
    """True when ``S(aQ) < S(Q)`` for every sampled ``a != 1`` (plus the rows)."""
    a_values = np.linspace(0.1, 2.0, 20) if a_values is None else a_values
    top = wave_report(wave).action
    rows = ray_profile(wave, [a for a in a_values if not np.isclose(a, 1.0, rtol=0, atol=1e-9)])
    return all(s < top for _, s, _ in rows), rows


# ---------------------------------------------------------------------------
# scaling family


def scaled_family(eps, eps_hat, wave_hat, polish=True):
    """The rescaled wave ``mu^(1/2) Q_hat(mu x)`` solving the problem at ``eps``.

    ``mu = (eps / eps_hat)^(2/(5-p))`` and ``omega = mu^2 omega_hat``.  The
    target grid is the source grid shrunk by ``mu`` (same mapped nodes), so no
    interpolation is involved; ``polish`` then runs Newton on the target grid
    to remove the O(h^4) mismatch of the discrete ``Lap W`` with ``-W^5``.
    """
    nl = wave_hat.nl
    if not nl.is_pure or nl.p == 5:
        raise ValueError("scaled family needs a pure power with p != 5")
    mu = (eps / eps_hat) ** (2.0 / (5.0 - nl.p))
    src = wave_hat.grid
    if mu == 1:
        return wave_hat
    r_max = src.r_max / mu
    if r_max < 50.0:
        raise ResolutionError(f"mu = {mu:g} shrinks r_max below 50")
    st = src.stretch
    grid = make_grid(src.n, r_max, Stretch(st.kind, st.scale / mu))
    q = np.sqrt(mu) * wave_hat.Q.values
    w = W_of(grid.r)
    omega = mu**2 * wave_hat.omega
    eta = RealField(grid, q - w)
    raw = pde_residual(eta, eps, omega, nl, is_eta=True)
    diag = {
        "method": "scaled",
        "eps_hat": float(eps_hat),
        "mu": float(mu),
        "pde_residual_unpolished": raw,
    }
    wave = SolitaryWave(eps=float(eps), lam=float(np.sqrt(omega)), eta=eta, Q=RealField(grid, q), nl=nl)
    if polish:
        # every term of the equation carries a factor mu^(5/2)
        wave = newton_oracle(eps, omega, wave.Q, nl, tol=1e-11 * mu**2.5, ball=1e-3)
        diag["newton_steps"] = wave.diagnostics["iterations"]
        diag["pde_residual"] = wave.diagnostics["pde_residual"]
        diag["polish_shift"] = wave.diagnostics["distance_from_seed"]
    else:
        diag["pde_residual"] = raw
    diag["lambda1"] = wave_hat.diagnostics.get("lambda1")
    wave.diagnostics = diag
    return wave


def wave_at(eps, nl, cfg=None):
    """Solitary wave at ``eps``: direct construction, else a rescaled smaller-``eps`` wave.

    Past the end of the constructed branch the ``eps`` is halved until the
    construction succeeds and the result is carried back by the exact scaling
    symmetry of pure powers.
    """
    from .errors import ConvergenceError

    try:
        return construct_Q(eps, nl, cfg)
    except ConvergenceError:
        if not nl.is_pure:
            raise
    eps_hat = eps / 2.0
    for _ in range(6):
        try:
            base = construct_Q(eps_hat, nl, cfg)
            break
        except ConvergenceError:
            eps_hat /= 2.0
    else:
        raise ConvergenceError(f"no constructible eps below {eps:g}", level="outer")
    return scaled_family(eps, eps_hat, base)


__all__ = [
    "ComplexField",
    "FunctionalReport",
    "action_derivative",
    "action_gap",
    "evaluate",
    "ray_check",
    "ray_profile",
    "resample",
    "scale_S",
    "scale_T",
    "scaled_family",
    "wave_at",
    "wave_report",
]
