"""
Solitary waves ``Q = W + eta`` of ``-Lap Q - Q^5 - eps f(Q) + omega Q = 0``.

The frequency ``omega = lam^2`` and the correction ``eta`` are found by a
Lyapunov-Schmidt iteration.  Writing the equation as

    (H + lam^2) eta = F(eps, lam, eta) = -lam^2 W + eps f(W) + N(eta),

the scalar condition ``<R0(-lam^2) V psi, F> = 0`` fixes ``lam`` (it removes
the ``1/lam`` component of the inverse along the resonance) and the banded
solve of ``H + lam^2`` then updates ``eta``.  The two steps alternate until
both stop moving.

Discretely ``Lap W`` is taken as ``-W^5`` exactly, ``Lap eta`` by finite
differences, and ``Q`` obeys a Robin law ``(rQ)' + lam rQ = 0`` past
``r_max``.  :func:`newton_oracle` solves the same discrete equation by
Newton's method, which gives an independent check of the iteration.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import AssumptionError, BallExitError, ConvergenceError, CritNLSError
from .profiles import Nonlinearity, W as W_of, lambda1, make_reference_grid, profile_set
from .radial import (
    RealField,
    banded_matvec,
    d2_bands,
    ghost_source,
    grid_for_decay,
    make_grid,
    robin,
    save_field,
)
from .resolvent import ResolventWorkspace, orth_pairing

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConstructConfig:
    """Tolerances, ball radius and grid recipe for :func:`construct_Q`.

    With ``n`` and ``r_max`` unset, the grid is a geometric mesh with step
    ``h`` in the mapped coordinate, core scale ``core`` and outer radius
    ``margin / (eps * lambda1)``, so that ``Q`` has decayed by ``exp(-margin)``.
    """

    R: float = 10.0
    tol_lambda: float = 1e-14
    tol_eta: float = 1e-9
    tol_outer: float = 1e-12
    mixing: str = "anderson"
    depth: int = 6
    max_lambda_iter: int = 200
    max_outer_iter: int = 200
    h: float = 0.01
    core: float = 1.0
    margin: float = 60.0
    r_min: float = 200.0
    n: Optional[int] = None
    r_max: Optional[float] = None

    def __post_init__(self):
        for name in ("tol_lambda", "tol_eta", "tol_outer", "h", "core", "margin"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.R < 1:
            raise ValueError("R must be >= 1")
        if self.mixing not in ("anderson", "picard"):
            raise ValueError("mixing must be 'anderson' or 'picard'")

    def make_grid(self, eps, nl):
        if self.n is not None and self.r_max is not None:
            return make_grid(self.n, self.r_max, {"kind": "geometric", "scale": self.core})
        lam = eps * lambda1(nl, make_reference_grid())
        return grid_for_decay(1.0 / lam, r_min=self.r_min, h=self.h, scale=self.core, margin=self.margin)

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class SolitaryWave:
    """A constructed wave; ``omega = lam**2`` and ``Q = W + eta`` on ``eta.grid``."""

    eps: float
    lam: float
    eta: RealField
    Q: RealField
    nl: Nonlinearity
    diagnostics: dict = dc_field(default_factory=dict)

    @property
    def omega(self):
        return self.lam**2

    @property
    def grid(self):
        return self.Q.grid

    def summary(self):
        out = {
            "eps": self.eps,
            "lam": self.lam,
            "omega": self.omega,
            "nonlinearity": self.nl.describe(),
            "grid": self.grid.header(),
        }
        out.update(self.diagnostics)
        return out

    def save(self, directory, stem=None):
        directory = Path(directory)
        stem = stem or f"wave_eps{self.eps:.6g}"
        directory.mkdir(parents=True, exist_ok=True)
        save_field(self.Q, directory / f"{stem}_Q.csv")
        save_field(self.eta, directory / f"{stem}_eta.csv")
        (directory / f"{stem}.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# right-hand side


def nonlinear_N(eta, eps, nl):
    """``(W+eta)^5 - W^5 - 5 W^4 eta + eps (f(W+eta) - f(W))``."""
    w = profile_set(eta.grid).W.values
    e = eta.values
    # expanded quintic remainder avoids cancellation for small eta
    quintic = e * e * (10 * w**3 + e * (10 * w**2 + e * (5 * w + e)))
    pert = eps * (nl(w + e) - nl(w)) if eps else 0.0
    return RealField(eta.grid, quintic + pert)


def rhs_F(eps, lam, eta, nl):
    """``-lam^2 W + eps f(W) + N(eta)``."""
    w = profile_set(eta.grid).W.values
    vals = -(lam**2) * w + nonlinear_N(eta, eps, nl).values
    if eps:
        vals = vals + eps * nl(w)
    return RealField(eta.grid, vals)


def _q_ghost_ratios(grid, lam):
    """Ghost ratios of ``rQ``: Robin decay for ``lam > 0``, else those of W itself."""
    if lam > 0:
        return robin(lam).ghost_ratios(grid)
    rg = grid.r_ghost
    return rg * W_of(rg) / (grid.r_max * W_of(grid.r_max))


def _closure_source(grid, lam):
    """``s / r``: the ghost offsets of ``r eta`` when ``rQ`` follows its closure."""
    rho = _q_ghost_ratios(grid, lam)
    rw_n = grid.r_max * W_of(grid.r_max)
    b = rho * rw_n - grid.r_ghost * W_of(grid.r_ghost)
    return ghost_source(grid, b[0], b[1]) / grid.r


def _eta_bands(grid, lam):
    """Bands of ``v -> -v_rr`` with the closure of ``r eta`` (homogeneous part)."""
    return -d2_bands(grid, _q_ghost_ratios(grid, lam))


def pde_residual(Q_or_eta, eps, omega, nl, is_eta=False):
    """Sup norm of ``W^5 - Lap eta - Q^5 - eps f(Q) + omega Q`` on the discrete equation."""
    grid = Q_or_eta.grid
    ps = profile_set(grid)
    w = ps.W.values
    eta = Q_or_eta.values if is_eta else Q_or_eta.values - w
    return float(np.max(np.abs(_residual_values(grid, eta, eps, omega, nl))))


def _residual_values(grid, eta, eps, omega, nl):
    lam = float(np.sqrt(omega))
    w = profile_set(grid).W.values
    q = w + eta
    r = grid.r
    minus_lap = (banded_matvec(_eta_bands(grid, lam), r * eta)) / r - _closure_source(grid, lam)
    res = w**5 + minus_lap - q**5 + omega * q
    if eps:
        res = res - eps * nl(q)
    return res


# ---------------------------------------------------------------------------
# the two fixed points


def _lambda_map(eps, lam, eta, nl, cache):
    """``H(lam)`` and the workspace used to evaluate it."""
    ws = cache.get(lam)
    if ws is None:
        ws = cache[lam] = ResolventWorkspace(eta.grid, lam)
    ps = ws.profiles
    u = ws.R0_Vpsi()
    wts = eta.grid.weights
    num = wts @ (u * (eps * nl(ps.W.values) + nonlinear_N(eta, eps, nl).values))
    den = lam * (wts @ (u * ps.W.values))
    return num / den, ws


def solve_lambda(eps, eta, nl, cfg=None, lam0=None, _cache=None):
    """Fixed point of the frequency map ``lam -> H(lam)`` by direct iteration.

    Starts from ``lam0`` (default ``eps * lambda1``) and must stay in
    ``[eps lambda1 / 2, 3 eps lambda1 / 2]``; leaving it raises
    :class:`ConvergenceError` with ``level="lambda"``.
    """
    cfg = cfg or ConstructConfig()
    lam1 = lambda1(nl, eta.grid)
    lo, hi = 0.5 * eps * lam1, 1.5 * eps * lam1
    lam = eps * lam1 if lam0 is None else float(lam0)
    cache = {} if _cache is None else _cache
    for _ in range(cfg.max_lambda_iter):
        new, _ws = _lambda_map(eps, lam, eta, nl, cache)
        if not lo <= new <= hi:
            raise ConvergenceError(
                f"frequency iterate {new:.6g} left [{lo:.6g}, {hi:.6g}] at eps={eps:g}",
                level="lambda",
            )
        done = abs(new - lam) <= cfg.tol_lambda * lam
        lam = new
        if done:
            return lam
    raise ConvergenceError(f"frequency map did not converge at eps={eps:g}", level="lambda")


def _eta_step(eps, lam, eta_prev, nl, ws):
    F = rhs_F(eps, lam, eta_prev, nl)
    ps = ws.profiles
    u = ws.R0_Vpsi()
    wts = eta_prev.grid.weights
    # leftover component along the resonance after the frequency solve
    c = (wts @ (u * F.values)) / (wts @ (u * ps.Vpsi.values))
    rhs = F.values - c * ps.Vpsi.values + _closure_source(eta_prev.grid, lam)
    return ws.solve(rhs), c


def solve_eta(eps, lam, eta_prev, nl, cfg=None, workspace=None):
    """One application of ``eta -> (H + lam^2)^(-1) F(eps, lam, eta)``.

    The small residual component of ``F`` along ``V psi`` left by the
    frequency solve is projected out first (its size is logged).
    Raises :class:`BallExitError` if ``||eta||_inf > R eps``.
    """
    cfg = cfg or ConstructConfig()
    ws = workspace if workspace is not None else ResolventWorkspace(eta_prev.grid, lam)
    vals, c = _eta_step(eps, lam, eta_prev, nl, ws)
    log.debug("eps=%g lam=%.17g projected resonance component %.3e", eps, lam, c)
    sup = float(np.max(np.abs(vals)))
    if sup > cfg.R * eps:
        raise BallExitError(f"||eta||_inf = {sup:.3e} exceeds R*eps = {cfg.R * eps:.3e}", level="eta")
    return RealField(eta_prev.grid, vals)


class _Anderson:
    """Anderson mixing for ``x = g(x)`` keeping the last ``depth`` differences."""

    def __init__(self, depth):
        self.depth = depth
        self.dx = []
        self.df = []
        self.prev = None

    def update(self, x, gx):
        f = gx - x
        if self.depth == 0:
            return gx
        if self.prev is not None:
            px, pf = self.prev
            self.dx.append(x - px)
            self.df.append(f - pf)
            if len(self.dx) > self.depth:
                self.dx.pop(0)
                self.df.pop(0)
        self.prev = (x, f)
        if not self.df:
            return gx
        dF = np.column_stack(self.df)
        dX = np.column_stack(self.dx)
        gamma = np.linalg.lstsq(dF, f, rcond=None)[0]
        return gx - (dX + dF) @ gamma


def construct_Q(eps, nl, cfg=None, grid=None):
    """Build the solitary wave at ``eps`` by alternating frequency and correction solves.

    Each sweep solves the frequency equation for the current ``eta`` and then
    applies the correction map; with ``mixing="anderson"`` successive sweeps
    are combined by Anderson acceleration, which also converges where the
    plain alternation is repelled.  Stops when ``|dlam|/lam <= tol_outer`` and
    ``||d eta||_inf / eps <= tol_eta``.  Failures raise
    :class:`ConvergenceError` whose ``level`` names the loop.
    """
    cfg = cfg or ConstructConfig()
    if not eps > 0:
        raise ValueError("eps must be positive")
    grid = grid or cfg.make_grid(eps, nl)
    lam1 = lambda1(nl, grid)  # raises AssumptionError when the pairing is >= 0
    eta = RealField(grid, np.zeros(grid.n))
    lam = eps * lam1
    mixer = _Anderson(cfg.depth if cfg.mixing == "anderson" else 0)
    max_proj = 0.0
    for it in range(1, cfg.max_outer_iter + 1):
        cache = {}
        new_lam = solve_lambda(eps, eta, nl, cfg, lam0=lam, _cache=cache)
        ws = cache.get(new_lam) or ResolventWorkspace(grid, new_lam)
        vals, c = _eta_step(eps, new_lam, eta, nl, ws)
        max_proj = max(max_proj, abs(c)) if it > 1 else 0.0
        sup = float(np.max(np.abs(vals)))
        if sup > cfg.R * eps:
            raise BallExitError(
                f"||eta||_inf = {sup:.3e} exceeds R*eps at outer iteration {it}", level="eta"
            )
        d_eta = float(np.max(np.abs(vals - eta.values))) / eps
        d_lam = abs(new_lam - lam) / new_lam
        lam = new_lam
        if d_lam <= cfg.tol_outer and d_eta <= cfg.tol_eta:
            eta = RealField(grid, vals)
            break
        eta = RealField(grid, mixer.update(eta.values, vals))
    else:
        raise ConvergenceError(
            f"outer iteration stalled at eps={eps:g} (dlam/lam={d_lam:.2e}, deta/eps={d_eta:.2e})",
            level="outer",
        )
    # final frequency consistent with the returned correction
    lam = solve_lambda(eps, eta, nl, cfg, lam0=lam)
    ws = ResolventWorkspace(grid, lam)
    w = profile_set(grid).W.values
    Q = RealField(grid, w + eta.values)
    omega = lam**2
    omega1 = lam1**2
    diag = {
        "iterations": it,
        "orthogonality_residual": orth_pairing(lam, rhs_F(eps, lam, eta, nl), ws),
        "projected_component": max_proj,
        "pde_residual": pde_residual(eta, eps, omega, nl, is_eta=True),
        "eta_sup_over_eps": float(np.max(np.abs(eta.values)) / eps),
        "lambda1": lam1,
        "omega1": omega1,
        "omega_tilde": omega - omega1 * eps**2,
        "method": "lyapunov-schmidt",
    }
    log.info("eps=%g omega=%.17g omega_tilde=%.6e", eps, omega, diag["omega_tilde"])
    return SolitaryWave(eps=float(eps), lam=float(lam), eta=eta, Q=Q, nl=nl, diagnostics=diag)


# ---------------------------------------------------------------------------
# independent oracle


def newton_oracle(eps, omega, Q_init, nl, cfg=None, tol=1e-11, max_iter=20, ball=1e-6):
    """Newton's method on the discrete equation at fixed ``(eps, omega)``.

    Unknown is ``eta = Q - W``; the iterate may not move more than ``ball``
    (sup norm) away from ``Q_init``.  Converged when the sup-norm residual is
    ``<= tol``.
    """
    grid = Q_init.grid
    w = profile_set(grid).W.values
    r = grid.r
    lam = float(np.sqrt(omega))
    bands = _eta_bands(grid, lam)
    eta0 = Q_init.values - w
    eta = eta0.copy()
    history = []
    for it in range(max_iter + 1):
        res = _residual_values(grid, eta, eps, omega, nl)
        norm = float(np.max(np.abs(res)))
        history.append(norm)
        if norm <= tol:
            break
        if it == max_iter:
            raise ConvergenceError(
                f"Newton did not reach {tol:g} in {max_iter} steps (residual {norm:.2e})",
                level="newton",
            )
        q = w + eta
        jac = bands.copy()
        diag = -5 * q**4 + omega
        if eps:
            diag = diag - eps * nl.derivative(q)
        jac[2] += diag
        dv = solve_banded((2, 2), jac, -r * res)
        eta = eta + dv / r
        if float(np.max(np.abs(eta - eta0))) > ball:
            raise ConvergenceError(f"Newton left the {ball:g}-ball around the seed", level="newton")
    eta_f = RealField(grid, eta)
    diag = {
        "iterations": it,
        "residual_history": history,
        "pde_residual": history[-1],
        "distance_from_seed": float(np.max(np.abs(eta - eta0))),
        "method": "newton",
    }
    return SolitaryWave(
        eps=float(eps), lam=lam, eta=eta_f, Q=RealField(grid, w + eta), nl=nl, diagnostics=diag
    )


# ---------------------------------------------------------------------------
# families


@dataclass
class MonotonicityReport:
    pairs: list
    pairs_decreasing: bool
    omega_curve: list
    omega_decreasing: bool

    @property
    def passed(self):
        return self.pairs_decreasing and self.omega_decreasing


def lambda_monotonicity_check(eps_pairs, nl, cfg=None, eps_hats=None, eps_ref=0.01):
    """Frequency increments and the rescaled frequency curve of a pure power.

    For each pair, ``|(lam2 - lam1) - lambda1 (eps2 - eps1)| / |eps2 - eps1|``
    is reported (equal pairs are skipped); these ratios should shrink with the
    pair scale.  The curve ``Omega(eh) = (eps_ref / eh)^(4/(5-p)) omega(eh)``
    over ``eps_hats`` should be strictly decreasing.
    """
    if not (nl.is_pure and 3 < nl.p < 5):
        raise ValueError("monotonicity check needs a pure power with 3 < p < 5")
    cfg = cfg or ConstructConfig()
    waves = {}

    def wave(e):
        if e not in waves:
            waves[e] = construct_Q(e, nl, cfg)
        return waves[e]

    rows = []
    for e1, e2 in eps_pairs:
        if e1 == e2:
            continue
        w1, w2 = wave(e1), wave(e2)
        lam1 = w1.diagnostics["lambda1"]
        ratio = abs((w2.lam - w1.lam) - lam1 * (e2 - e1)) / abs(e2 - e1)
        rows.append((e1, e2, ratio))
    # pairs listed from large to small scale
    pairs_dec = all(b[2] < a[2] for a, b in zip(rows, rows[1:]))

    curve = []
    if eps_hats is not None:
        k = 4.0 / (5.0 - nl.p)
        for eh in eps_hats:
            curve.append((eh, (eps_ref / eh) ** k * wave(eh).omega))
    vals = [c[1] for c in curve]
    omega_dec = all(b < a for a, b in zip(vals, vals[1:]))
    return MonotonicityReport(rows, pairs_dec, curve, omega_dec)


def estimate_eps0(nl, cfg=None, lo=1e-3, hi=1.0, iters=8):
    """Largest ``eps`` in ``[lo, hi]`` (bisection in log scale) where construction succeeds."""
    cfg = cfg or ConstructConfig()

    def ok(e):
        try:
            construct_Q(e, nl, cfg)
            return True
        except (CritNLSError, FloatingPointError):
            return False

    if not ok(lo):
        raise ConvergenceError(f"construction fails already at eps={lo:g}", level="outer")
    if ok(hi):
        return hi
    for _ in range(iters):
        mid = np.sqrt(lo * hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


__all__ = [
    "AssumptionError",
    "ConstructConfig",
    "MonotonicityReport",
    "SolitaryWave",
    "construct_Q",
    "estimate_eps0",
    "lambda_monotonicity_check",
    "newton_oracle",
    "nonlinear_N",
    "pde_residual",
    "rhs_F",
    "solve_eta",
    "solve_lambda",
]
