"""
Free and full resolvents on radial functions.

The free resolvent ``R0(-lam^2) = (-Lap + lam^2)^(-1)`` has kernel
``exp(-lam|x|) / (4 pi |x|)``.  On radial data it reduces to

    u(r) = (1 / (lam r)) [ exp(-lam r) int_0^r s f sinh(lam s) ds
                          + sinh(lam r) int_r^inf s f exp(-lam s) ds ]

which is evaluated by two exponentially weighted sweeps.  Each cell
integral interpolates ``s f(s)`` by a cubic and integrates it exactly
against the exponential (product integration), so the result stays 4th
order even when ``lam * dr`` is large.

The full resolvent ``(H + lam^2)^(-1)``, ``H = -Lap - 5 W^4``, is a banded
solve of the discretized operator with a Robin far-field closure.
"""

from __future__ import annotations

import threading
from math import comb

import numpy as np
from scipy import integrate
from scipy.linalg import lapack
from scipy.special import gammainc, gamma

from .errors import FactorizationError
from .profiles import profile_set
from .radial import RealField, banded_matvec, d2_bands, inner, lp_norm, robin

_KL = _KU = 2


def _moments_decay(z, kmax=3):
    """``I_k(z) = int_0^1 t^k exp(-z t) dt`` for k = 0..kmax (z >= 0)."""
    z = np.asarray(z, dtype=float)
    out = np.empty((kmax + 1,) + z.shape)
    small = z < 1e-3
    zs = np.where(small, 1.0, z)
    for k in range(kmax + 1):
        big = gamma(k + 1) * gammainc(k + 1, zs) / zs ** (k + 1)
        # alternating series is exact to rounding for z < 1e-3
        ser = 1.0 / (k + 1) - z / (k + 2) + z * z / (2 * (k + 3)) - z**3 / (6 * (k + 4))
        out[k] = np.where(small, ser, big)
    return out


def _moments_growth(z, kmax=3):
    """``J_k(z) = int_0^1 t^k exp(-z (1 - t)) dt`` for k = 0..kmax."""
    i = _moments_decay(z, kmax)
    out = np.zeros_like(i)
    for k in range(kmax + 1):
        for j in range(k + 1):
            out[k] += comb(k, j) * (-1) ** j * i[j]
    return out


class _ProductRule:
    """Per-cell interpolation data for the radial Yukawa convolution."""

    def __init__(self, grid):
        r = grid.r
        n = grid.n
        # node 0 is the origin; index -1 mirrors r_1
        rr = np.concatenate(([-r[0], 0.0], r))
        self.rr = rr
        self.left = rr[1:-1]  # cell j spans [left_j, left_j + H_j], j = 0..n-1
        self.H = np.diff(rr[1:])
        start = np.arange(n)  # stencil rr[start .. start+3]
        start[-1] = n - 2
        idx = start[:, None] + np.arange(4)[None, :]
        self.idx = idx  # indices into the extended value array
        tau = (rr[idx] - self.left[:, None]) / self.H[:, None]
        vand = tau[:, :, None] ** np.arange(4)[None, None, :]
        # coefficients c = inv(vand) @ g  ->  integral = H * m @ inv(vand) @ g
        self.inv = np.linalg.inv(vand)
        self.grid = grid

    def weights(self, lam):
        z = lam * self.H
        mi = _moments_decay(z).T  # (n, 4): kernel exp(-lam (s - left))
        mj = _moments_growth(z).T  # kernel exp(-lam (right - s))
        wi = self.H[:, None] * np.einsum("ck,ckm->cm", mi, self.inv)
        wj = self.H[:, None] * np.einsum("ck,ckm->cm", mj, self.inv)
        return wi, wj, np.exp(-z)


_RULES = {}
_RULE_LOCK = threading.Lock()


def _rule(grid):
    with _RULE_LOCK:
        rule = _RULES.get(grid)
        if rule is None:
            rule = _RULES[grid] = _ProductRule(grid)
        return rule


def _tail_integral(grid, g, lam):
    """``int_{r_N}^inf g(s) exp(-lam (s - r_N)) ds`` for a power-law extrapolation of g."""
    gn, gm = g[-1], g[-2]
    if gn == 0.0 or gm == 0.0 or np.sign(gn) != np.sign(gm) or abs(gn) >= abs(gm):
        return 0.0
    rn, rm = grid.r[-1], grid.r[-2]
    k = np.log(gm / gn) / np.log(rn / rm)
    val, _ = integrate.quad(lambda t: (1.0 + t / rn) ** (-k) * np.exp(-lam * t), 0.0, np.inf)
    return gn * val


def _r0_values(grid, lam, f_values, wcache=None):
    rule = _rule(grid)
    wi, wj, decay = wcache if wcache is not None else rule.weights(lam)
    r = grid.r
    n = grid.n
    g = r * f_values
    ge = np.concatenate(([-g[0], 0.0], g))
    rr = rule.rr
    # exp(-lam r) sinh(lam s) = exp(-lam (r - s)) * (1 - exp(-2 lam s)) / 2; folding
    # the second factor into the interpolant keeps small lam*s free of cancellation
    gt = ge * (-0.5 * np.expm1(-2.0 * lam * rr))
    cell_d = np.einsum("cm,cm->c", wj, gt[rule.idx])  # int_cell g sinh(lam s) exp(-lam right)
    cell_c = np.einsum("cm,cm->c", wi, ge[rule.idx])  # int_cell g exp(-lam (s - left))

    d = np.empty(n)
    acc = 0.0
    for j in range(n):
        acc = decay[j] * acc + cell_d[j]
        d[j] = acc
    c = np.empty(n)
    acc = _tail_integral(grid, g, lam)
    c[n - 1] = acc
    for j in range(n - 1, 0, -1):
        acc = decay[j] * acc + cell_c[j]
        c[j - 1] = acc
    return (d - 0.5 * np.expm1(-2.0 * lam * r) * c) / (lam * r)


def apply_R0(lam, f):
    """``R0(-lam^2) f`` for a radial field ``f``; rejects ``lam <= 0``."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    return RealField(f.grid, _r0_values(f.grid, float(lam), f.values))


class ResolventWorkspace:
    """Factorized ``H + lam^2`` and cached free-resolvent data for one ``(grid, lam)``.

    Build once (single owner); afterwards ``solve`` and ``R0`` are read-only
    and may be shared.
    """

    def __init__(self, grid, lam):
        if not lam > 0:
            raise ValueError("lam must be positive")
        self.grid = grid
        self.lam = float(lam)
        self.profiles = profile_set(grid)
        ab = -d2_bands(grid, robin(self.lam))
        ab[_KU] += self.profiles.V.values + self.lam**2
        self.bands = ab
        work = np.zeros((2 * _KL + _KU + 1, grid.n))
        work[_KL:] = ab
        lu, piv, info = lapack.dgbtrf(work, _KL, _KU)
        if info != 0:
            raise FactorizationError(
                f"zero pivot at row {info} for lam={self.lam:g}; perturb the grid"
            )
        self._lu, self._piv = lu, piv
        self._r0_weights = None
        self._r0_vpsi = None

    def _solve_v(self, rhs):
        x, info = lapack.dgbtrs(self._lu, _KL, _KU, rhs, self._piv)
        if info != 0:
            raise FactorizationError(f"dgbtrs failed with info={info}")
        return x

    def apply_operator(self, eta_values):
        """``(H + lam^2) eta`` with the same discretization as ``solve``."""
        r = self.grid.r
        return banded_matvec(self.bands, r * eta_values) / r

    def solve(self, F_values, refine=True):
        r = self.grid.r
        rhs = r * F_values
        v = self._solve_v(rhs)
        if refine:
            v = v + self._solve_v(rhs - banded_matvec(self.bands, v))
        return v / r

    def residual(self, eta_values, F_values):
        """``||(H + lam^2) eta - F||_inf / ||F||_inf``."""
        scale = np.max(np.abs(F_values)) or 1.0
        return float(np.max(np.abs(self.apply_operator(eta_values) - F_values)) / scale)

    def R0(self, f_values):
        if self._r0_weights is None:
            self._r0_weights = _rule(self.grid).weights(self.lam)
        return _r0_values(self.grid, self.lam, f_values, self._r0_weights)

    def R0_Vpsi(self):
        if self._r0_vpsi is None:
            self._r0_vpsi = self.R0(self.profiles.Vpsi.values)
            self._r0_vpsi.setflags(write=False)
        return self._r0_vpsi


def orth_pairing(lam, F, workspace=None):
    """``<R0(-lam^2) V psi, F>``; zero at a solution of the reduced problem."""
    ws = workspace if workspace is not None else ResolventWorkspace(F.grid, lam)
    return float(ws.grid.weights @ (ws.R0_Vpsi() * F.values))


def solve_full(lam, F, workspace=None):
    """``eta = (H + lam^2)^(-1) F`` with regularity at 0 and Robin decay at ``r_max``."""
    ws = workspace if workspace is not None else ResolventWorkspace(F.grid, lam)
    return RealField(F.grid, ws.solve(F.values))


def free_operator_values(grid, lam, values, decay=None):
    """``(-Lap + lam^2) f`` with the package Laplacian."""
    from .radial import apply_laplacian, W_CLASS

    f = RealField(grid, values)
    return -apply_laplacian(f, decay or W_CLASS).values + lam**2 * values


def singularity_probe(lam_list, f, orthogonalize=False):
    """Amplification of ``(1 + R0(-lam^2) V)^(-1)`` on the data ``h = R0(-lam^2) f``.

    With ``orthogonalize`` the data is first replaced by ``(1 - P) h``,
    ``P = <V psi, .> psi / int V psi^2``, which removes its component along
    the resonance.  The inverse is applied as ``(H + lam^2)^(-1) (-Lap + lam^2) h``,
    with ``(-Lap + lam^2) psi = lam^2 psi - V psi`` taken in closed form.

    Returns a list of ``(lam, ||g||_inf / ||h||_inf)``.
    """
    grid = f.grid
    ps = profile_set(grid)
    vpsi = ps.Vpsi.values
    out = []
    for lam in lam_list:
        ws = ResolventWorkspace(grid, lam)
        h = ws.R0(f.values)
        rhs = f.values.copy()
        if orthogonalize:
            c = (grid.weights @ (vpsi * h)) / ps.int_vpsi2()
            h = h - c * ps.psi.values
            rhs = rhs - c * (lam**2 * ps.psi.values - vpsi)
        g = ws.solve(rhs)
        out.append((float(lam), float(np.max(np.abs(g)) / np.max(np.abs(h)))))
    return out


def loglog_slope(xs, ys):
    """Least-squares slope of ``log|y|`` against ``log x``."""
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.abs(np.asarray(ys, dtype=float)))
    return float(np.polyfit(x, y, 1)[0])


def resonance_limit(grid, lams):
    """``lam <R0(-lam^2) V psi, W>`` for each ``lam`` (tends to ``2 sqrt(3 pi)``)."""
    ps = profile_set(grid)
    vals = []
    for lam in lams:
        ws = ResolventWorkspace(grid, lam)
        vals.append(lam * orth_pairing(lam, ps.W, ws))
    return np.array(vals)


def forcing_gap(grid, lams, nl):
    """``<R0(-lam^2) V psi, f(W)> + <psi, f(W)>`` for each ``lam`` (tends to 0)."""
    ps = profile_set(grid)
    fw = RealField(grid, nl(ps.W.values))
    base = inner(ps.psi, fw, decay=1.0 + nl.p1)
    vals = []
    for lam in lams:
        vals.append(orth_pairing(lam, fw) + base)
    return np.array(vals)


def r0_norm_ratio(grid, lam, f, q, r):
    """``||R0 f||_r / ||f||_q``: empirical operator-norm sample for the Young bounds."""
    u = RealField(grid, _r0_values(grid, lam, f.values))
    return lp_norm(u, r) / lp_norm(f, q)
