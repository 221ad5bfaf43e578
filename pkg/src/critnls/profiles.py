"""
Closed-form static objects of the unperturbed quintic problem.

    W(r)      = (1 + r^2/3)^(-1/2)         static solution, Lap W + W^5 = 0
    Lambda W  = W^3 - W/2                  scaling generator, H Lambda W = 0
    psi       = Lambda W / sqrt(3 pi)      normalized resonance
    V         = -5 W^4                     potential of H = -Lap + V

W and Lambda W decay like 1/r, so every integral containing them is
evaluated with a declared power-law tail.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
from scipy.special import beta

from .errors import AssumptionError
from .radial import RealField, apply_laplacian, inner, make_grid, quad

SQRT3 = np.sqrt(3.0)
PSI_NORM = 1.0 / np.sqrt(3.0 * np.pi)


def W(r):
    return (1.0 + np.asarray(r, dtype=float) ** 2 / 3.0) ** -0.5


def dW(r):
    r = np.asarray(r, dtype=float)
    return -(r / 3.0) * W(r) ** 3


def lambda_W(r):
    w = W(r)
    return w**3 - 0.5 * w


def lambda_W_derivative_form(r):
    """``(1/2 + r d/dr) W`` with the closed-form derivative."""
    r = np.asarray(r, dtype=float)
    return 0.5 * W(r) + r * dW(r)


def psi(r):
    return PSI_NORM * lambda_W(r)


def V(r):
    return -5.0 * W(r) ** 4


def w_power_integral(k):
    """Closed form of ``int_{R^3} W^k`` (finite for k > 3)."""
    if k <= 3:
        return np.inf
    return 2.0 * np.pi * 3.0 * SQRT3 * beta(1.5, (k - 3.0) / 2.0)


@dataclass(frozen=True)
class Nonlinearity:
    """Perturbation ``f`` in ``-Lap Q - Q^5 - eps f(Q) + omega Q = 0``.

    Use :meth:`pure_power` for ``sign |q|^(p-1) q`` or :meth:`custom` for a
    caller-supplied triple ``(f, f', F)`` with growth exponents ``p1 <= p2``.
    """

    p: Optional[float] = None
    sign: float = 1.0
    f: Optional[Callable] = dc_field(default=None, compare=False)
    fprime: Optional[Callable] = dc_field(default=None, compare=False)
    F: Optional[Callable] = dc_field(default=None, compare=False)
    p1: Optional[float] = None
    p2: Optional[float] = None
    name: str = ""

    @classmethod
    def pure_power(cls, p, sign=1.0):
        p = float(p)
        if not p > 2:
            raise ValueError("pure power requires p > 2")
        return cls(p=p, sign=float(sign), p1=p, p2=p, name=f"power(p={p:g}, sign={sign:+g})")

    @classmethod
    def custom(cls, f, fprime, F, p1, p2, name="custom"):
        if not 2 < p1 <= p2:
            raise ValueError("growth exponents must satisfy 2 < p1 <= p2")
        return cls(f=f, fprime=fprime, F=F, p1=float(p1), p2=float(p2), name=name)

    @property
    def is_pure(self):
        return self.p is not None

    def __call__(self, q):
        if self.is_pure:
            q = np.asarray(q)
            return self.sign * np.abs(q) ** (self.p - 1) * q
        return self.f(q)

    def derivative(self, q):
        if self.is_pure:
            return self.sign * self.p * np.abs(q) ** (self.p - 1)
        return self.fprime(q)

    def primitive(self, q):
        if self.is_pure:
            return self.sign * np.abs(q) ** (self.p + 1) / (self.p + 1)
        return self.F(q)

    def describe(self):
        return self.name or f"power(p={self.p:g})"


class ProfileSet:
    """W, Lambda W, psi, V sampled on a grid, with memoized integrals."""

    def __init__(self, grid):
        self.grid = grid
        r = grid.r
        self.W = RealField(grid, W(r))
        self.dW = RealField(grid, dW(r))
        self.LW = RealField(grid, lambda_W(r))
        self.psi = RealField(grid, psi(r))
        self.V = RealField(grid, V(r))
        self.Vpsi = RealField(grid, V(r) * psi(r))
        self._cache = {}
        self._lock = threading.Lock()

    def _memo(self, key, compute):
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = compute()
        with self._lock:
            self._cache.setdefault(key, value)
            return self._cache[key]

    def int_w6(self):
        return self._memo("w6", lambda: quad(self.W**6, decay=6))

    def int_w_power(self, k):
        return self._memo(("wk", float(k)), lambda: quad(self.W**k, decay=k))

    def int_vpsi(self):
        return self._memo("vpsi", lambda: quad(self.Vpsi, decay=5))

    def int_vpsi2(self):
        return self._memo("vpsi2", lambda: quad(self.Vpsi * self.psi, decay=6))

    def int_grad_w2(self):
        return self._memo("gw2", lambda: quad(self.dW**2, decay=4))

    def pairing(self, nl):
        """``<Lambda W, f(W)>``."""
        key = ("pair", nl.p, nl.sign) if nl.is_pure else ("pair", id(nl))

        def compute():
            fw = RealField(self.grid, nl(self.W.values))
            return inner(self.LW, fw, decay=1.0 + nl.p1)

        return self._memo(key, compute)


_PROFILE_SETS = {}
_PROFILE_LOCK = threading.Lock()


def profile_set(grid):
    """Shared :class:`ProfileSet` for ``grid``."""
    with _PROFILE_LOCK:
        ps = _PROFILE_SETS.get(grid)
        if ps is None:
            ps = _PROFILE_SETS[grid] = ProfileSet(grid)
        return ps


def make_reference_grid():
    """Grid on which the profile constants are accurate to about 1e-10."""
    return make_grid(1024, 400.0)


def pairing_LambdaW_fW(nl, grid):
    """``<Lambda W, f(W)>`` by quadrature."""
    return profile_set(grid).pairing(nl)


def _checked_pairing(nl, grid):
    pair = pairing_LambdaW_fW(nl, grid)
    scale = abs(profile_set(grid).int_w_power(1.0 + nl.p1)) if nl.p1 + 1 > 3 else 1.0
    if pair >= -1e-9 * scale:
        raise AssumptionError(
            f"<Lambda W, f(W)> = {pair:.3e} is not negative for {nl.describe()}"
        )
    return pair


def lambda1(nl, grid):
    """Leading frequency coefficient ``-<Lambda W, f(W)> / (6 pi)``."""
    return -_checked_pairing(nl, grid) / (6.0 * np.pi)


def omega1(nl, grid):
    """``omega_1 = lambda1^2``; raises :class:`AssumptionError` if the pairing is >= 0."""
    return lambda1(nl, grid) ** 2


def resonance_residual(grid, f=None):
    """``max |(-Lap - 5 W^4) f|`` over interior nodes, ``f = Lambda W`` by default."""
    ps = profile_set(grid)
    f = ps.LW if f is None else f
    hf = -apply_laplacian(f).values + ps.V.values * f.values
    return float(np.max(np.abs(hf[:-2])))


def identity_table(grid):
    """Rows ``(name, computed, expected, error)`` for the closed-form identities."""
    ps = profile_set(grid)
    r = grid.r
    p4 = Nonlinearity.pure_power(4)
    rows = [
        (
            "LambdaW_algebraic_vs_derivative",
            float(np.max(np.abs(lambda_W(r) - lambda_W_derivative_form(r)))),
            0.0,
        ),
        ("resonance_residual_HLambdaW", resonance_residual(grid), 0.0),
        ("int_V_psi", ps.int_vpsi(), np.sqrt(4 * np.pi)),
        ("int_grad_W_sq_minus_int_W6", ps.int_grad_w2() - ps.int_w6(), 0.0),
        ("int_W6", ps.int_w6(), w_power_integral(6)),
        ("int_W5", ps.int_w_power(5), w_power_integral(5)),
        ("pairing_p4", pairing_LambdaW_fW(p4, grid), -0.1 * w_power_integral(5)),
        ("lambda1_p4", lambda1(p4, grid), SQRT3 / 15.0),
        ("omega1_p4", omega1(p4, grid), 1.0 / 75.0),
    ]
    return [(name, float(c), float(e), float(abs(c - e))) for name, c, e in rows]
