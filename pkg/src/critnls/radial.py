"""
Radial geometry: stretched grids, quadrature, norms and the radial Laplacian.

Every field in the package is a radial function sampled on a
:class:`RadialGrid`.  Nodes come from a uniform mesh ``s_i = i*h`` (i = 1..n)
in a mapped coordinate pushed through an odd map ``r = r(s)``.  Because a
smooth radial function is even in ``r`` and the map is odd, sampled fields are
even in ``s``; the reflection supplies the regularity condition at the origin
for free.

Quadrature is the trapezoidal rule in ``s`` (spectrally accurate at ``s = 0``
for even integrands) with Gregory end corrections at ``r_max``.  Slowly
decaying integrands can add a power-law tail beyond ``r_max``.

The Laplacian is applied in the form ``Lap f = (1/r) d^2(r f)/dr^2`` with
4th-order differences in ``s``; ``v = r f`` is odd, so its ghost values at
the origin are exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridMismatchError, SizingError

MIN_NODES = 16
MIN_RMAX = 50.0
FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class Stretch:
    """Node-mapping law ``r = r(s)``.

    ``geometric``: ``r = scale * sinh(s)``, linear near the core and
    geometric in the far field.  ``algebraic``: ``r = scale * xi / (1 - xi^2)``
    on ``xi in (0, 1)``, which coarsens like ``1/(1 - xi)``.
    """

    kind: str = "geometric"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("geometric", "algebraic"):
            raise ValueError(f"unknown stretch kind {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("stretch scale must be positive")

    def r(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "geometric":
            return self.scale * np.sinh(s)
        return self.scale * s / (1.0 - s * s)

    def dr(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "geometric":
            return self.scale * np.cosh(s)
        return self.scale * (1.0 + s * s) / (1.0 - s * s) ** 2

    def d2r(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "geometric":
            return self.scale * np.sinh(s)
        return 2.0 * self.scale * s * (3.0 + s * s) / (1.0 - s * s) ** 3

    def inverse(self, r):
        r = float(r)
        if self.kind == "geometric":
            return float(np.arcsinh(r / self.scale))
        a = self.scale
        return (2.0 * r) / (a + np.sqrt(a * a + 4.0 * r * r))

    def s_limit(self):
        return np.inf if self.kind == "geometric" else 1.0

    def to_dict(self):
        return {"kind": self.kind, "scale": self.scale}


def _as_stretch(stretch):
    if stretch is None:
        return Stretch()
    if isinstance(stretch, Stretch):
        return stretch
    if isinstance(stretch, str):
        return Stretch(stretch, 10.0 if stretch == "algebraic" else 1.0)
    if isinstance(stretch, dict):
        return Stretch(**stretch)
    raise TypeError(f"cannot interpret stretch {stretch!r}")


def _gregory_factors(m=4):
    """Right-end Gregory correction factors (last node first), order 2m."""
    big = 8 * m
    y = np.arange(big + 1.0) - big / 2
    trap = np.ones(big + 1)
    trap[0] = trap[-1] = 0.5
    a = np.empty((m, m))
    b = np.empty(m)
    for j in range(m):
        k = 2 * j
        a[j] = [y[i] ** k + y[big - i] ** k for i in range(m)]
        b[j] = 2 * (big / 2) ** (k + 1) / (k + 1) - np.sum(trap * y**k)
    delta = np.linalg.solve(a, b)
    fac = np.ones(m)
    fac[0] = 0.5
    return fac + delta


_GREGORY = _gregory_factors()


class RadialGrid:
    """Nonuniform radial mesh with quadrature weights for ``int 4 pi r^2 dr``."""

    def __init__(self, n, r_max, stretch=None):
        if n < MIN_NODES:
            raise SizingError(f"n = {n} below minimum {MIN_NODES}")
        if r_max < MIN_RMAX:
            raise SizingError(f"r_max = {r_max} below minimum {MIN_RMAX}")
        self.n = int(n)
        self.r_max = float(r_max)
        self.stretch = _as_stretch(stretch)

        s_max = self.stretch.inverse(self.r_max)
        self.h = s_max / self.n
        if s_max + 3 * self.h >= self.stretch.s_limit():
            raise SizingError("too few nodes to place boundary ghosts for this stretch")
        self.s = self.h * np.arange(1, self.n + 1)
        self.r = self.stretch.r(self.s)
        self.r[-1] = self.r_max
        self.rs = self.stretch.dr(self.s)
        self.rss = self.stretch.d2r(self.s)
        # ghost radii beyond r_max, used by boundary closures
        self.r_ghost = self.stretch.r(s_max + self.h * np.arange(1, 3))

        fac = np.ones(self.n)
        m = min(len(_GREGORY), self.n // 2)
        fac[-m:] = _GREGORY[:m][::-1]
        self.weights = FOUR_PI * self.r**2 * self.rs * self.h * fac

        for arr in (self.s, self.r, self.rs, self.rss, self.r_ghost, self.weights):
            arr.setflags(write=False)

    def __repr__(self):
        return f"RadialGrid(n={self.n}, r_max={self.r_max:g}, stretch={self.stretch})"

    def __eq__(self, other):
        if not isinstance(other, RadialGrid):
            return NotImplemented
        return (self.n, self.r_max, self.stretch) == (other.n, other.r_max, other.stretch)

    def __hash__(self):
        return hash((self.n, self.r_max, self.stretch))

    def header(self):
        return {"n": self.n, "r_max": self.r_max, "stretch": self.stretch.to_dict()}


def make_grid(n, r_max, stretch=None):
    """Build a grid with ``n`` nodes on ``(0, r_max]``.

    ``stretch`` is a :class:`Stretch`, a kind name, or a dict.  Raises
    :class:`SizingError` when ``n < 16`` or ``r_max < 50``.
    """
    return RadialGrid(n, r_max, stretch)


def grid_for_decay(length, r_min=200.0, h=0.01, scale=1.0, margin=60.0):
    """Geometric grid reaching ``margin * length`` (at least ``r_min``) with step ``h`` in s."""
    r_max = max(r_min, margin * length)
    s_max = np.arcsinh(r_max / scale)
    n = max(MIN_NODES, int(np.ceil(s_max / h)))
    return make_grid(n, r_max, Stretch("geometric", scale))


# ---------------------------------------------------------------------------
# fields


class _Field:
    dtype = float

    def __init__(self, grid, values):
        values = np.array(values, dtype=self.dtype)
        if values.shape != (grid.n,):
            raise ValueError(f"expected {grid.n} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    def __repr__(self):
        return f"{type(self).__name__}({self.grid!r})"

    def _wrap(self, values):
        values = np.asarray(values)
        if np.iscomplexobj(values):
            return ComplexField(self.grid, values)
        return RealField(self.grid, values)

    def _other(self, other):
        if isinstance(other, _Field):
            _check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.values)

    def __mul__(self, other):
        return self._wrap(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.values / self._other(other))

    def __neg__(self):
        return self._wrap(-self.values)

    def __pow__(self, p):
        return self._wrap(self.values**p)

    def __abs__(self):
        return RealField(self.grid, np.abs(self.values))


class RealField(_Field):
    """Real radial function sampled on a grid."""

    dtype = float


class ComplexField(_Field):
    """Complex radial function sampled on a grid."""

    dtype = complex

    @property
    def real(self):
        return RealField(self.grid, self.values.real)

    @property
    def imag(self):
        return RealField(self.grid, self.values.imag)


def field(grid, func_or_values):
    """RealField (or ComplexField) from a callable of ``r`` or from samples."""
    vals = func_or_values(grid.r) if callable(func_or_values) else func_or_values
    vals = np.asarray(vals)
    if np.iscomplexobj(vals):
        return ComplexField(grid, vals)
    return RealField(grid, vals)


def _check_same_grid(f, g):
    if f.grid is not g.grid and f.grid != g.grid:
        raise GridMismatchError(f"{f.grid!r} vs {g.grid!r}")


def _values(f):
    return f.values if isinstance(f, _Field) else np.asarray(f)


# ---------------------------------------------------------------------------
# integration


def power_tail(grid, values, decay, span=8):
    """Integral beyond ``r_max`` of a field decaying like ``r**-decay``.

    The last samples are fitted to ``c r^-k + d r^-(k+2)``, which absorbs the
    first asymptotic correction of algebraically decaying profiles.
    """
    k = float(decay)
    if k <= 3.0:
        raise ValueError(f"integral diverges for decay r^-{k:g}")
    j = max(0, grid.n - 1 - span)
    r1, r2 = grid.r[j], grid.r[-1]
    f1, f2 = values[j], values[-1]
    # f r^k = c + d r^-2 at two radii
    y1, y2 = f1 * r1**k, f2 * r2**k
    d = (y1 - y2) / (r1**-2 - r2**-2)
    c = y2 - d * r2**-2
    return FOUR_PI * (c * r2 ** (3 - k) / (k - 3) + d * r2 ** (1 - k) / (k - 1))


def quad(f, decay=None):
    """Approximate ``int_{R^3} f dx``.

    ``decay`` declares that ``f`` falls off like ``r**-decay`` beyond ``r_max``;
    the corresponding tail is added.  Fields without a declared decay are
    assumed negligible beyond ``r_max``.
    """
    grid = f.grid
    vals = f.values
    total = grid.weights @ vals
    if decay is not None:
        total = total + power_tail(grid, vals, decay)
    if not np.isfinite(total):
        raise ValueError("non-finite quadrature result")
    return total


def inner(f, g, decay=None):
    """L^2(R^3) pairing ``<f, g>`` for real fields."""
    _check_same_grid(f, g)
    return quad(RealField(f.grid, f.values * g.values), decay=decay)


def lp_norm(f, p, decay=None):
    """``||f||_{L^p(R^3)}``; ``p = inf`` gives the max over nodes and ``r = 0``."""
    if p == np.inf or p == "inf":
        # the origin is not a node; include its even extrapolation
        return float(max(np.max(np.abs(f.values)), abs(even_origin_value(f.values))))
    p = float(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    a = np.abs(f.values) ** p
    if not np.any(a):
        return 0.0
    integral = quad(RealField(f.grid, a), decay=None if decay is None else p * decay)
    return float(integral ** (1.0 / p))


# ---------------------------------------------------------------------------
# differentiation


@dataclass(frozen=True)
class Decay:
    """Far-field closure for second derivatives.

    ``power``: ``f ~ r**-value``.  ``robin``: ``(r f)' + value * (r f) = 0``,
    i.e. ``f ~ exp(-value r)/r``.  ``zero``: ``f`` vanishes beyond ``r_max``.
    """

    kind: str = "power"
    value: float = 1.0

    def ghost_ratios(self, grid):
        """Ratios ``v_{N+j} / v_N`` for ``v = r f``, j = 1, 2."""
        rg, rn = grid.r_ghost, grid.r_max
        if self.kind == "power":
            return (rg / rn) ** (1.0 - self.value)
        if self.kind == "robin":
            return np.exp(-self.value * (rg - rn))
        if self.kind == "zero":
            return np.zeros(2)
        raise ValueError(f"unknown decay kind {self.kind!r}")


W_CLASS = Decay("power", 1.0)


def robin(lam):
    return Decay("robin", float(lam))


def d2_bands(grid, decay=W_CLASS):
    """Banded matrix (2 sub, 2 super diagonals) of ``v -> v_rr`` for odd ``v = r f``.

    ``decay`` is a :class:`Decay` or the two ghost ratios ``v_{N+j} / v_N``
    directly.  Layout matches :func:`scipy.linalg.solve_banded` with
    ``(l, u) = (2, 2)``.
    """
    n, h = grid.n, grid.h
    a = 1.0 / grid.rs**2
    b = grid.rss / grid.rs**3
    # v_rr = a v_ss - b v_s, both 4th-order centred
    c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h * h)
    c1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * h)
    full = np.empty((n, 5))  # coefficients for offsets -2..2
    for k in range(5):
        full[:, k] = a * c2[k] - b * c1[k]

    ab = np.zeros((5, n))
    for k, off in enumerate(range(-2, 3)):
        # entry (i, i+off) stored at ab[2 - off, i + off]
        if off >= 0:
            ab[2 - off, off:] = full[: n - off, k]
        else:
            ab[2 - off, : n + off] = full[-off:, k]
    # origin: v_0 = 0 and v_{-1} = -v_1, so row 0 gets -coef(-2) on itself
    ab[2, 0] -= full[0, 0]
    # far field: v_{N} and v_{N+1} ghosts proportional to the last node
    g1, g2 = decay.ghost_ratios(grid) if isinstance(decay, Decay) else decay
    ab[2, n - 1] += full[n - 1, 3] * g1 + full[n - 1, 4] * g2
    ab[1, n - 1] += full[n - 2, 4] * g1  # row n-2, column n-1
    return ab


def ghost_source(grid, b1, b2):
    """Contribution to ``v_rr`` of additive ghost offsets ``v_{N+j} += b_j``.

    Lets a field be closed by an affine rule (e.g. ``eta = Q - W`` with Q
    obeying a Robin law) while the bands stay homogeneous.
    """
    h = grid.h
    a = 1.0 / grid.rs[-2:] ** 2
    b = grid.rss[-2:] / grid.rs[-2:] ** 3
    c2 = np.array([16.0, -1.0]) / (12.0 * h * h)  # offsets +1, +2
    c1 = np.array([8.0, -1.0]) / (12.0 * h)
    last = a[1] * c2 - b[1] * c1
    prev2 = a[0] * c2[1] - b[0] * c1[1]
    out = np.zeros(grid.n)
    out[-1] = last[0] * b1 + last[1] * b2
    out[-2] = prev2 * b1
    return out


def laplacian_bands(grid, decay=W_CLASS):
    """Bands of ``f -> Lap f = (1/r) (r f)_rr``."""
    ab = d2_bands(grid, decay)
    r = grid.r
    n = grid.n
    out = np.zeros_like(ab)
    for row in range(5):
        off = 2 - row  # column - row
        if off >= 0:
            cols = np.arange(off, n)
        else:
            cols = np.arange(0, n + off)
        rows = cols - off
        out[row, cols] = ab[row, cols] * r[cols] / r[rows]
    return out


def banded_matvec(ab, x, l=2, u=2):
    n = ab.shape[1]
    y = np.zeros(n, dtype=np.result_type(ab, x))
    for row in range(l + u + 1):
        off = u - row
        if off >= 0:
            y[: n - off] += ab[row, off:] * x[off:]
        else:
            y[-off:] += ab[row, : n + off] * x[: n + off]
    return y


def apply_laplacian(f, decay=W_CLASS):
    """Discrete ``Lap f = f'' + (2/r) f'`` (4th order, regular at the origin)."""
    vals = banded_matvec(laplacian_bands(f.grid, decay), f.values)
    return f._wrap(vals)


def even_origin_value(values):
    """Value at r = 0 of an even sample sequence (quartic fit in s^2)."""
    return 1.5 * values[0] - 0.6 * values[1] + 0.1 * values[2]


def derivative_values(grid, values):
    """``d/dr`` of an even radial function, 4th order in s."""
    v = np.asarray(values)
    n, h = grid.n, grid.h
    f0 = even_origin_value(v)
    ext = np.concatenate(([v[1], v[0], f0], v))  # s = -2h, -h, 0, h, ...
    ds = np.empty_like(v)
    # interior: centred stencil on ext, index shift 3
    i = np.arange(0, n - 2)
    e = i + 3
    ds[i] = (ext[e - 2] - 8 * ext[e - 1] + 8 * ext[e + 1] - ext[e + 2]) / (12 * h)
    # last two nodes: one-sided 4th order
    ds[n - 2] = (3 * v[n - 1] + 10 * v[n - 2] - 18 * v[n - 3] + 6 * v[n - 4] - v[n - 5]) / (12 * h)
    ds[n - 1] = (
        25 * v[n - 1] - 48 * v[n - 2] + 36 * v[n - 3] - 16 * v[n - 4] + 3 * v[n - 5]
    ) / (12 * h)
    return ds / grid.rs


def gradient(f):
    """Radial derivative ``df/dr`` as a field on the same grid."""
    return f._wrap(derivative_values(f.grid, f.values))


# ---------------------------------------------------------------------------
# serialization


def save_field(f, path):
    """Write ``path`` (CSV: r, value[, imag]) and a JSON header beside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    vals = f.values
    if np.iscomplexobj(vals):
        cols = np.column_stack([f.grid.r, vals.real, vals.imag])
        head = "r,value,imag"
    else:
        cols = np.column_stack([f.grid.r, vals])
        head = "r,value"
    np.savetxt(path, cols, delimiter=",", header=head, comments="", fmt="%.17g")
    path.with_suffix(".json").write_text(json.dumps(f.grid.header(), indent=2, sort_keys=True))


def load_field(path):
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    grid = make_grid(header["n"], header["r_max"], header["stretch"])
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] == 3:
        return ComplexField(grid, data[:, 1] + 1j * data[:, 2])
    return RealField(grid, data[:, 1])
