"""Tensor-product grids, trapezoid quadrature and grid-level operators.

Nodes are ordered C-style (last axis fastest). Non-periodic axes include
both end points and carry trapezoid weights; periodic axes drop the right
end point and carry uniform weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridError, SideError
from .linop import DUAL, PRIMAL, LinOp

#: default truncation box for unbounded axes
DEFAULT_BOX = (-6.0, 6.0)
MIN_POINTS = 4
MAX_DIM = 4


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    points: int
    periodic: bool = False

    @property
    def length(self):
        return self.hi - self.lo

    @property
    def spacing(self):
        if self.periodic:
            return self.length / self.points
        return self.length / (self.points - 1)

    def nodes(self):
        if self.periodic:
            return self.lo + self.spacing * np.arange(self.points)
        return np.linspace(self.lo, self.hi, self.points)

    def weights(self):
        w = np.full(self.points, self.spacing)
        if not self.periodic:
            w[0] *= 0.5
            w[-1] *= 0.5
        return w


@dataclass(frozen=True)
class Grid:
    axes: tuple
    signature: tuple

    @property
    def dim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(ax.points for ax in self.axes)

    @property
    def size(self):
        return math.prod(self.shape)

    @property
    def periodic(self):
        return tuple(ax.periodic for ax in self.axes)

    @cached_property
    def nodes(self):
        """``(size, dim)`` array of node coordinates."""
        mesh = np.meshgrid(*[ax.nodes() for ax in self.axes], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def weights(self):
        w = np.ones(1)
        for ax in self.axes:
            w = np.multiply.outer(w, ax.weights()).ravel()
        return w

    @property
    def volume(self):
        return math.prod(ax.length for ax in self.axes)

    def coords(self):
        """Per-axis coordinate arrays over all nodes (for vectorised callables)."""
        return [self.nodes[:, k] for k in range(self.dim)]

    def index_of(self, point):
        """Flat index of the node at ``point``, wrapping periodic axes.

        Raises :class:`GridError` if ``point`` is not (to 1e-9 of a spacing)
        a grid node.
        """
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != (self.dim,):
            raise GridError(f"point must have {self.dim} coordinates")
        idx = []
        for ax, p in zip(self.axes, point):
            t = (p - ax.lo) / ax.spacing
            k = round(t)
            if abs(t - k) > 1e-9:
                raise GridError(f"coordinate {p} is not a grid node")
            if ax.periodic:
                k %= ax.points
            elif not 0 <= k < ax.points:
                raise GridError(f"coordinate {p} lies outside [{ax.lo}, {ax.hi}]")
            idx.append(k)
        return int(np.ravel_multi_index(idx, self.shape))

    def contains(self, point):
        point = np.atleast_1d(np.asarray(point, dtype=float))
        for ax, p in zip(self.axes, point):
            if ax.periodic:
                continue
            if p < ax.lo - 1e-12 or p > ax.hi + 1e-12:
                return False
        return True


def make_grid(axes, signature=None):
    """Build a :class:`Grid` from axis descriptors.

    Parameters
    ----------
    axes
        Sequence of :class:`Axis` or ``(lo, hi, points[, periodic])`` tuples.
    signature
        Signs of the variable-space metric, one per axis; Euclidean if omitted.
    """
    built = []
    for item in axes:
        ax = item if isinstance(item, Axis) else Axis(*item)
        ax = Axis(float(ax.lo), float(ax.hi), int(ax.points), bool(ax.periodic))
        if not ax.hi > ax.lo:
            raise GridError(f"axis extent must be positive, got [{ax.lo}, {ax.hi}]")
        if ax.points < MIN_POINTS:
            raise GridError(f"an axis needs at least {MIN_POINTS} points, got {ax.points}")
        built.append(ax)
    if not built:
        raise GridError("a grid needs at least one axis")
    if len(built) > MAX_DIM:
        raise GridError(f"grids of dimension > {MAX_DIM} are not supported")
    if signature is None:
        signature = (1,) * len(built)
    signature = tuple(int(s) for s in signature)
    if len(signature) != len(built):
        raise GridError(f"signature length {len(signature)} != dimension {len(built)}")
    if any(s not in (1, -1) for s in signature):
        raise GridError("signature entries must be +1 or -1")
    return Grid(tuple(built), signature)


def line(lo, hi, points, periodic=False):
    """One-axis Euclidean grid."""
    return make_grid([(lo, hi, points, periodic)])


def index_grid(n):
    """Grid labelling ``n`` abstract basis elements with unit weights."""
    return make_grid([(0.0, float(n), n, True)])


@dataclass(frozen=True, eq=False)
class SampledFunction:
    grid: Grid
    values: np.ndarray
    side: str = PRIMAL

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.size,):
            raise GridError(f"expected {self.grid.size} values, got shape {v.shape}")
        if self.side not in (PRIMAL, DUAL):
            raise ValueError(f"unknown side {self.side!r}")
        object.__setattr__(self, "values", v)

    def _like(self, values):
        return SampledFunction(self.grid, values, self.side)

    def __add__(self, other):
        _check_same(self, other)
        return self._like(self.values + other.values)

    def __sub__(self, other):
        _check_same(self, other)
        return self._like(self.values - other.values)

    def __mul__(self, c):
        return self._like(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self._like(-self.values)

    def assert_real(self, tol=1e-12):
        scale = max(np.max(np.abs(self.values)), 1.0)
        if np.max(np.abs(np.imag(self.values))) > tol * scale:
            raise ValueError("imaginary part does not vanish in a real pipeline")
        return self._like(np.real(self.values))


def _check_same(f, g):
    if f.grid != g.grid:
        raise GridError("functions live on different grids")
    if f.side != g.side:
        raise SideError(f"cannot combine {f.side} and {g.side} vectors")


def sample(f, grid, side=PRIMAL):
    """Evaluate ``f`` at every node.

    ``f`` receives one coordinate array per axis and must be vectorised.
    """
    vals = np.asarray(f(*grid.coords()))
    if vals.ndim == 0:
        vals = np.full(grid.size, vals.item())
    vals = np.broadcast_to(vals, (grid.size,)).copy()
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise GridError(f"function is not finite at node {grid.nodes[bad]}")
    return SampledFunction(grid, vals, side)


def l2_inner(f, g):
    """Quadrature inner product ``sum w conj(f) g``."""
    _check_same(f, g)
    val = np.sum(f.grid.weights * np.conj(f.values) * g.values)
    if np.isrealobj(f.values) and np.isrealobj(g.values):
        return float(val)
    return complex(val)


def pairing(f, phi):
    """Action of the dual vector ``f`` on the primal vector ``phi``.

    Conjugate-linear in ``f``, so the plane wave ``exp(ipx)`` is the
    eigenfunctional of ``-i d/dx`` with eigenvalue ``p``.
    """
    if f.grid != phi.grid:
        raise GridError("functions live on different grids")
    if f.side != DUAL or phi.side != PRIMAL:
        raise SideError("pairing takes (dual, primal)")
    val = np.sum(f.grid.weights * np.conj(f.values) * phi.values)
    if np.isrealobj(f.values) and np.isrealobj(phi.values):
        return float(val)
    return complex(val)


def _displacement(grid, point):
    d = grid.nodes - np.asarray(point, dtype=float)[None, :]
    for k, ax in enumerate(grid.axes):
        if ax.periodic:
            d[:, k] = (d[:, k] + 0.5 * ax.length) % ax.length - 0.5 * ax.length
    return d


def mollified_delta(grid, a, L, side=DUAL):
    """Samples of the normalised Gaussian ``(L/sqrt(pi))^n exp(-L^2 |x-a|^2)``.

    Raises :class:`GridError` when fewer than 4 nodes lie within ``3/L`` of
    ``a`` (the mollifier would be under-resolved).
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if L <= 0:
        raise GridError("L must be positive")
    if not grid.contains(a):
        raise GridError(f"point {a} lies outside the grid box")
    d = _displacement(grid, a)
    r2 = np.sum(d * d, axis=1)
    if np.count_nonzero(r2 <= (3.0 / L) ** 2) < 4:
        raise GridError(f"mollifier with L={L} is under-resolved on this grid")
    vals = (L / math.sqrt(math.pi)) ** grid.dim * np.exp(-(L * L) * r2)
    return SampledFunction(grid, vals, side)


def grid_delta(grid, k):
    """Exact discrete point evaluation at node ``k``: ``1/w_k`` spike, dual side."""
    if not 0 <= k < grid.size:
        raise GridError(f"node index {k} out of range [0, {grid.size})")
    vals = np.zeros(grid.size)
    vals[k] = 1.0 / grid.weights[k]
    return SampledFunction(grid, vals, DUAL)


def _fd_weights(offsets, deriv=1):
    offsets = np.asarray(offsets, dtype=float)
    m = len(offsets)
    vander = np.vander(offsets, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(vander, rhs)


def _fd4_matrix(n, h, periodic):
    d = np.zeros((n, n))
    central = _fd_weights([-2, -1, 0, 1, 2])
    if periodic:
        for i in range(n):
            for off, c in zip(range(-2, 3), central):
                d[i, (i + off) % n] += c
        return d / h
    for i in range(2, n - 2):
        d[i, i - 2:i + 3] = central
    # one-sided 5-point closures, 4th order
    d[0, :5] = _fd_weights([0, 1, 2, 3, 4])
    d[1, :5] = _fd_weights([-1, 0, 1, 2, 3])
    d[n - 2, n - 5:] = _fd_weights([-3, -2, -1, 0, 1])
    d[n - 1, n - 5:] = _fd_weights([-4, -3, -2, -1, 0])
    return d / h


def _spectral_matrix(n, length):
    # Fourier differentiation; the Nyquist mode of an even grid maps to 0.
    k = np.fft.fftfreq(n, d=1.0 / n) * (2.0 * math.pi / length)
    if n % 2 == 0:
        k[n // 2] = 0.0
    eye = np.eye(n)
    return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(eye, axis=0), axis=0))


def _along_axis(grid, axis, mat):
    full = np.ones((1, 1))
    for k, ax in enumerate(grid.axes):
        full = np.kron(full, mat if k == axis else np.eye(ax.points))
    return full


def derivative_op(grid, axis=0, order=1, scheme=None):
    """Matrix of ``d^order / dx_axis^order``.

    ``scheme`` is ``"spectral"`` (default on periodic axes) or ``"fd4"``
    (default otherwise: 4th-order central differences, wrap-around on
    periodic axes, one-sided 4th-order closure at the ends). Orders above
    one are built by repeated application of the first-order matrix.
    """
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    if not 0 <= axis < grid.dim:
        raise GridError(f"axis {axis} out of range")
    ax = grid.axes[axis]
    if scheme is None:
        scheme = "spectral" if ax.periodic else "fd4"
    if scheme == "spectral":
        if not ax.periodic:
            raise GridError("spectral differentiation needs a periodic axis")
        d1 = _spectral_matrix(ax.points, ax.length)
    elif scheme == "fd4":
        d1 = _fd4_matrix(ax.points, ax.spacing, ax.periodic)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    d = np.linalg.matrix_power(d1, order)
    return LinOp(_along_axis(grid, axis, d), grid, grid)


def multiplication_op(grid, m):
    """Diagonal operator ``phi -> m * phi``."""
    vals = sample(m, grid).values if callable(m) else np.asarray(m)
    if vals.shape != (grid.size,):
        raise GridError("multiplier has the wrong length")
    if not np.all(np.isfinite(vals)):
        raise GridError("multiplier is not finite on the grid")
    return LinOp(np.diag(vals), grid, grid)


def identity_op(grid):
    return LinOp(np.eye(grid.size), grid, grid)
