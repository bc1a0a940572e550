"""Coordinate transformations and their action on vectors, covectors,
metrics, operators and (1,2)-tensors; constructors for transforms that
intertwine first-order differential operators.

Laws implemented (``omega`` maps new coordinates to old ones)::

    vector      phi   = omega phi~
    covector    f~    = omega* f
    metric      G~    = omega* G omega
    operator    A~    = omega^{-1} A omega
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from .errors import GridError, KernelError, SideError
from .grid import SampledFunction, derivative_op, make_grid, multiplication_op
from .kernels import Kernel, assemble, gauss_rho
from .linop import DUAL, PRIMAL, LinOp, Transform, operator_norm_estimate
from .spaces import CoordinateSpace

MAX_TENSOR_POINTS = 64


def _transform(omega):
    return omega if isinstance(omega, Transform) else Transform(omega)


def pushforward_vector(omega, phi_new):
    """``phi = omega phi~``."""
    omega = _transform(omega)
    if phi_new.side != PRIMAL:
        raise SideError("vectors transform on the primal side")
    return omega(phi_new)


def pullback_functional(omega, f):
    """``f~ = omega* f``, so that ``pairing(f~, phi~) == pairing(f, omega phi~)``."""
    omega = _transform(omega)
    if f.side != DUAL:
        raise SideError("functionals live on the dual side")
    return omega.adjoint(f)


def pushforward_metric(omega, space):
    """Space on ``omega``'s domain with metric ``omega* G omega``.

    Raises :class:`~funcoord.errors.IndefiniteMetricError` if the transformed
    Gram matrix loses positive-definiteness numerically.
    """
    omega = _transform(omega)
    if space.side != PRIMAL:
        raise SideError("metric pushforward acts on primal spaces")
    if space.grid != omega.codomain:
        raise GridError("space does not live on the transform's codomain")
    g = omega.adjoint.matrix @ space.metric.matrix @ omega.matrix
    return CoordinateSpace(omega.domain, g, PRIMAL, f"pushforward:{space.provenance}")


def conjugate_operator(omega, A):
    """``omega^{-1} A omega``."""
    omega = _transform(omega)
    if not A.is_endomorphism():
        raise SideError("operator must map a space into itself")
    if A.domain != omega.codomain:
        raise GridError("operator does not act on the transform's codomain")
    m = omega.solve(A.matrix @ omega.matrix)
    return LinOp(m, omega.domain, omega.domain, A.sides)


def hermitian_conjugate(A, space):
    """``A+ = G^{-1} A* G``, the adjoint in the space's own inner product.

    In Gram form this is ``M^{-1} A^H M``.
    """
    if not A.is_endomorphism() or A.domain != space.grid:
        raise SideError("operator must be an endomorphism of the space")
    m = space.gram
    out = sla.cho_solve(space._cho, A.matrix.conj().T @ m)
    return LinOp(out, space.grid, space.grid, A.sides)


def hermiticity_defect(A, space):
    """``||A+ - A||_F / ||A||_F``."""
    ap = hermitian_conjugate(A, space).matrix
    return float(np.linalg.norm(ap - A.matrix) / max(np.linalg.norm(A.matrix), 1e-300))


def is_hermitian(A, space, tol=1e-8):
    return hermiticity_defect(A, space) <= tol


def operator_residual(lhs, rhs):
    """``||lhs - rhs|| / ||rhs||`` in the 2-norm, by power iteration."""
    return operator_norm_estimate(lhs - rhs) / max(operator_norm_estimate(rhs), 1e-300)


# -- transforms intertwining first-order operators ---------------------------


def _antiderivative(fn, lo, hi, refine=20001):
    """Spline interpolant of ``int_lo^x fn`` built by cumulative trapezoid."""
    t = np.linspace(lo, hi, refine)
    vals = np.asarray(fn(t), dtype=complex) * np.ones_like(t)
    c = cumulative_trapezoid(vals, t, initial=0.0)
    if np.allclose(c.imag, 0.0):
        return CubicSpline(t, c.real), vals
    re, im = CubicSpline(t, c.real), CubicSpline(t, c.imag)
    return (lambda x: re(x) + 1j * im(x)), vals


def _check_nonvanishing(a, lo, hi):
    t = np.linspace(lo, hi, 20001)
    av = np.asarray(a(t)) * np.ones_like(t)
    if not np.all(np.isfinite(av)) or np.min(np.abs(av)) < 1e-12 or (
        np.isrealobj(av) and np.min(av) < 0 < np.max(av)
    ):
        raise GridError("coefficient a vanishes on the domain")


@dataclass
class FirstOrderTransform:
    """Kernel solving ``a D omega = omega b`` with its assembled operator.

    Attributes
    ----------
    kernel
        ``omega(x, y) = g(y) exp(c(x) b(y))``.
    op
        Assembled operator from the ``y`` grid to the ``x`` grid.
    transform
        ``op`` wrapped as a :class:`Transform` (set when invertible).
    residual
        ``||(aD) Omega - Omega b|| / ||Omega||``.
    """

    kernel: Kernel
    op: LinOp
    transform: Transform | None
    residual: float


def solve_first_order_transform(a, b, g, grid_x, grid_y=None, *, require_invertible=True):
    """Kernel ``omega(x, y) = g(y) exp(c(x) b(y))`` with ``c = int_lo^x dt / a``.

    Then ``a(x) d omega/dx = omega b(y)``: the transform carries
    multiplication by ``b`` into the first-order operator ``a D``. The
    antiderivative starts at the left end of ``grid_x``.

    Raises
    ------
    GridError
        if ``a`` vanishes on the domain.
    SingularTransformError
        if the assembled operator is numerically singular and
        ``require_invertible`` is set (it is then a kernel but not a
        change of coordinates).
    """
    grid_y = grid_x if grid_y is None else grid_y
    if grid_x.dim != 1 or grid_y.dim != 1:
        raise GridError("first-order transforms are one-dimensional")
    lo, hi = grid_x.axes[0].lo, grid_x.axes[0].hi
    _check_nonvanishing(a, lo, hi)
    c, _ = _antiderivative(lambda t: 1.0 / np.asarray(a(t), dtype=complex), lo, hi)

    def fn(x, y):
        x, y = x[..., 0], y[..., 0]
        return np.asarray(g(y)) * np.exp(np.asarray(c(x)) * np.asarray(b(y)))

    probe = fn(grid_x.nodes[:, None, :], grid_y.nodes[None, :, :])
    real = np.isrealobj(probe) or np.allclose(np.imag(probe), 0.0)
    kernel = Kernel("first_order", fn=fn, symmetric=False, real=bool(real))
    op = assemble(kernel, grid_y, grid_x)
    ad = multiplication_op(grid_x, a).matrix @ derivative_op(grid_x).matrix
    bm = np.diag(np.asarray(b(grid_y.nodes[:, 0])) * np.ones(grid_y.size))
    lhs = ad @ op.matrix
    rhs = op.matrix @ bm
    scale = max(operator_norm_estimate(op.matrix), 1e-300)
    residual = operator_norm_estimate(lhs - rhs) / scale
    transform = Transform(op) if require_invertible else None
    return FirstOrderTransform(kernel, op, transform, float(residual))


def solve_separable_transform(a, C=1.0, C1=1.0, anchor=None):
    """Kernel ``omega(x, y) = exp(C exp(C1 int dx/a) exp(-C1 y))``.

    It solves ``a d omega/dx + d omega/dy = 0``, so for test functions
    vanishing at the ends of the ``y`` interval ``(aD) Omega = Omega D``.
    The antiderivative is taken from ``anchor`` (default: where it is
    evaluated first, i.e. the left end of the grid passed to
    :func:`assemble`); with ``a = x`` and ``anchor = 1`` this is
    ``exp(x exp(-y))``.
    """
    cache = {}

    def fn(x, y):
        x, y = x[..., 0], y[..., 0]
        if "anchor" not in cache:
            cache["anchor"] = float(np.min(x)) if anchor is None else float(anchor)
        x0 = cache["anchor"]
        lo = min(x0, float(np.min(x)))
        hi = max(x0 + 1.0, float(np.max(x)))
        if "c" not in cache or lo < cache["range"][0] or hi > cache["range"][1]:
            # rebuild over a range covering every query so the spline never extrapolates
            _check_nonvanishing(a, lo, hi)
            prim, _ = _antiderivative(lambda t: C1 / np.asarray(a(t), dtype=float), lo, hi)
            base = float(prim(x0))
            cache["c"] = lambda t: prim(t) - base
            cache["range"] = (lo, hi)
        return np.exp(C * np.exp(cache["c"](x)) * np.exp(-C1 * y))

    return Kernel("separable", fn=fn, symmetric=False)


def verify_intertwining(A, omega, B, bank):
    """Max over ``bank`` of ``||A Omega phi - Omega B phi|| / ||Omega B phi||``.

    ``A`` acts on ``omega``'s codomain and ``B`` on its domain; norms are
    quadrature L2 norms on the codomain.
    """
    om = omega.matrix if hasattr(omega, "matrix") else np.asarray(omega)
    w = A.codomain.weights
    worst = 0.0
    for phi in bank:
        phi = np.asarray(phi)
        lhs = A.matrix @ (om @ phi)
        rhs = om @ (B.matrix @ phi)
        num = np.sqrt(np.sum(w * np.abs(lhs - rhs) ** 2))
        den = max(np.sqrt(np.sum(w * np.abs(rhs) ** 2)), 1e-300)
        worst = max(worst, float(num / den))
    return worst


def bump_bank(grid, count=10, seed=0, width=(0.08, 0.15)):
    """Narrow Gaussians well inside the grid box, negligible at both ends."""
    rng = np.random.default_rng(seed)
    ax = grid.axes[0]
    x = grid.nodes[:, 0]
    out = []
    for _ in range(count):
        s = rng.uniform(*width)
        m = rng.uniform(ax.lo + 7 * s, ax.hi - 7 * s)
        out.append(np.exp(-0.5 * ((x - m) / s) ** 2))
    return out


def band_limited_bank(grid, count=10, seed=0, max_mode=6):
    """Seeded real trigonometric polynomials on a periodic 1-D grid."""
    ax = grid.axes[0]
    if not ax.periodic:
        raise GridError("band-limited bank needs a periodic axis")
    rng = np.random.default_rng(seed)
    x = grid.nodes[:, 0]
    k0 = 2.0 * np.pi / ax.length
    out = []
    for _ in range(count):
        modes = np.arange(1, max_mode + 1)
        amp = rng.standard_normal(max_mode) / modes
        phase = rng.uniform(0, 2 * np.pi, max_mode)
        out.append(sum(A * np.cos(m * k0 * x + p) for A, m, p in zip(amp, modes, phase)))
    return out


# -- derivative and product preservation --------------------------------------


def default_periodic_grid():
    """Periodic line ``[-16, 16)`` with 64 points, wide enough for Gaussian kernels."""
    return make_grid([(-16.0, 16.0, 64, True)])


def shape_kernel(f_shape, name="shape"):
    """Translation-invariant kernel ``omega(x, y) = f(x - y)`` in one variable."""
    return Kernel(name, profile=lambda d: np.asarray(f_shape(d[..., 0])), symmetric=False)


def verify_derivative_preservation(f_shape, grid=None, bank=None, orders=(1, 2)):
    """Residuals ``||Omega^{-1} D^q Omega phi - D^q phi|| / ||D^q phi||``.

    Parameters
    ----------
    f_shape
        Function of one variable (``omega = f(x - y)``) or a :class:`Kernel`.
    grid
        1-D grid; defaults to :func:`default_periodic_grid`.
    bank
        Test functions; defaults to :func:`band_limited_bank` on ``grid``.

    Returns
    -------
    dict
        ``residual``: ``{q: max over bank}``, ``max``: largest of them,
        ``condition``: cond of the assembled operator.
    """
    grid = default_periodic_grid() if grid is None else grid
    kernel = f_shape if isinstance(f_shape, Kernel) else shape_kernel(f_shape)
    omega = Transform(assemble(kernel, grid))
    bank = band_limited_bank(grid) if bank is None else bank
    d1 = derivative_op(grid)
    res = {}
    for q in orders:
        dq = LinOp(np.linalg.matrix_power(d1.matrix, q), grid, grid)
        conj = conjugate_operator(omega, dq)
        worst = 0.0
        for phi in bank:
            ref = dq.matrix @ phi
            err = conj.matrix @ phi - ref
            worst = max(worst, float(np.linalg.norm(err) / max(np.linalg.norm(ref), 1e-300)))
        res[q] = worst
    return {"residual": res, "max": max(res.values()), "condition": omega.condition}


def product_noninvariance_demo(a, omega=None, grid=None, bank=None):
    """Residual of multiplication under conjugation by ``omega``.

    Returns ``max ||omega^{-1}(a (omega phi)) - a phi|| / ||a phi||`` over the
    bank; it vanishes only when ``a`` is constant or ``omega`` is itself a
    multiplication operator.

    ``a`` is a callable of the coordinate or an array of node values;
    ``omega`` defaults to the Gaussian smoothing kernel on ``grid``.
    """
    grid = default_periodic_grid() if grid is None else grid
    if omega is None:
        omega = assemble(gauss_rho(), grid)
    elif isinstance(omega, Kernel):
        omega = assemble(omega, grid)
    omega = _transform(omega)
    bank = band_limited_bank(grid) if bank is None else bank
    mult = multiplication_op(grid, a)
    conj = conjugate_operator(omega, mult)
    worst = 0.0
    for phi in bank:
        ref = mult.matrix @ phi
        err = conj.matrix @ phi - ref
        worst = max(worst, float(np.linalg.norm(err) / max(np.linalg.norm(ref), 1e-300)))
    return {"residual": worst, "condition": omega.condition}


# -- (1,2)-tensors -------------------------------------------------------------


def delta_delta_tensor(n):
    """``c[x, u, v] = 1`` iff ``x == u == v``: ``c(phi, psi) = phi * psi`` pointwise."""
    c = np.zeros((n, n, n))
    idx = np.arange(n)
    c[idx, idx, idx] = 1.0
    return c


def apply_12tensor(c, phi, psi=None):
    """``c(phi, psi)_x = sum_uv c[x, u, v] phi_u psi_v`` (weights folded into ``c``)."""
    psi = phi if psi is None else psi
    return np.einsum("xuv,u,v->x", c, phi, psi)


def pushforward_12tensor(omega, c):
    """``c~[x, a, b] = (omega^{-1})[x, z] c[z, u, v] omega[u, a] omega[v, b]``."""
    omega = _transform(omega)
    c = np.asarray(c)
    n = omega.matrix.shape[0]
    if n > MAX_TENSOR_POINTS:
        raise GridError(f"(1,2)-tensors need n <= {MAX_TENSOR_POINTS}, got {n}")
    if c.shape != (n, n, n):
        raise KernelError(f"tensor shape {c.shape} does not match n={n}")
    w = omega.matrix
    return np.einsum("xz,zuv,ua,vb->xab", omega.inverse.matrix, c, w, w, optimize=True)
