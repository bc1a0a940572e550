"""Delta-function embeddings of parameter manifolds and the metrics they induce.

A point ``a`` of a parameter domain is sent to the evaluation functional
``delta_a``; a smooth kernel ``k`` then gives the squared distance
``k(a,a) - 2 k(a,b) + k(b,b)`` between embedded points and, infinitesimally,
the induced metric ``g(a) = d^2 k / dx dy`` on the diagonal. Paths are
handled on the parameter side in closed form; grids and mollified deltas
are used only to cross-check those closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError, KernelError
from .grid import _fd4_matrix
from .kernels import chordal_circle, gram_closed_form, kernel_matrix, mixed_hessian

MAX_GRAM_POINTS = 8
#: time step for finite differences of mollified functionals along a path
PATH_FD_STEP = 1e-3


def induced_metric(kernel, a, **kw):
    """Symmetrised mixed Hessian of ``kernel`` on the diagonal at ``a``."""
    h = np.atleast_2d(mixed_hessian(kernel, a, **kw))
    return 0.5 * (h + h.T)


@dataclass
class EmbeddedManifold:
    """Parameter grid plus kernel, with a per-node cache of the induced metric."""

    grid: object
    kernel: object
    _cache: dict = field(default_factory=dict, repr=False)

    def metric_at(self, k):
        if k not in self._cache:
            self._cache[k] = induced_metric(self.kernel, self.grid.nodes[k])
        return self._cache[k]

    def metrics(self):
        return np.array([self.metric_at(k) for k in range(self.grid.size)])


@dataclass(frozen=True)
class DeltaPath:
    """Curve ``a(t)`` in parameter space sampled at ``len(times)`` steps.

    ``points`` and ``velocity`` have shape ``(T, n)``.
    """

    times: np.ndarray
    points: np.ndarray
    velocity: np.ndarray
    kernel: object

    @property
    def dim(self):
        return self.points.shape[1]

    @classmethod
    def from_function(cls, a, t0, t1, steps, kernel, velocity=None, box=None):
        """Sample ``a(t)`` (vectorised, returns ``(T, n)`` or ``(T,)``).

        Without an analytic ``velocity`` the derivative is taken with
        4th-order differences. ``box`` is a sequence of ``(lo, hi)`` per
        coordinate; leaving it raises :class:`GridError`.
        """
        if steps < 5:
            raise GridError("a path needs at least 5 steps")
        t = np.linspace(t0, t1, steps)
        pts = _as_2d(a(t), steps)
        if velocity is not None:
            vel = _as_2d(velocity(t), steps)
        else:
            d = _fd4_matrix(steps, t[1] - t[0], periodic=False)
            vel = d @ pts
        if box is not None:
            for k, (lo, hi) in enumerate(box):
                if np.any(pts[:, k] < lo) or np.any(pts[:, k] > hi):
                    raise GridError(f"path leaves the domain along coordinate {k}")
        return cls(t, pts, vel, kernel)


def _as_2d(v, steps):
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] != steps and v.shape[-1] == steps:
        v = v.T
    return v * np.ones((steps, 1))


def path_quadratic_form(path):
    """``q(t) = g(a(t))[adot, adot]``; indefinite kernels allowed."""
    q = np.empty(len(path.times))
    for i, (a, v) in enumerate(zip(path.points, path.velocity)):
        q[i] = v @ induced_metric(path.kernel, a) @ v
    return q


def definiteness_scan(kernel, a, directions=64):
    """Range of ``g(a)[u, u]`` over unit directions ``u`` (a pencil in the first two axes
    for ``n >= 2``). Returns ``(min, max)``; both signs mean the form is indefinite."""
    g = induced_metric(kernel, a)
    n = g.shape[0]
    th = np.linspace(0.0, 2 * np.pi, directions, endpoint=False)
    u = np.zeros((directions, n))
    u[:, 0] = np.cos(th)
    if n > 1:
        u[:, 1] = np.sin(th)
    q = np.einsum("ti,ij,tj->t", u, g, u)
    return float(q.min()), float(q.max())


def _mollifier_gradient(grid, a, L):
    d = grid.nodes - a[None, :]
    r2 = np.sum(d * d, axis=1)
    f = (L / math.sqrt(math.pi)) ** grid.dim * np.exp(-(L * L) * r2)
    return -2.0 * (L * L) * d * f[:, None]  # d f_L(x - a) / dx


def _check_resolved(grid, L):
    h = max(ax.spacing for ax in grid.axes)
    # a width 3/L spanning fewer than 4 cells loses the quadrature accuracy
    if 3.0 / L < 4.0 * h:
        raise GridError(f"mollifier with L={L} is under-resolved on this grid")


def path_norm_crosscheck(path, grid, schedule=(4, 8, 16, 32), index=None):
    """Compare ``q(t)`` with the H-norm of the mollified tangent vector.

    The tangent of ``t -> f_L(x - a(t))`` is ``-grad f_L(x - a) . adot``;
    its squared norm ``v^T W K W v`` tends to ``q(t)`` like ``1/L^2``.
    The schedule values are extrapolated by Richardson steps in ``1/L^2``.

    Returns
    -------
    dict
        ``values`` (per L), ``extrapolated``, ``quadratic_form``,
        ``relative_error`` (absolute when the form vanishes), ``order``
        (observed convergence order in ``1/L`` from the last three values).
    """
    if path.dim != grid.dim:
        raise GridError("path and grid dimensions differ")
    index = len(path.times) // 2 if index is None else index
    a = path.points[index]
    v = path.velocity[index]
    if any(nxt != 2 * cur for cur, nxt in zip(schedule, schedule[1:])):
        raise ValueError("the L schedule must double at every step")
    for L in schedule:
        _check_resolved(grid, L)
    kmat = kernel_matrix(path.kernel, grid.nodes)
    w = grid.weights
    vals = []
    for L in schedule:
        tangent = _mollifier_gradient(grid, a, L) @ (-v)
        u = w * tangent
        vals.append(float(u @ kmat @ u))
    vals = np.array(vals)
    ext = vals.copy()
    # Richardson table in 1/L^2 for a doubling schedule: removes orders 2, 4, ...
    for level in range(1, len(schedule)):
        r = 4.0**level
        ext = (r * ext[1:] - ext[:-1]) / (r - 1.0)
    extrapolated = float(ext[0])
    q = float(v @ induced_metric(path.kernel, a) @ v)
    err = abs(extrapolated - q) / abs(q) if q != 0 else abs(extrapolated)
    order = math.nan
    if len(vals) >= 3:
        d1, d2 = vals[-3] - vals[-2], vals[-2] - vals[-1]
        if d1 != 0 and d2 != 0:
            order = math.log(abs(d1 / d2)) / math.log(schedule[-1] / schedule[-2])
    return {"values": vals, "extrapolated": extrapolated, "quadratic_form": q,
            "relative_error": float(err), "order": order, "schedule": tuple(schedule)}


def gram_deltas(kernel, points):
    """Gram matrix ``k(a_i, a_j)`` of up to 8 distinct embedded points.

    Returns ``{"gram", "min_eigenvalue", "min_distance"}``; raises
    :class:`KernelError` on duplicate points.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    m = pts.shape[0]
    if m > MAX_GRAM_POINTS:
        raise KernelError(f"at most {MAX_GRAM_POINTS} points, got {m}")
    dmin = math.inf
    for i in range(m):
        for j in range(i + 1, m):
            dmin = min(dmin, float(np.linalg.norm(pts[i] - pts[j])))
    if dmin < 1e-12:
        raise KernelError("duplicate points give a singular Gram matrix")
    gram = kernel_matrix(kernel, pts)
    ev = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    return {"gram": gram, "min_eigenvalue": float(ev[0]), "min_distance": dmin}


def linear_structure_continuity(kernel, a, a_seq, lam=1.0, lam_seq=None):
    """``||lam delta_a - lam_k delta_{a_k}||^2`` along a sequence.

    Returns ``{"values", "distances", "order"}`` where ``order`` is the
    least-squares slope of ``log value`` against ``log |a - a_k|`` (NaN
    when the points do not move).
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    a_seq = [np.atleast_1d(np.asarray(p, dtype=float)) for p in a_seq]
    lam_seq = [lam] * len(a_seq) if lam_seq is None else list(lam_seq)
    vals, dist = [], []
    for ak, lk in zip(a_seq, lam_seq):
        vals.append(gram_closed_form(kernel, [lam, -lk], [a, ak]))
        dist.append(float(np.linalg.norm(a - ak)))
    vals, dist = np.array(vals), np.array(dist)
    order = math.nan
    ok = (dist > 0) & (vals > 0)
    if np.count_nonzero(ok) >= 2:
        order = float(np.polyfit(np.log(dist[ok]), np.log(vals[ok]), 1)[0])
    return {"values": vals, "distances": dist, "order": order}


def circle_embedding_check(grid, functions=None, kernel=None):
    """Gluing and metric checks for the circle as a periodic 1-D grid.

    Returns ``{"glued", "pairing_gap", "metric", "metric_spread",
    "fd_deviation"}``.
    """
    if grid.dim != 1 or not grid.axes[0].periodic:
        raise GridError("circle check needs a periodic 1-D grid")
    kernel = chordal_circle() if kernel is None else kernel
    ax = grid.axes[0]
    i0 = grid.index_of([ax.lo])
    i1 = grid.index_of([ax.lo + ax.length])
    functions = functions or []
    gap = 0.0
    for phi in functions:
        v = np.asarray(phi(grid.nodes[:, 0]))
        # pairing(grid_delta(k), phi) is exactly phi_k
        gap = max(gap, float(abs(v[i0] - v[i1])))
    metric = np.array([induced_metric(kernel, x)[0, 0] for x in grid.nodes])
    fd = np.array([mixed_hessian(kernel, x, force_fd=True)[0, 0] for x in grid.nodes[::8]])
    return {"glued": i0 == i1, "pairing_gap": gap, "metric": metric,
            "metric_spread": float(np.ptp(metric)), "fd_deviation": float(np.max(np.abs(fd - metric[::8])))}


def _complex_step_grad(f, x, h=1e-30):
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for k in range(x.size):
        xc = x.astype(complex)
        xc[k] += 1j * h
        g[k] = np.imag(f(xc)) / h
    return g


def directional_derivative_check(f1, f2, path, grid, L=8.0, f0=0.0, index=None):
    """``d/dt F(delta_{a(t)})`` for ``F(phi) = f0 + <f1, phi> + <f2, phi x phi>``.

    Two routes:

    * chain rule on the parameter side, ``grad(f1 + f2(a, a)) . adot``,
      with complex-step gradients (``f1``, ``f2`` must be analytic,
      vectorised over leading axes and accept complex arguments; points
      are arrays whose last axis holds the coordinates);
    * central differences in ``t`` of the grid-quadrature value of ``F`` on
      mollified deltas at ``L`` and ``2L``, combined by one Richardson step.

    ``f2`` may be ``None``. Returns ``{"chain", "mollified", "difference"}``.
    """
    index = len(path.times) // 2 if index is None else index
    a = path.points[index]
    v = path.velocity[index]
    if path.dim != grid.dim:
        raise GridError("path and grid dimensions differ")

    def on_param(p):
        val = f1(p)
        if f2 is not None:
            val = val + f2(p, p)
        return val

    chain = float(_complex_step_grad(on_param, a) @ v)

    x = grid.nodes
    f1_vals = np.asarray(f1(x), dtype=float) * np.ones(grid.size)
    w = grid.weights

    def functional(center, L):
        d = x - center[None, :]
        r2 = np.sum(d * d, axis=1)
        f = (L / math.sqrt(math.pi)) ** grid.dim * np.exp(-(L * L) * r2)
        active = f > 1e-18 * f.max()
        fw = (w * f)[active]
        val = f0 + fw @ f1_vals[active]
        if f2 is not None:
            xa = x[active]
            k2 = np.asarray(f2(xa[:, None, :], xa[None, :, :]), dtype=float)
            val += fw @ k2 @ fw
        return val

    derivs = []
    for Lk in (L, 2 * L):
        _check_resolved(grid, Lk)
        dt = PATH_FD_STEP
        vals = [functional(a + s * dt * v, Lk) for s in (-2, -1, 1, 2)]
        derivs.append((vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * dt))
    moll = (4 * derivs[1] - derivs[0]) / 3.0
    return {"chain": chain, "mollified": float(moll), "difference": float(abs(chain - moll))}
