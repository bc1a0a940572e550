"""Coordinate Hilbert spaces on grids.

A space is a grid together with a metric operator ``G`` that maps vectors
of the space to the opposite pairing side. Inner products are
``inner(f, g) = pairing(G f, g)``; in matrix form this is ``f^H M g`` with
the Hermitian Gram matrix ``M = W G`` (``W`` the quadrature weights).
The dual space carries the inverse metric.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import GridError, IndefiniteMetricError, SideError
from .grid import SampledFunction, derivative_op
from .kernels import assemble
from .linop import DUAL, PRIMAL, LinOp, Transform, flip

#: relative floor for the smallest Gram eigenvalue, ``lambda_min > rtol * lambda_max``
SPD_RTOL = 1e-13


def hermitian_part(m):
    return 0.5 * (m + m.conj().T)


class CoordinateSpace:
    """Grid plus a positive-definite metric operator.

    Parameters
    ----------
    grid
        Underlying grid.
    metric
        Matrix of ``G``, mapping ``side`` vectors to the opposite side.
    side
        Pairing side of the vectors the space holds.
    provenance
        Free-form tag: ``"l2"``, ``"transform"``, ``"kernel:<family>"``,
        ``"dual:<tag>"``.
    inverse
        Matrix of ``G^{-1}`` when known in closed form; computed from the
        Cholesky factor otherwise.
    check
        Run the eigenvalue scan (raises :class:`IndefiniteMetricError`).
    """

    def __init__(self, grid, metric, side=PRIMAL, provenance="custom", inverse=None,
                 check=True, spd_rtol=SPD_RTOL):
        metric = np.asarray(metric)
        if metric.shape != (grid.size, grid.size):
            raise GridError("metric matrix does not match the grid")
        self.grid = grid
        self.side = side
        self.provenance = provenance
        self.spd_rtol = spd_rtol
        self._metric = metric
        self._inverse = None if inverse is None else np.asarray(inverse)
        self.gram = hermitian_part(grid.weights[:, None] * metric)
        ev = sla.eigvalsh(self.gram)
        self.min_eigenvalue = float(ev[0])
        self.max_eigenvalue = float(ev[-1])
        if check and not self.min_eigenvalue > spd_rtol * max(self.max_eigenvalue, 0.0):
            raise IndefiniteMetricError(
                f"metric ({provenance}) is not positive-definite on the grid: "
                f"min eigenvalue {self.min_eigenvalue:.3e}, max {self.max_eigenvalue:.3e}",
                self.min_eigenvalue,
            )

    def __repr__(self):
        return f"CoordinateSpace({self.provenance}, side={self.side}, n={self.grid.size})"

    @property
    def metric(self):
        """``G`` as an operator from this side to the opposite side."""
        return LinOp(self._metric, self.grid, self.grid, (self.side, flip(self.side)))

    @cached_property
    def _cho(self):
        return sla.cho_factor(self.gram, lower=True)

    @cached_property
    def inverse_metric_matrix(self):
        if self._inverse is not None:
            return self._inverse
        # G^{-1} = M^{-1} W
        return sla.cho_solve(self._cho, np.diag(self.grid.weights).astype(self.gram.dtype))

    @property
    def inverse_metric(self):
        return LinOp(self.inverse_metric_matrix, self.grid, self.grid, (flip(self.side), self.side))

    @property
    def condition(self):
        return self.max_eigenvalue / self.min_eigenvalue if self.min_eigenvalue > 0 else np.inf

    def _check(self, f):
        if f.grid != self.grid:
            raise GridError("vector lives on a different grid")
        if f.side != self.side:
            raise SideError(f"space holds {self.side} vectors, got {f.side}")

    def inner(self, f, g):
        self._check(f)
        self._check(g)
        val = np.conj(f.values) @ (self.gram @ g.values)
        if np.isrealobj(val):
            return float(val)
        return complex(val)

    def norm(self, f):
        self._check(f)
        v = np.real(np.conj(f.values) @ (self.gram @ f.values))
        return float(np.sqrt(max(v, 0.0)))

    def riesz(self, f):
        """Apply ``G``: a vector of this space to its representative on the other side."""
        self._check(f)
        return SampledFunction(self.grid, self._metric @ f.values, flip(self.side))

    def riesz_inv(self, f):
        """Solve ``G x = f`` with the cached Cholesky factor of the Gram matrix."""
        if f.grid != self.grid:
            raise GridError("vector lives on a different grid")
        if f.side != flip(self.side):
            raise SideError(f"expected a {flip(self.side)} vector, got {f.side}")
        x = sla.cho_solve(self._cho, self.grid.weights * f.values)
        return SampledFunction(self.grid, x, self.side)


def l2_space(grid, side=PRIMAL):
    n = grid.size
    return CoordinateSpace(grid, np.eye(n), side, "l2", inverse=np.eye(n))


def space_from_transform(rho, check=True):
    """Space ``rho(L2)`` with ``(phi, psi) = (rho^{-1} phi, rho^{-1} psi)_L2``.

    ``rho`` is a :class:`~funcoord.linop.Transform` (or a :class:`LinOp`,
    which is wrapped and condition-checked) out of an L2 space. The dual
    metric ``rho rho*`` is formed directly rather than by inversion.
    """
    if not isinstance(rho, Transform):
        rho = Transform(rho)
    grid = rho.codomain
    w_in = rho.domain.weights
    w = grid.weights
    r = rho.matrix
    rinv = rho.inverse.matrix
    gram = rinv.conj().T @ (w_in[:, None] * rinv)
    metric = gram / w[:, None]
    dual_metric = (r / w_in[None, :]) @ (r.conj().T * w[None, :])
    return CoordinateSpace(grid, metric, PRIMAL, "transform", inverse=dual_metric, check=check)


def space_from_kernel(kernel, grid, side=PRIMAL, check=True):
    """Space whose metric (``side="primal"``) or dual metric (``side="dual"``)
    is the assembled kernel operator."""
    op = assemble(kernel, grid)
    return CoordinateSpace(grid, op.matrix, side, f"kernel:{kernel.family}", check=check)


def dual_of(space):
    return CoordinateSpace(
        space.grid,
        space.inverse_metric_matrix,
        flip(space.side),
        f"dual:{space.provenance}",
        inverse=space._metric,
        check=False,
    )


def schwartz_decay_report(rho, samples, p=3):
    """Suprema ``sup_x |x^k d^q phi / dx^q|`` for ``phi = rho f``, ``k, q <= p``.

    Parameters
    ----------
    rho
        Smoothing operator (LinOp or Transform) on a 1-D grid.
    samples
        Iterable of raw value arrays ``f``.
    p
        Highest power and derivative order (at most 3).

    Returns
    -------
    dict
        ``sup``: array ``(len(samples), p+1, p+1)`` indexed ``[sample, k, q]``;
        ``bound``: empirical ``M[k, q] = max sup / ||f||_L2`` over nonzero
        samples (zeros if every sample vanishes); ``finite``: bool.
    """
    if p > 3 or p < 0:
        raise ValueError("p must be in 0..3")
    op = rho.op if isinstance(rho, Transform) else rho
    grid = op.codomain
    if grid.dim != 1:
        raise GridError("decay report needs a 1-D grid")
    x = grid.nodes[:, 0]
    ders = [np.eye(grid.size)]
    if p:
        d1 = derivative_op(grid).matrix
        for _ in range(p):
            ders.append(d1 @ ders[-1])
    w_in = op.domain.weights
    sups, norms = [], []
    for f in samples:
        f = np.asarray(f)
        phi = op.matrix @ f
        table = np.empty((p + 1, p + 1))
        for q in range(p + 1):
            dq = ders[q] @ phi
            for k in range(p + 1):
                table[k, q] = np.max(np.abs(x**k * dq))
        sups.append(table)
        norms.append(float(np.sqrt(np.real(np.sum(w_in * np.abs(f) ** 2)))))
    sups = np.array(sups)
    norms = np.array(norms)
    nz = norms > 0
    bound = np.max(sups[nz] / norms[nz, None, None], axis=0) if np.any(nz) else np.zeros((p + 1, p + 1))
    return {"sup": sups, "bound": bound, "finite": bool(np.all(np.isfinite(sups)))}
