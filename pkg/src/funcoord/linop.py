"""Dense linear operators between grid function spaces."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import SideError, SingularTransformError

PRIMAL = "primal"
DUAL = "dual"

#: operators whose 2-norm condition number exceeds this are rejected as singular
SINGULAR_CONDITION = 1e12


def flip(side):
    return DUAL if side == PRIMAL else PRIMAL


@dataclass(frozen=True, eq=False)
class LinOp:
    """Matrix acting on sampled functions.

    ``matrix[i, j]`` maps the value at node ``j`` of ``domain`` to node ``i``
    of ``codomain``. Quadrature weights are already folded into the columns
    where the operator comes from a kernel, so composition is plain matrix
    multiplication.

    ``sides`` is the (input, output) side contract.
    """

    matrix: np.ndarray
    domain: object
    codomain: object
    sides: tuple = (PRIMAL, PRIMAL)

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2:
            raise ValueError("operator matrix must be 2-D")
        if m.shape != (self.codomain.size, self.domain.size):
            raise ValueError(
                f"matrix shape {m.shape} does not match grids "
                f"({self.codomain.size}, {self.domain.size})"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self):
        return self.matrix.shape

    def __call__(self, f):
        from .grid import SampledFunction

        if f.grid is not self.domain and f.grid != self.domain:
            raise ValueError("function grid does not match operator domain")
        if f.side != self.sides[0]:
            raise SideError(f"operator expects a {self.sides[0]} vector, got {f.side}")
        return SampledFunction(self.codomain, self.matrix @ f.values, self.sides[1])

    def __matmul__(self, other):
        if isinstance(other, LinOp):
            if other.codomain != self.domain:
                raise ValueError("cannot compose: grid mismatch")
            if other.sides[1] != self.sides[0]:
                raise SideError("cannot compose: side mismatch")
            return LinOp(self.matrix @ other.matrix, other.domain, self.codomain,
                         (other.sides[0], self.sides[1]))
        return self.matrix @ other

    def __add__(self, other):
        if not isinstance(other, LinOp):
            return NotImplemented
        if other.domain != self.domain or other.codomain != self.codomain:
            raise ValueError("cannot add operators on different grids")
        return LinOp(self.matrix + other.matrix, self.domain, self.codomain, self.sides)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, c):
        return LinOp(c * self.matrix, self.domain, self.codomain, self.sides)

    def adjoint(self):
        """Adjoint with respect to the duality pairing.

        ``pairing(A* f, phi) == pairing(f, A phi)``; the pairing is
        ``sum(w * conj(f) * phi)``, so ``A* = W_in^{-1} A^H W_out``.
        """
        w_in = self.domain.weights
        w_out = self.codomain.weights
        m = (self.matrix.conj().T * w_out[None, :]) / w_in[:, None]
        return LinOp(m, self.codomain, self.domain, (flip(self.sides[1]), flip(self.sides[0])))

    def is_endomorphism(self):
        return self.domain == self.codomain and self.sides[0] == self.sides[1]


def condition_number(matrix):
    return float(np.linalg.cond(matrix))


def operator_norm_estimate(matrix, steps=20, seed=0):
    """2-norm estimate by power iteration on ``A^H A``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(matrix.shape[1]) + 1j * rng.standard_normal(matrix.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(steps):
        u = matrix @ v
        est = np.linalg.norm(u)
        if est == 0.0:
            return 0.0
        v = matrix.conj().T @ u
        v /= np.linalg.norm(v)
    return float(est)


class Transform:
    """Invertible operator with cached inverse and adjoint.

    The condition number is computed once; construction fails above
    :data:`SINGULAR_CONDITION`.
    """

    def __init__(self, op: LinOp, max_condition=SINGULAR_CONDITION):
        if op.shape[0] != op.shape[1]:
            raise SingularTransformError("non-square operator cannot be a transform", np.inf)
        self.op = op
        self.condition = condition_number(op.matrix)
        if not np.isfinite(self.condition) or self.condition > max_condition:
            raise SingularTransformError(
                f"operator is numerically singular (condition {self.condition:.3e} "
                f"> {max_condition:.1e})",
                self.condition,
            )

    @property
    def matrix(self):
        return self.op.matrix

    @property
    def domain(self):
        return self.op.domain

    @property
    def codomain(self):
        return self.op.codomain

    @property
    def sides(self):
        return self.op.sides

    @cached_property
    def _lu(self):
        return sla.lu_factor(self.op.matrix)

    def solve(self, b):
        """Apply the inverse to a raw value array (vector or matrix)."""
        return sla.lu_solve(self._lu, b)

    @cached_property
    def inverse(self):
        inv = self.solve(np.eye(self.op.shape[0], dtype=np.result_type(self.op.matrix, float)))
        return LinOp(inv, self.codomain, self.domain, (self.sides[1], self.sides[0]))

    @cached_property
    def adjoint(self):
        return self.op.adjoint()

    def __call__(self, f):
        return self.op(f)

    def __matmul__(self, other):
        return self.op @ other

    def inverse_residual(self):
        """``||A A^{-1} - I|| / ||A||`` with norms estimated by power iteration."""
        n = self.op.shape[0]
        r = self.op.matrix @ self.inverse.matrix - np.eye(n)
        return operator_norm_estimate(r) / max(operator_norm_estimate(self.op.matrix), 1e-300)
