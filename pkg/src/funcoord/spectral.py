"""Generalized eigenproblems, proper bases and metrics built from operators.

The generalized problem asks for dual vectors ``f`` with
``pairing(f, A phi) == lam * pairing(f, phi)`` for every ``phi``. With the
sesquilinear pairing ``sum w conj(f) phi`` this is the ordinary eigenproblem
``A^H u = conj(lam) u`` for ``u = W f``.

A proper basis of an operator that is Hermitian in a space is a transform
``kappa`` to an index grid in which the operator is diagonal; it is built
from the generalized Hermitian eigenproblem ``(M A) v = lam M v``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NonHermitianError, SingularTransformError
from .grid import SampledFunction, index_grid
from .linop import DUAL, PRIMAL, LinOp, Transform
from .spaces import hermitian_part, space_from_transform
from .transforms import hermiticity_defect

#: eigenvalues closer than this are treated as one degenerate cluster
CLUSTER_GAP = 1e-10
#: eigenvector matrices with larger condition numbers count as defective
DEFECTIVE_CONDITION = 1e12
#: decimals used when sorting eigenvalues, so rounding noise cannot reorder ties
SORT_DECIMALS = 9


@dataclass(frozen=True)
class GeneralizedEigenpair:
    eigenvalue: complex
    functional: SampledFunction
    residual: float


@dataclass(frozen=True)
class ProperBasisResult:
    """Diagonalizing transform of an operator Hermitian in ``space``.

    Attributes
    ----------
    kappa
        Transform from the space's grid to the index grid, ``kappa = V^H M``.
    eigenvalues
        Sorted eigenvalues as a function on the index grid.
    residual
        Off-diagonal Frobenius mass of ``kappa A kappa^{-1}``.
    vectors
        Eigenvector matrix ``V = kappa^{-1}`` with ``V^H M V = I``.
    """

    kappa: Transform
    eigenvalues: SampledFunction
    residual: float
    vectors: np.ndarray


def offdiag_mass(m):
    """``||m - diag(m)||_F / ||m||_F``."""
    m = np.asarray(m)
    total = np.linalg.norm(m)
    if total == 0:
        return 0.0
    return float(np.linalg.norm(m - np.diag(np.diag(m))) / total)


def fix_phase(v, rel=1e-8):
    """Scale ``v`` to unit max-modulus with its first significant entry real positive."""
    v = np.asarray(v, dtype=complex)
    amax = np.max(np.abs(v))
    if amax == 0:
        return v
    first = int(np.flatnonzero(np.abs(v) > rel * amax)[0])
    return v * (np.abs(v[first]) / v[first]) / amax


def eigen_clusters(values, gap=CLUSTER_GAP):
    """Group sorted eigenvalues into ``(mean value, multiplicity)`` clusters."""
    values = np.asarray(values)
    out = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or abs(values[i] - values[i - 1]) > gap * max(1.0, abs(values[i])):
            block = values[start:i]
            out.append((complex(np.mean(block)), i - start))
            start = i
    return out


def generalized_eigs(A, space=None, tol=1e-8):
    """All eigenfunctionals of ``A``, sorted by eigenvalue (real part, then imaginary).

    Parameters
    ----------
    A
        Endomorphism on primal vectors of a grid.
    space
        Optional space whose grid must match; the pairing does not depend
        on the metric, so it is used only for validation.
    tol
        Declared residual tolerance (reported, not enforced).

    Returns
    -------
    list of GeneralizedEigenpair
        Functionals normalised to max-modulus 1 with the first significant
        entry real positive. The residual is the exact sup over unit-L2
        probes ``phi`` of ``|pairing(f, A phi) - lam pairing(f, phi)|``.

    Raises
    ------
    SingularTransformError
        If the eigenvector matrix is numerically singular (defective ``A``).
    """
    if not A.is_endomorphism() or A.sides[0] != PRIMAL:
        raise ValueError("generalized_eigs needs an endomorphism on primal vectors")
    grid = A.domain
    if space is not None and space.grid != grid:
        raise ValueError("operator and space live on different grids")
    w = grid.weights
    mu, u = sla.eig(A.matrix.conj().T)
    cond = np.linalg.cond(u)
    if not np.isfinite(cond) or cond > DEFECTIVE_CONDITION:
        raise SingularTransformError(
            f"eigenvector matrix is numerically singular (condition {cond:.3e}); "
            "operator looks defective", cond)
    lam = np.conj(mu)
    pairs = []
    a = A.matrix
    for k in range(len(lam)):
        f = fix_phase(u[:, k] / w)
        row = (np.conj(f) * w) @ a - lam[k] * (np.conj(f) * w)
        res = float(np.sqrt(np.sum(np.abs(row) ** 2 / w)))
        pairs.append((lam[k], f, res))
    pairs.sort(key=lambda p: (round(p[0].real, SORT_DECIMALS), round(p[0].imag, SORT_DECIMALS),
                              tuple(np.round(np.real(p[1]), 6))))
    return [GeneralizedEigenpair(complex(l), SampledFunction(grid, f, DUAL), r) for l, f, r in pairs]


def proper_basis(A, space, tol=1e-8):
    """Transform to an index grid in which ``A`` acts by multiplication.

    Raises :class:`NonHermitianError` if ``A`` is not Hermitian in ``space``
    to relative tolerance ``tol``.
    """
    defect = hermiticity_defect(A, space)
    if defect > tol:
        raise NonHermitianError(f"operator is not Hermitian in this space (defect {defect:.3e})")
    m = space.gram
    h = hermitian_part(m @ A.matrix)
    lam, v = sla.eigh(h, m)
    n = len(lam)
    idx = index_grid(n)
    kappa_m = v.conj().T @ m
    kappa = Transform(LinOp(kappa_m, space.grid, idx))
    diag = kappa_m @ A.matrix @ v
    return ProperBasisResult(kappa, SampledFunction(idx, lam.astype(float)), offdiag_mass(diag), v)


def verify_proper_basis_orthogonality(result, space, basis=None):
    """Push the metric into the basis ``omega = kappa^{-1}`` (or ``basis``).

    Returns ``{"offdiag": mass, "diagonal": entries}`` for ``omega* G omega``.
    """
    if basis is None:
        omega = result.vectors
    else:
        omega = basis.matrix if hasattr(basis, "matrix") else np.asarray(basis)
    # omega maps unit-weight index coordinates to the grid, so omega* G omega = omega^H M omega
    g = omega.conj().T @ space.gram @ omega
    return {"offdiag": offdiag_mass(g), "diagonal": np.real(np.diag(g))}


def spectral_decomposition(phi, result):
    """Coefficients ``kappa phi`` on the index grid.

    Returns ``(coefficients, c)`` with ``c = 1 / cond(kappa)`` the
    completeness constant in ``||kappa phi|| >= c ||kappa|| ||phi||``.
    """
    coeffs = result.kappa(phi)
    return coeffs, 1.0 / result.kappa.condition


def metric_from_unbounded(A, space=None):
    """Space ``A(L2)`` with ``(f, g) = (A^{-1} f, A^{-1} g)_L2``.

    ``A`` becomes an isometry from L2 onto it, so ``||A f|| = ||f||_L2``.
    Raises :class:`SingularTransformError` for a singular ``A``.
    """
    if space is not None and (space.provenance != "l2" or space.grid != A.domain):
        raise ValueError("metric_from_unbounded starts from the L2 space of A's grid")
    return space_from_transform(Transform(A))
