"""Geometry of the punctured reference space with metric ``K / ||phi||^2``.

Points are complex vectors ``phi`` of a finite-dimensional space with the
plain l2 pairing. The Hermitian metric at ``phi`` is
``G(xi, eta) = xi^H K eta / ||phi||^2``; its real form on ``R^{2n}`` is
``G_R = 2 Re G``. The Levi-Civita connection of ``G_R`` is exposed as a
contraction ``Gamma(X, Y)``, and unitary evolution
``phi_t = exp(-i A t) phi_0`` with ``K = (A A^H)^{-1}`` is a geodesic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import IndefiniteMetricError, IntegrationError, NonHermitianError, SingularTransformError
from .linop import SINGULAR_CONDITION

MAX_DIM = 64
MIN_STEPS = 16
#: step of the directional differences in :func:`levi_civita_residual`
LC_FD_STEP = 1e-5


def _check_hermitian(m, tol=1e-12, what="matrix"):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NonHermitianError(f"{what} must be square")
    scale = max(np.linalg.norm(m), 1.0)
    if np.linalg.norm(m - m.conj().T) > tol * scale:
        raise NonHermitianError(f"{what} is not Hermitian")
    return m


class ProjectiveMetric:
    """Metric ``K / ||phi||^2`` at base point ``phi``.

    ``K`` must be Hermitian positive-definite; its Cholesky factor is cached
    and shared by :meth:`at`.
    """

    def __init__(self, K, phi, _cho=None):
        K = _check_hermitian(np.asarray(K, dtype=complex), what="K")
        if K.shape[0] > MAX_DIM:
            raise ValueError(f"dimension {K.shape[0]} exceeds {MAX_DIM}")
        phi = np.asarray(phi, dtype=complex)
        if phi.shape != (K.shape[0],):
            raise ValueError("base point has the wrong dimension")
        self.K = K
        self.phi = phi
        self.r2 = float(np.real(np.vdot(phi, phi)))
        if not self.r2 > 0:
            raise ValueError("metric is undefined at phi = 0")
        if _cho is None:
            try:
                _cho = sla.cho_factor(K, lower=True)
            except np.linalg.LinAlgError:
                ev = np.linalg.eigvalsh(K)
                raise IndefiniteMetricError("K is not positive-definite", float(ev[0])) from None
        self._cho = _cho

    @property
    def n(self):
        return self.phi.size

    def at(self, phi):
        """Same ``K`` at another base point."""
        return ProjectiveMetric(self.K, phi, _cho=self._cho)

    def solve(self, v):
        return sla.cho_solve(self._cho, v)

    @cached_property
    def k_inv_phi(self):
        return self.solve(self.phi)

    def value(self, xi, eta):
        """``G(xi, eta) = xi^H K eta / ||phi||^2``."""
        return complex(np.vdot(xi, self.K @ eta) / self.r2)

    def real_value(self, xi, eta):
        """``G_R = 2 Re G``."""
        return 2.0 * self.value(xi, eta).real


def christoffel_terms(metric, X, Y):
    """The three families of the connection contracted with ``X`` and ``Y``.

    Returns ``(t1, t2, t3)`` whose sum is ``Gamma(X, Y)``:

    * ``t1 = -(Y <phi, X> + X <phi, Y>) / (2 r^2)`` (holomorphic family),
    * ``t2 = -(X <Y, phi> - <Y, K X> K^{-1} phi) / (2 r^2)``,
    * ``t3 = -(Y <X, phi> - <X, K Y> K^{-1} phi) / (2 r^2)``,

    with ``<u, v> = u^H v`` and ``r^2 = ||phi||^2``.
    """
    phi, r2 = metric.phi, metric.r2
    kp = metric.k_inv_phi
    t1 = -(Y * np.vdot(phi, X) + X * np.vdot(phi, Y)) / (2 * r2)
    t2 = -(X * np.vdot(Y, phi) - np.vdot(Y, metric.K @ X) * kp) / (2 * r2)
    t3 = -(Y * np.vdot(X, phi) - np.vdot(X, metric.K @ Y) * kp) / (2 * r2)
    return t1, t2, t3


def christoffel_contract(metric, X, Y):
    """``Gamma(X, Y)`` of the Levi-Civita connection of ``G_R``.

    Equivalent collected form::

        Gamma(X, Y) = (-Re<phi, X> Y - Re<phi, Y> X + Re<X, K Y> K^{-1} phi) / r^2
    """
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    t1, t2, t3 = christoffel_terms(metric, X, Y)
    return t1 + t2 + t3


def levi_civita_residual(metric, X, Y, Z, step=LC_FD_STEP):
    """``2 G_R(Gamma(X,Y), Z) - [X G_R(Y,Z) + Y G_R(Z,X) - Z G_R(X,Y)]``.

    The directional derivatives of ``G_R`` move the base point and are
    taken by central differences with the given step. Returns
    ``(residual, scale)`` where ``scale`` is the largest term magnitude.
    """
    X, Y, Z = (np.asarray(v, dtype=complex) for v in (X, Y, Z))

    def dG(direction, u, v):
        hi = metric.at(metric.phi + step * direction).real_value(u, v)
        lo = metric.at(metric.phi - step * direction).real_value(u, v)
        return (hi - lo) / (2 * step)

    lhs = 2.0 * metric.real_value(christoffel_contract(metric, X, Y), Z)
    terms = (dG(X, Y, Z), dG(Y, Z, X), dG(Z, X, Y))
    rhs = terms[0] + terms[1] - terms[2]
    scale = max(abs(lhs), *(abs(t) for t in terms))
    return lhs - rhs, scale


def metric_derivative(metric, c, conjugate=False):
    """Wirtinger derivative of ``g = K / ||phi||^2`` along coordinate ``c``.

    ``d g / d phi^c = -K conj(phi_c) / ||phi||^4`` and
    ``d g / d conj(phi^c) = -K phi_c / ||phi||^4``.
    """
    p = metric.phi[c] if conjugate else np.conj(metric.phi[c])
    return -metric.K * p / metric.r2**2


def realify(K):
    """Real ``2n x 2n`` matrix ``K_R`` with ``X^T K_R Y = 2 Re(xi^H K eta)``
    for ``X = (Re xi, Im xi)``."""
    K = np.asarray(K, dtype=complex)
    a, b = K.real, K.imag
    return 2.0 * np.block([[a, -b], [b, a]])


def to_real(v):
    v = np.asarray(v, dtype=complex)
    return np.concatenate([v.real, v.imag])


def from_real(x):
    n = x.size // 2
    return x[:n] + 1j * x[n:]


@dataclass(frozen=True)
class GeodesicState:
    phi: np.ndarray
    dphi: np.ndarray
    tau: float = 0.0

    @property
    def norm_error(self):
        return float(abs(np.linalg.norm(self.phi) - 1.0))

    @property
    def tangency(self):
        return float(np.real(np.vdot(self.phi, self.dphi)))

    def check(self, tol=1e-9):
        if self.norm_error > tol:
            raise ValueError(f"state is off the unit sphere by {self.norm_error:.3e}")
        if abs(self.tangency) > tol:
            raise ValueError(f"velocity is not tangent to the sphere ({self.tangency:.3e})")
        return self


def random_hermitian(n, rng, min_abs_eig=0.1, max_tries=100):
    """Seeded random Hermitian ``(B + B^H) / (2 sqrt n)`` with eigenvalues away from 0."""
    for _ in range(max_tries):
        b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a = (b + b.conj().T) / (2.0 * np.sqrt(n))
        if np.min(np.abs(np.linalg.eigvalsh(a))) >= min_abs_eig:
            return a
    raise RuntimeError("could not draw an invertible Hermitian matrix")


def random_unit_vector(n, rng):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def schrodinger_flow(A, phi0, tau):
    """``phi_tau = exp(-i A tau) phi0`` with exact first and second derivatives.

    ``tau`` may be a scalar or 1-D array; outputs then carry a leading axis.
    Returns ``(phi, dphi, ddphi)`` with ``dphi = -i A phi`` and
    ``ddphi = -A^2 phi``.
    """
    A = _check_hermitian(np.asarray(A, dtype=complex), what="A")
    lam, v = np.linalg.eigh(A)
    c = v.conj().T @ np.asarray(phi0, dtype=complex)
    t = np.asarray(tau, dtype=float)
    ph = np.exp(-1j * np.multiply.outer(t, lam))
    phi = (ph * c) @ v.T
    dphi = (ph * (-1j * lam) * c) @ v.T
    ddphi = (ph * (-(lam**2)) * c) @ v.T
    return phi, dphi, ddphi


def geodesic_metric_for(A):
    """``K = (A A^H)^{-1}``; raises :class:`SingularTransformError` for singular ``A``."""
    A = np.asarray(A, dtype=complex)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > SINGULAR_CONDITION:
        raise SingularTransformError(f"A is singular (condition {cond:.3e})", cond)
    k = np.linalg.inv(A @ A.conj().T)
    return 0.5 * (k + k.conj().T)


def geodesic_residual(A, phi0, taus, return_all=False):
    """Max over ``taus`` of ``|| phi'' + Gamma(phi', phi') ||`` along the unitary flow."""
    K = geodesic_metric_for(A)
    phi, dphi, ddphi = schrodinger_flow(A, phi0, np.atleast_1d(taus))
    base = ProjectiveMetric(K, phi[0])
    res = np.array([
        np.linalg.norm(dd + christoffel_contract(base.at(p), d, d))
        for p, d, dd in zip(phi, dphi, ddphi)
    ])
    return res if return_all else float(res.max())


def geodesic_integrate(state0, K, tau_end, steps):
    """Classic RK4 for ``phi'' = -Gamma(phi', phi')`` without renormalisation.

    Returns the list of ``steps + 1`` states. Raises
    :class:`IntegrationError` at the first non-finite state.
    """
    if steps < MIN_STEPS:
        raise ValueError(f"need at least {MIN_STEPS} steps, got {steps}")
    state0.check()
    base = ProjectiveMetric(K, state0.phi)
    h = float(tau_end) / steps

    def rhs(phi, v):
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(v))):
            raise IntegrationError(f"non-finite state near tau = {tau:.6g}")
        return v, -christoffel_contract(base.at(phi), v, v)

    phi = np.asarray(state0.phi, dtype=complex)
    v = np.asarray(state0.dphi, dtype=complex)
    tau = float(state0.tau)
    path = [GeodesicState(phi.copy(), v.copy(), tau)]
    for i in range(steps):
        k1p, k1v = rhs(phi, v)
        k2p, k2v = rhs(phi + 0.5 * h * k1p, v + 0.5 * h * k1v)
        k3p, k3v = rhs(phi + 0.5 * h * k2p, v + 0.5 * h * k2v)
        k4p, k4v = rhs(phi + h * k3p, v + h * k3v)
        phi = phi + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        tau = float(state0.tau) + (i + 1) * h
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(v))):
            raise IntegrationError(f"non-finite state at tau = {tau:.6g}")
        path.append(GeodesicState(phi.copy(), v.copy(), tau))
    return path
