"""Two-point kernels: evaluation, operator assembly, Gram values and induced metrics.

A kernel acts on sampled functions by quadrature,
``(A f)(x_i) = sum_j k(x_i, y_j) w_j f(y_j)``, so the weights of the input
grid are folded into the columns of the assembled matrix. Diagonal
(distributional) kernels such as the Dirac kernel act pointwise instead.

Coordinates are passed to kernel callables as arrays whose last axis
holds the components of a point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import KernelError
from .linop import LinOp

#: finite-difference step for mixed second derivatives of custom kernels
FD_HESSIAN_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class Kernel:
    """Named two-point function.

    Attributes
    ----------
    family
        Family tag, e.g. ``"gauss_metric"``.
    fn
        ``fn(x, y)`` on broadcastable coordinate arrays; ``None`` for
        diagonal kernels.
    profile
        For translation-invariant kernels, ``profile(d)`` with ``d = x - y``.
        Used by :func:`assemble` so periodic axes can use the minimum-image
        displacement.
    weight
        Pointwise weight of a diagonal kernel ``weight(x) delta(x - y)``.
    hessian
        Analytic ``d^2 k / dx^mu dy^nu`` on the diagonal, as a function of
        the point; ``None`` to fall back to finite differences.
    """

    family: str
    fn: Optional[Callable] = None
    profile: Optional[Callable] = None
    weight: Optional[Callable] = None
    hessian: Optional[Callable] = None
    symmetric: bool = True
    smooth: bool = True
    real: bool = True
    dim: Optional[int] = None
    params: dict = field(default_factory=dict)

    @property
    def diagonal(self):
        return self.weight is not None

    @property
    def translation_invariant(self):
        return self.profile is not None

    def __call__(self, x, y):
        return eval_kernel(self, x, y)

    def values(self, x, y):
        """Vectorised evaluation on coordinate arrays of shape ``(..., n)``."""
        if self.diagonal:
            raise KernelError(f"{self.family} is a distributional kernel with no pointwise values")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.profile is not None:
            return np.asarray(self.profile(x - y))
        return np.asarray(self.fn(x, y))


def _as_point(p):
    return np.atleast_1d(np.asarray(p, dtype=float))


def _sqnorm(d):
    return np.sum(d * d, axis=-1)


def _eta_form(signature):
    s = np.asarray(signature, dtype=float)
    return lambda d: np.sum(s * d * d, axis=-1)


def gauss_rho():
    """Convolution kernel ``exp(-(x-y)^2)``."""
    return Kernel(
        "gauss_rho",
        profile=lambda d: np.exp(-_sqnorm(d)),
        hessian=lambda a: 2.0 * np.eye(a.size),
    )


def gauss_metric(scale=1.0):
    """Metric kernel ``exp(-s |x-y|^2 / 2)``, unit on the diagonal."""
    s = float(scale)
    if s <= 0:
        raise KernelError("scale must be positive")
    return Kernel(
        "gauss_metric",
        profile=lambda d: np.exp(-0.5 * s * _sqnorm(d)),
        hessian=lambda a: s * np.eye(a.size),
        params={"scale": s},
    )


def damped_gauss():
    """``exp(-(x-y)^2 - x^2)``: smoothing followed by Gaussian damping."""

    def fn(x, y):
        return np.exp(-_sqnorm(x - y) - _sqnorm(x))

    return Kernel(
        "damped_gauss",
        fn=fn,
        hessian=lambda a: 2.0 * math.exp(-float(a @ a)) * np.eye(a.size),
        symmetric=False,
    )


def fourier():
    """Forward transform kernel ``exp(i x.y)``."""
    return Kernel(
        "fourier",
        fn=lambda x, y: np.exp(1j * np.sum(x * y, axis=-1)),
        symmetric=True,
        real=False,
    )


def inv_fourier():
    """Inverse transform kernel ``exp(-i x.y) / (2 pi)`` (per axis)."""

    def fn(x, y):
        n = x.shape[-1]
        return np.exp(-1j * np.sum(x * y, axis=-1)) / (2.0 * math.pi) ** n

    return Kernel("inv_fourier", fn=fn, symmetric=True, real=False)


def dirac():
    """Identity kernel ``delta(x - y)``."""
    return Kernel("dirac", weight=lambda x: np.ones(x.shape[:-1]), smooth=False)


def plane_wave_weight():
    """Diagonal kernel ``exp(-|x|^2/2) / sqrt(2 pi) delta(x - y)``."""
    return Kernel(
        "plane_wave_weight",
        weight=lambda x: np.exp(-0.5 * _sqnorm(x)) / math.sqrt(2.0 * math.pi),
        smooth=False,
    )


def multiplication_kernel(d):
    """Diagonal kernel ``d(x) delta(x - y)``; ``d`` gets one array per axis."""
    return Kernel(
        "multiplication",
        weight=lambda x: np.asarray(d(*np.moveaxis(x, -1, 0))) * np.ones(x.shape[:-1]),
        smooth=False,
    )


def minkowski_gauss(signature):
    """``exp(-eta(x-y, x-y)/2)`` with ``eta = diag(signature)``.

    Indefinite for mixed signatures; usable as a quadratic form only.
    """
    sig = tuple(int(s) for s in signature)
    if any(s not in (1, -1) for s in sig):
        raise KernelError("signature entries must be +1 or -1")
    form = _eta_form(sig)
    return Kernel(
        "minkowski_gauss",
        profile=lambda d: np.exp(-0.5 * form(d)),
        hessian=lambda a: np.diag(np.asarray(sig, dtype=float)),
        dim=len(sig),
        params={"signature": sig},
    )


def chordal_circle():
    """Kernel on the angle ``theta``: ``exp(-chord^2/2) = exp(cos(t - t') - 1)``.

    Smooth and 2 pi-periodic in both arguments; induced metric is 1.
    """
    return Kernel(
        "chordal_circle",
        profile=lambda d: np.exp(np.sum(np.cos(d) - 1.0, axis=-1)),
        hessian=lambda a: np.eye(a.size),
    )


def custom(fn, *, symmetric=True, smooth=True, real=True, translation_invariant=False,
           hessian=None, name="custom"):
    """Wrap a user kernel ``fn(x, y)``.

    ``fn`` receives coordinate arrays with the point components on the last
    axis and must broadcast. If ``translation_invariant`` is set, ``fn`` is
    called as ``fn(d, 0)`` on displacements during assembly.
    """
    if translation_invariant:
        return Kernel(name, profile=lambda d: _squeeze(fn(d, np.zeros_like(d))),
                      hessian=hessian, symmetric=symmetric, smooth=smooth, real=real)
    return Kernel(name, fn=lambda x, y: _squeeze(fn(x, y)), hessian=hessian,
                  symmetric=symmetric, smooth=smooth, real=real)


def _squeeze(v):
    v = np.asarray(v)
    if v.ndim and v.shape[-1] == 1:
        return v[..., 0]
    return v


FAMILIES = {
    "gauss_rho": gauss_rho,
    "gauss_metric": gauss_metric,
    "damped_gauss": damped_gauss,
    "fourier": fourier,
    "inv_fourier": inv_fourier,
    "dirac": dirac,
    "plane_wave_weight": plane_wave_weight,
    "minkowski_gauss": minkowski_gauss,
    "chordal_circle": chordal_circle,
}


def make_kernel(family, **params):
    """Construct a built-in kernel by family name."""
    try:
        factory = FAMILIES[family]
    except KeyError:
        raise KernelError(f"unknown kernel family {family!r}") from None
    return factory(**params)


def eval_kernel(kernel, x, y):
    """Pointwise value ``k(x, y)``.

    Raises :class:`KernelError` for diagonal kernels, which have no
    pointwise values.
    """
    x, y = _as_point(x), _as_point(y)
    if x.shape != y.shape:
        raise KernelError("points have different dimensions")
    if kernel.dim is not None and x.size != kernel.dim:
        raise KernelError(f"{kernel.family} expects {kernel.dim}-D points")
    v = complex(kernel.values(x, y))
    return v.real if kernel.real else v


def _displacements(grid_out, grid_in):
    d = grid_out.nodes[:, None, :] - grid_in.nodes[None, :, :]
    for k, (ao, ai) in enumerate(zip(grid_out.axes, grid_in.axes)):
        if ao.periodic and ai.periodic and math.isclose(ao.length, ai.length):
            p = ao.length
            d[..., k] = (d[..., k] + 0.5 * p) % p - 0.5 * p
    return d


def assemble(kernel, grid_in, grid_out=None):
    """Operator matrix ``A[i, j] = k(x_i, y_j) w_j``.

    ``x`` ranges over ``grid_out`` and ``y`` over ``grid_in``. Diagonal
    kernels give ``diag(weight(x_i))`` (input and output grids must agree).
    Translation-invariant kernels use minimum-image displacements on axes
    that are periodic in both grids, which keeps the matrix circulant.
    """
    grid_out = grid_in if grid_out is None else grid_out
    if grid_in.dim != grid_out.dim:
        raise KernelError(f"dimension mismatch: {grid_in.dim} vs {grid_out.dim}")
    if kernel.dim is not None and kernel.dim != grid_in.dim:
        raise KernelError(f"{kernel.family} is {kernel.dim}-D, grid is {grid_in.dim}-D")
    if kernel.diagonal:
        if grid_in != grid_out:
            raise KernelError("diagonal kernels need identical input and output grids")
        return LinOp(np.diag(kernel.weight(grid_in.nodes)), grid_in, grid_out)
    if kernel.translation_invariant:
        vals = kernel.profile(_displacements(grid_out, grid_in))
    else:
        vals = kernel.fn(grid_out.nodes[:, None, :], grid_in.nodes[None, :, :])
    vals = np.asarray(vals)
    if kernel.real:
        vals = np.real(vals)
    return LinOp(vals * grid_in.weights[None, :], grid_in, grid_out)


def kernel_matrix(kernel, points):
    """Plain matrix ``k(a_i, a_j)`` over a list of points (no quadrature)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    vals = kernel.values(pts[:, None, :], pts[None, :, :])
    return np.real(vals) if kernel.real else vals


def _fd_mixed(kernel, a, h):
    n = a.size
    out = np.empty((n, n), dtype=complex)
    eye = np.eye(n)
    for mu in range(n):
        for nu in range(n):
            xp, xm = a + h * eye[mu], a - h * eye[mu]
            yp, ym = a + h * eye[nu], a - h * eye[nu]
            out[mu, nu] = (kernel.values(xp, yp) - kernel.values(xp, ym)
                           - kernel.values(xm, yp) + kernel.values(xm, ym)) / (4.0 * h * h)
    return out


def mixed_hessian(kernel, a, *, force_fd=False, step=FD_HESSIAN_STEP):
    """``d^2 k(x, y) / dx^mu dy^nu`` at ``x = y = a``.

    Analytic where the family provides it; otherwise central differences
    with step ``step`` and one Richardson level (``h`` and ``h/2``).
    """
    if kernel.diagonal or not kernel.smooth:
        raise KernelError(f"{kernel.family} is not smooth on the diagonal")
    a = _as_point(a)
    if kernel.dim is not None and a.size != kernel.dim:
        raise KernelError(f"{kernel.family} expects {kernel.dim}-D points")
    if kernel.hessian is not None and not force_fd:
        return np.asarray(kernel.hessian(a), dtype=float)
    coarse = _fd_mixed(kernel, a, step)
    fine = _fd_mixed(kernel, a, 0.5 * step)
    h = (4.0 * fine - coarse) / 3.0
    if kernel.real or np.max(np.abs(h.imag)) <= 1e-12 * max(np.max(np.abs(h)), 1.0):
        return h.real
    return h


def gram_closed_form(kernel, weights, points):
    """``sum_ij l_i l_j k(a_i, a_j)``: squared norm of a combination of deltas."""
    if not kernel.symmetric or not kernel.real:
        raise KernelError(f"{kernel.family} is not a symmetric real kernel")
    lam = np.asarray(weights, dtype=float)
    gram = kernel_matrix(kernel, points)
    if gram.shape[0] != lam.size:
        raise KernelError("weights and points differ in length")
    return float(lam @ gram @ lam)


def is_symmetric_on(kernel, points, tol=1e-14):
    """Check ``k(x, y) == k(y, x)`` over all pairs of ``points``."""
    gram = kernel_matrix(kernel, points)
    return bool(np.max(np.abs(gram - gram.T)) <= tol)
