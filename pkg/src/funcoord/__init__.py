"""Functional coordinates on grid function spaces.

Functions on a finite grid are coordinate vectors, kernels are matrices
carrying quadrature weights, and changes of coordinates are invertible
integral transforms. The subpackages cover metrics induced by
transforms, transformation laws and Hermiticity, generalized
eigenfunctionals, metrics induced on embedded parameter spaces, and the
geometry of normalized states.
"""

from .errors import (ConfigError, ExpressionError, FuncoordError, GridError, IndefiniteMetricError,
                     IntegrationError, KernelError, NonHermitianError, SideError, SingularTransformError)
from .grid import (Axis, Grid, SampledFunction, derivative_op, grid_delta, identity_op, l2_inner, line,
                   make_grid, mollified_delta, multiplication_op, pairing, sample)
from .kernels import Kernel, assemble, make_kernel, mixed_hessian
from .linop import DUAL, PRIMAL, LinOp, Transform
from .spaces import CoordinateSpace, dual_of, l2_space, space_from_kernel, space_from_transform
from .spectral import generalized_eigs, metric_from_unbounded, proper_basis
from .transforms import (hermitian_conjugate, pushforward_metric, solve_first_order_transform,
                         solve_separable_transform, verify_intertwining)
from .geometry import DeltaPath, induced_metric, path_quadratic_form
from .projective import ProjectiveMetric, christoffel_contract, geodesic_integrate, schrodinger_flow

__version__ = "0.1.0"

__all__ = [
    "Axis", "CoordinateSpace", "ConfigError", "DUAL", "DeltaPath", "ExpressionError", "FuncoordError",
    "Grid", "GridError", "IndefiniteMetricError", "IntegrationError", "Kernel", "KernelError", "LinOp",
    "NonHermitianError", "PRIMAL", "ProjectiveMetric", "SampledFunction", "SideError",
    "SingularTransformError", "Transform", "assemble", "christoffel_contract", "derivative_op", "dual_of",
    "generalized_eigs", "geodesic_integrate", "grid_delta", "hermitian_conjugate", "identity_op",
    "induced_metric", "l2_inner", "l2_space", "line", "make_grid", "make_kernel", "metric_from_unbounded",
    "mixed_hessian", "mollified_delta", "multiplication_op", "pairing", "path_quadratic_form",
    "proper_basis", "pushforward_metric", "sample", "schrodinger_flow", "solve_first_order_transform",
    "solve_separable_transform", "space_from_kernel", "space_from_transform",
    "verify_intertwining",
]
