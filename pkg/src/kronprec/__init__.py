"""Kronecker-sum preconditioners for nonsymmetric isogeometric discretizations of Poisson problems."""
from .assembly import (AssembledSystem, UnivariateMatrices, assemble, assemble_collocation,
                       assemble_galerkin_exact, assemble_h1_matrix, assemble_rhs, assemble_wq,
                       manufactured_solution, manufactured_source, parametric_matrices,
                       univariate_collocation_matrices, univariate_galerkin_matrices)
from .fastdiag import Preconditioner, apply_bs, apply_fd, build_convection_preconditioner, build_preconditioner
from .geometry import (DiffusionCoefficient, GeometryMap, coefficient_matrix_Q, get_geometry,
                       identity_map, quarter_ring, revolved_quarter_ring)
from .krylov import SolveReport, apply_ilu0, bicgstab, build_ilu0
from .quadrature import GaussRule, build_wq_rule, gauss_rule
from .splines import (KnotVector, SplineSpace1D, flatten_index, greville_points,
                      make_uniform_open_knots, unflatten_index)
from .tensor import KroneckerSumOperator, dense_materialize, kron_matvec

__version__ = "0.1.0"
