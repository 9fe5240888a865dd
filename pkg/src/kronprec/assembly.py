"""System matrices and load vectors for collocation, weighted quadrature and Galerkin.

Every multivariate matrix here has the row-wise form

    A[i, j] = sum_t sum_q c_t(x_q) prod_l w^t_l[i_l, q_l] B^t_l[j_l](x_{q_l}),

with tensor-product points and weights. :func:`_sum_factorize` evaluates
this one direction at a time, storing the result banded (trial offset
``-p..p`` per direction), and converts to CSR at the end. Weighted
quadrature, Gauss-Galerkin, the H^1 Gram matrix, load vectors and
collocation (one point per row) only differ in the row rules and
coefficients they feed in.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

from .geometry import DiffusionCoefficient, GeometryError, grid_Q, jacobian_det_inv
from .quadrature import GaussRule, build_wq_rule, collocation_rows
from .splines import to_vector
from .tensor import KroneckerSumOperator, laplacian_terms

METHODS = ("collocation", "wq", "galerkin")

# doubles per chunk of intermediate data in the sum-factorization kernel
_CHUNK_BUDGET = 4_000_000


@dataclass
class UnivariateMatrices:
    """Mass-like and stiffness-like factors of one direction."""
    M: np.ndarray
    K: np.ndarray

    @property
    def n(self):
        return self.M.shape[0]


@dataclass
class AssembledSystem:
    operator: object
    rhs: np.ndarray
    method: str
    degrees: tuple
    num_elements: tuple
    geometry: str
    spaces: tuple = field(repr=False, default=())

    @property
    def N(self):
        return self.operator.shape[0]

    @property
    def h(self):
        return tuple(1.0 / e for e in self.num_elements)


def _interior(space):
    space.require_interior()
    return slice(1, space.dim_full - 1)


def univariate_collocation_matrices(space, interior=True):
    """``M[i, j] = B_j(tau_i)``, ``K[i, j] = -B_j''(tau_i)`` at the Greville points."""
    tau = space.greville_full()
    M = space.collocation_matrix(tau, 0)
    K = -space.collocation_matrix(tau, 2)
    if interior:
        s = _interior(space)
        M, K = M[s, s], K[s, s]
    return UnivariateMatrices(M, K)


def _gauss_biform(space, rule, a, b, weight=None):
    Ba = space.collocation_matrix(rule.points, a)
    Bb = space.collocation_matrix(rule.points, b)
    w = rule.weights if weight is None else rule.weights * weight(rule.points)
    return (Ba * w[:, None]).T @ Bb


def univariate_galerkin_matrices(space, rule=None, interior=True):
    """Exact mass and stiffness matrices ``int B_i B_j`` and ``int B_i' B_j'``."""
    if rule is None:
        rule = GaussRule(space, space.degree + 1)
    if rule.q < space.degree + 1:
        raise ValueError("Gauss rule must have at least p+1 points per element")
    M = _gauss_biform(space, rule, 0, 0)
    K = _gauss_biform(space, rule, 1, 1)
    M, K = 0.5 * (M + M.T), 0.5 * (K + K.T)
    if interior:
        s = _interior(space)
        M, K = M[s, s], K[s, s]
    return UnivariateMatrices(M, K)


def univariate_advection_matrix(space, wind=None, rule=None, interior=True):
    """``H[i, j] = int w(x) B_i(x) B_j'(x) dx``; `wind` defaults to 1."""
    if rule is None:
        rule = GaussRule(space, space.degree + 2)
    H = _gauss_biform(space, rule, 0, 1, weight=wind)
    if interior:
        s = _interior(space)
        H = H[s, s]
    return H


def parametric_matrices(spaces, method):
    """Per-direction factors of the parametric-domain operator for `method`."""
    if method == "collocation":
        return [univariate_collocation_matrices(s) for s in spaces]
    if method in ("wq", "galerkin"):
        return [univariate_galerkin_matrices(s) for s in spaces]
    raise ValueError("unknown method %r" % (method,))


def kronecker_form(spaces, method):
    return KroneckerSumOperator(laplacian_terms(parametric_matrices(spaces, method)))


# ---------------------------------------------------------------------------
# sum-factorization kernel


def _direction_factor(rule, a, b, with_trial=True):
    """G[i, o, k] = w^(a,b)[i, k] * B_{i+o-p}^(b)(x_k) over interior rows."""
    s = _interior(rule.space)
    W = rule.weights[(a, b)][s]
    if not with_trial:
        return W[:, None, :]
    return W[:, None, :] * rule.trial_values(b)[s]


def _sum_factorize(rules, terms):
    """Evaluate the banded tensor ``B[i_1, o_1, ..., i_d, o_d]``.

    Parameters
    ----------
    rules : list of RowQuadrature, one per direction
    terms : list of (coef, factors)
        `coef` has shape (Q_1, ..., Q_d); `factors[l]` has shape (n_l, O_l, L_l).
    """
    d = len(rules)
    idx = [r.index[_interior(r.space)] for r in rules]
    n = [ix.shape[0] for ix in idx]
    O = [f.shape[1] for f in terms[0][1]]
    Q = [r.num_points for r in rules]
    out_shape = []
    for l in range(d):
        out_shape += [n[l], O[l]]
    out = np.zeros(out_shape)

    per_row = O[0] * int(np.prod(Q[1:])) * max(ix.shape[1] for ix in idx)
    for l in range(1, d):
        per_row = max(per_row, O[0] * int(np.prod([n[k] * O[k] for k in range(1, l)]))
                      * n[l] * idx[l].shape[1] * int(np.prod(Q[l + 1:])))
    chunk = max(1, _CHUNK_BUDGET // max(per_row, 1))

    for start in range(0, n[0], chunk):
        stop = min(n[0], start + chunk)
        rows = slice(start, stop)
        for coef, factors in terms:
            # direction 1: R[i, o, q_2..q_d]
            G = factors[0][rows]
            Rg = coef[idx[0][rows]]                                  # (c, L, Q2..)
            c, L = Rg.shape[:2]
            R = np.matmul(G, Rg.reshape(c, L, -1))                   # (c, O1, S)
            R = R.reshape((c * O[0],) + tuple(Q[1:]))
            P = c * O[0]
            for l in range(1, d):
                S = int(np.prod(Q[l + 1:]))
                R = R.reshape(P, Q[l], S).transpose(1, 0, 2)          # (Q_l, P, S)
                Rg = R[idx[l]]                                       # (n_l, L_l, P, S)
                Rg = Rg.reshape(n[l], idx[l].shape[1], P * S)
                T = np.matmul(factors[l], Rg)                        # (n_l, O_l, P*S)
                R = T.reshape(n[l], O[l], P, S).transpose(2, 0, 1, 3)
                P = P * n[l] * O[l]
            out[rows] += R.reshape(out[rows].shape)
    return out


def _banded_to_csr(B, spaces, drop_zeros=False):
    d = len(spaces)
    n = [s.dim_interior for s in spaces]
    p = [s.degree for s in spaces]
    O = [2 * q + 1 for q in p]
    # reorder to (n_d..n_1, O_d..O_1): rows first-direction-fastest, columns ascending
    perm = [2 * l for l in reversed(range(d))] + [2 * l + 1 for l in reversed(range(d))]
    B = B.transpose(perm)
    N = int(np.prod(n))
    strides = np.cumprod([1] + n[:-1])
    mask = np.ones((1,) * (2 * d), dtype=bool)
    cols = np.zeros((1,) * (2 * d), dtype=np.int64)
    for l in range(d):
        j = np.arange(n[l])[:, None] + np.arange(O[l])[None, :] - p[l]     # (n_l, O_l)
        shape = [1] * (2 * d)
        shape[d - 1 - l] = n[l]
        shape[2 * d - 1 - l] = O[l]
        jl = j.reshape(shape)
        mask = mask & ((jl >= 0) & (jl < n[l]))
        cols = cols + jl * strides[l]
    mask = np.broadcast_to(mask, B.shape).reshape(N, -1)
    if drop_zeros:
        mask = mask & (B.reshape(N, -1) != 0)
    cols = np.broadcast_to(cols, B.shape).reshape(N, -1)
    data = B.reshape(N, -1)[mask]
    indices = cols[mask].astype(np.int32)
    indptr = np.zeros(N + 1, dtype=np.int64)
    np.cumsum(mask.sum(axis=1), out=indptr[1:])
    return sp.csr_matrix((data, indices, indptr), shape=(N, N))


def _banded_to_vector(B, spaces):
    d = len(spaces)
    shape = tuple(s.dim_interior for s in spaces)
    return to_vector(B.reshape(shape))


def _coefficient(K, d):
    return DiffusionCoefficient.identity(d) if K is None else K


def _stiffness_terms(rules, Q):
    d = len(rules)
    terms = []
    for alpha in range(d):
        for beta in range(d):
            factors = [_direction_factor(r, int(l == alpha), int(l == beta))
                       for l, r in enumerate(rules)]
            terms.append((np.ascontiguousarray(Q[..., alpha, beta]), factors))
    return terms


def _is_identity(G, K):
    return getattr(G, "is_identity", False) and K.is_identity


def _check_dims(G, spaces):
    if len(spaces) != G.dim:
        raise GeometryError("need one space per parametric direction (%d)" % G.dim)


def assemble_matrix_rowwise(G, K, spaces, rules):
    """Stiffness matrix from per-direction row rules (WQ or Gauss), as CSR."""
    K = _coefficient(K, G.dim)
    Q, _, _ = grid_Q(G, K, [r.points for r in rules])
    B = _sum_factorize(rules, _stiffness_terms(rules, Q))
    return _banded_to_csr(B, spaces)


def assemble_wq(G, K=None, spaces=None, wq_rules=None, f=None, fast_path=False):
    """Weighted-quadrature Galerkin system.

    Parameters
    ----------
    G : GeometryMap
    K : DiffusionCoefficient, optional
        Defaults to the identity.
    spaces : sequence of SplineSpace1D
    wq_rules : sequence of RowQuadrature, optional
        Built with :func:`build_wq_rule` when omitted.
    f : callable, optional
        Source term; the load vector uses Gauss quadrature.
    fast_path : bool
        Return the Kronecker form for identity geometry with K = I.
    """
    K = _coefficient(K, G.dim)
    _check_dims(G, spaces)
    if fast_path and _is_identity(G, K):
        A = kronecker_form(spaces, "wq")
    else:
        if wq_rules is None:
            wq_rules = [build_wq_rule(s) for s in spaces]
        A = assemble_matrix_rowwise(G, K, spaces, wq_rules)
    rhs = assemble_rhs(G, f, spaces, "wq")
    return _system(A, rhs, "wq", G, spaces)


def assemble_galerkin_exact(G, K=None, spaces=None, rule=None, f=None):
    """Reference Galerkin matrix with element-wise Gauss quadrature.

    `rule` is the number of Gauss points per element (default p+1) or a list
    of :class:`GaussRule`, one per direction.
    """
    K = _coefficient(K, G.dim)
    _check_dims(G, spaces)
    rules = _gauss_rows(spaces, rule)
    A = assemble_matrix_rowwise(G, K, spaces, rules)
    A = 0.5 * (A + A.T)
    rhs = assemble_rhs(G, f, spaces, "galerkin")
    return _system(A.tocsr(), rhs, "galerkin", G, spaces)


def _gauss_rows(spaces, rule):
    if rule is None or np.isscalar(rule):
        return [GaussRule(s, rule or s.degree + 1).row_quadrature() for s in spaces]
    return [r.row_quadrature() if isinstance(r, GaussRule) else r for r in rule]


def assemble_h1_matrix(G, spaces, rule=None):
    """Gram matrix of the H^1(Omega) inner product on the interior basis."""
    _check_dims(G, spaces)
    rules = _gauss_rows(spaces, rule)
    K = DiffusionCoefficient.identity(G.dim)
    Q, _, det = grid_Q(G, K, [r.points for r in rules])
    terms = _stiffness_terms(rules, Q)
    terms.append((det, [_direction_factor(r, 0, 0) for r in rules]))
    B = _sum_factorize(rules, terms)
    H = _banded_to_csr(B, spaces)
    return (0.5 * (H + H.T)).tocsr()


def assemble_mass_matrix(G, spaces, rule=None):
    """L^2(Omega) Gram matrix on the interior basis."""
    rules = _gauss_rows(spaces, rule)
    x, J = G.grid_eval([r.points for r in rules], order=1)
    det, _ = jacobian_det_inv(J)
    B = _sum_factorize(rules, [(det, [_direction_factor(r, 0, 0) for r in rules])])
    M = _banded_to_csr(B, spaces)
    return (0.5 * (M + M.T)).tocsr()


def _collocation_coefficients(G, K, axes):
    """Coefficients of -div(K grad u) in parametric second and first derivatives.

    ``L u = -sum_ab C_ab d_ab u + sum_a b_a d_a u`` with
    ``C = J^-1 K J^-T`` and ``b = J^-1 (t - div K)``, ``t_k = sum_ab C_ab H_k,ab``.
    """
    x, J, H = G.grid_eval(axes, order=2)
    _, Jinv = jacobian_det_inv(J)
    JinvT = np.swapaxes(Jinv, -1, -2)
    if K.is_identity:
        C = Jinv @ JinvT
    else:
        C = Jinv @ K(x) @ JinvT
    t = np.einsum("...ab,...kab->...k", C, H)
    rhs = t - K.div(x) if not K.is_constant else t
    bvec = np.einsum("...ak,...k->...a", Jinv, rhs)
    return C, bvec, x


def assemble_collocation(G, K=None, spaces=None, f=None, fast_path=True):
    """Collocation system at the tensor Greville points.

    For identity geometry and K = I (with `fast_path`) the operator is the
    Kronecker sum of the univariate collocation matrices; otherwise a CSR
    matrix built with the chain rule from J_F and its second derivatives.
    """
    K = _coefficient(K, G.dim)
    _check_dims(G, spaces)
    if not K.is_constant and K.divergence is None:
        raise GeometryError("collocation with a non-constant K needs its divergence")
    if fast_path and _is_identity(G, K):
        A = kronecker_form(spaces, "collocation")
    else:
        rules = [collocation_rows(s) for s in spaces]
        C, bvec, _ = _collocation_coefficients(G, K, [r.points for r in rules])
        d = G.dim
        terms = []
        for a in range(d):
            for b in range(a, d):
                orders = [int(l == a) + int(l == b) for l in range(d)]
                scale = -1.0 if a == b else -2.0
                terms.append((scale * C[..., a, b],
                              [_direction_factor(r, 0, e) for r, e in zip(rules, orders)]))
            orders = [int(l == a) for l in range(d)]
            terms.append((bvec[..., a], [_direction_factor(r, 0, e) for r, e in zip(rules, orders)]))
        B = _sum_factorize(rules, terms)
        A = _banded_to_csr(B, spaces, drop_zeros=True)
    rhs = assemble_rhs(G, f, spaces, "collocation")
    return _system(A, rhs, "collocation", G, spaces)


def assemble_rhs(G, f, spaces, method, points_per_element=None):
    """Right-hand side: samples at mapped Greville points (collocation) or a Gauss load vector."""
    N = int(np.prod([s.dim_interior for s in spaces]))
    if f is None:
        return np.zeros(N)
    if method == "collocation":
        axes = [s.greville_points() for s in spaces]
        x, _ = G.grid_eval(axes, order=1)
        return to_vector(np.asarray(f(x), dtype=float))
    if method not in ("wq", "galerkin"):
        raise ValueError("unknown method %r" % (method,))
    rules = [GaussRule(s, points_per_element or s.degree + 1).row_quadrature(0)
             for s in spaces]
    x, J = G.grid_eval([r.points for r in rules], order=1)
    det = np.abs(np.linalg.det(J))
    coef = np.asarray(f(x), dtype=float) * det
    B = _sum_factorize(rules, [(coef, [_direction_factor(r, 0, 0, with_trial=False)
                                       for r in rules])])
    return _banded_to_vector(B, spaces)


def _system(A, rhs, method, G, spaces):
    return AssembledSystem(
        operator=A, rhs=rhs, method=method,
        degrees=tuple(s.degree for s in spaces),
        num_elements=tuple(s.knot_vector.num_elements for s in spaces),
        geometry=G.name, spaces=tuple(spaces))


def assemble(G, spaces, method, K=None, f=None, fast_path=False):
    if method == "collocation":
        return assemble_collocation(G, K, spaces, f, fast_path=fast_path)
    if method == "wq":
        return assemble_wq(G, K, spaces, f=f, fast_path=fast_path)
    if method == "galerkin":
        return assemble_galerkin_exact(G, K, spaces, f=f)
    raise ValueError("unknown method %r (choose from %s)" % (method, ", ".join(METHODS)))


def manufactured_solution(x):
    """u(x) = prod_k sin(pi x_k)."""
    return np.prod(np.sin(np.pi * np.asarray(x)), axis=-1)


def manufactured_source(x):
    """f = -Laplace(u) for :func:`manufactured_solution`."""
    x = np.asarray(x)
    return x.shape[-1] * np.pi ** 2 * manufactured_solution(x)


def write_matrix_market(A, path, comment=""):
    if isinstance(A, KroneckerSumOperator):
        A = A.tosparse()
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment)


def read_matrix_market(path):
    return sp.csr_matrix(scipy.io.mmread(str(path)))
