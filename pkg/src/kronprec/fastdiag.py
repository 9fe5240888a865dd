"""Exact solvers for the parametric Kronecker-sum operator

    P = sum_l M_d kron ... kron K_l kron ... kron M_1,

used as a preconditioner. Two backends:

* ``"fd"``: fast diagonalization. With ``M_l^-1 K_l U_l = U_l D_l`` and
  ``V_l = (M_l U_l)^-T``, ``P^-1 = (U_d x .. x U_1) Lambda^-1 (V_d x .. x V_1)^T``
  where ``Lambda`` is the Kronecker sum of the ``D_l``. Requires real
  eigenvalues and a well-conditioned eigenvector matrix.
* ``"bs"``: Bartels-Stewart. With the real Schur form
  ``M_l^-1 K_l = Z_l R_l Z_l^T`` and ``G_l = M_l^-T Z_l``, the transformed
  system is quasi-triangular and solved by block back substitution over the
  outermost direction, recursively.
"""
import time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator

from .assembly import UnivariateMatrices, univariate_advection_matrix, univariate_galerkin_matrices
from .tensor import KroneckerSumOperator, kron_apply, laplacian_terms

BACKENDS = ("fd", "bs")


class FactorizationError(np.linalg.LinAlgError):
    pass


class SingularOperatorError(FactorizationError):
    pass


def _is_symmetric(A, rtol=1e-14):
    return np.linalg.norm(A - A.T) <= rtol * np.linalg.norm(A)


@dataclass
class PencilFactorizationFD:
    U: np.ndarray
    V: np.ndarray
    D: np.ndarray
    cond: float
    symmetric: bool


@dataclass
class PencilFactorizationBS:
    Z: np.ndarray       # orthogonal Schur vectors
    R: np.ndarray       # quasi-upper-triangular
    G: np.ndarray       # M^-T Z
    blocks: list        # (start, size) of the diagonal blocks
    Zc: np.ndarray = None   # complex Schur form of R, only if R has 2x2 blocks
    Tc: np.ndarray = None


def factor_fd(M, K, tol_imag=1e-8, cond_max=1e8):
    """Eigen-factorization of the pencil (K, M) for fast diagonalization.

    Raises
    ------
    FactorizationError
        If eigenvalues are complex beyond ``tol_imag * spectral radius`` or the
        eigenvector matrix has condition number above `cond_max`.
    """
    M = np.asarray(M, dtype=float)
    K = np.asarray(K, dtype=float)
    if _is_symmetric(M) and _is_symmetric(K):
        try:
            D, U = sla.eigh(0.5 * (K + K.T), 0.5 * (M + M.T))
            return PencilFactorizationFD(U, U, D, float(np.linalg.cond(U)), True)
        except np.linalg.LinAlgError:
            pass    # M not positive definite: use the general path

    A = np.linalg.solve(M, K)
    lam, U = np.linalg.eig(A)
    radius = np.abs(lam).max()
    imag = np.abs(lam.imag).max()
    if imag > tol_imag * radius:
        raise FactorizationError(
            "M^-1 K has complex eigenvalues (max |Im| = %.2e, spectral radius %.2e); "
            "use the Bartels-Stewart backend" % (imag, radius))
    order = np.argsort(lam.real, kind="stable")
    D = lam.real[order]
    U = U.real[:, order] if np.iscomplexobj(U) else U[:, order]
    U = U / np.linalg.norm(U, axis=0)
    cond = float(np.linalg.cond(U))
    if not np.isfinite(cond) or cond > cond_max:
        raise FactorizationError(
            "eigenvector matrix of M^-1 K is ill-conditioned (cond = %.2e > %.0e); "
            "use the Bartels-Stewart backend" % (cond, cond_max))
    V = np.linalg.inv(M @ U).T
    return PencilFactorizationFD(U, V, D, cond, False)


def _schur_blocks(R):
    n = R.shape[0]
    blocks, k = [], 0
    while k < n:
        if k + 1 < n and R[k + 1, k] != 0.0:
            blocks.append((k, 2))
            k += 2
        else:
            blocks.append((k, 1))
            k += 1
    return blocks


def factor_bs(M, K):
    """Real Schur factorization of ``M^-1 K`` for Bartels-Stewart."""
    M = np.asarray(M, dtype=float)
    A = np.linalg.solve(M, np.asarray(K, dtype=float))
    R, Z = sla.schur(A, output="real")
    G = np.linalg.solve(M.T, Z)
    blocks = _schur_blocks(R)
    fac = PencilFactorizationBS(Z, R, G, blocks)
    if any(s == 2 for _, s in blocks):
        fac.Tc, fac.Zc = sla.rsf2csf(R, np.eye(R.shape[0]))
    return fac


class Preconditioner:
    """Exact inverse of a Kronecker-sum operator ``P``.

    Parameters
    ----------
    mats : list of UnivariateMatrices
        ``(M_l, K_l)`` per direction, direction 1 first.
    backend : {"fd", "bs"}
    tol_imag, cond_max : float
        Guards of the FD backend.
    fallback : bool
        If FD construction fails, warn and build BS instead of raising.

    Attributes
    ----------
    operator : KroneckerSumOperator
        ``P`` itself.
    setup_time : float
        Seconds spent in :meth:`__init__`.
    fallback_reason : str or None
    """

    def __init__(self, mats, backend="fd", tol_imag=1e-8, cond_max=1e8, fallback=True):
        t0 = time.perf_counter()
        if backend not in BACKENDS:
            raise ValueError("unknown backend %r (choose from %s)" % (backend, ", ".join(BACKENDS)))
        self.mats = list(mats)
        self.d = len(self.mats)
        self.dims = tuple(m.M.shape[0] for m in self.mats)
        self.N = int(np.prod(self.dims))
        self.shape = (self.N, self.N)
        self.fallback_reason = None
        if backend == "fd":
            try:
                self.factors = [factor_fd(m.M, m.K, tol_imag, cond_max) for m in self.mats]
                D = np.zeros(self.dims)
                for l, f in enumerate(self.factors):
                    shape = [1] * self.d
                    shape[l] = self.dims[l]
                    D = D + f.D.reshape(shape)
                if np.abs(D).min() <= 1e-14 * np.abs(D).max():
                    raise SingularOperatorError("P is singular (zero eigenvalue in the Kronecker sum)")
                self._lam = np.ravel(D, order="F")
            except FactorizationError as exc:
                if not fallback or isinstance(exc, SingularOperatorError):
                    raise
                warnings.warn("fast diagonalization failed (%s); falling back to Bartels-Stewart"
                              % exc, RuntimeWarning, stacklevel=2)
                self.fallback_reason = str(exc)
                backend = "bs"
        if backend == "bs":
            self.factors = [factor_bs(m.M, m.K) for m in self.mats]
            self._check_bs_shifts()
        self.backend = backend
        self.operator = KroneckerSumOperator(laplacian_terms(self.mats))
        self.setup_time = time.perf_counter() - t0

    def _check_bs_shifts(self):
        ev = [np.linalg.eigvals(f.R) for f in self.factors]
        total = ev[0]
        for e in ev[1:]:
            total = (total[:, None] + e[None, :]).ravel()
        if np.abs(total).min() <= 1e-14 * np.abs(total).max():
            raise SingularOperatorError("P is singular (zero eigenvalue in the Kronecker sum)")

    def apply(self, b):
        """Solve ``P s = b``."""
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.N:
            raise ValueError("vector of length %d, preconditioner of size %d" % (b.shape[0], self.N))
        if self.backend == "fd":
            return apply_fd(self, b)
        return apply_bs(self, b)

    __call__ = apply

    def matvec(self, v):
        return self.apply(v)

    def aslinearoperator(self):
        return LinearOperator(self.shape, matvec=self.apply, dtype=float)


def apply_fd(P, b):
    """``s = (U_d x .. x U_1) Lambda^-1 (V_d x .. x V_1)^T b``."""
    y = kron_apply([f.V.T for f in P.factors], b)
    y = y / P._lam if y.ndim == 1 else y / P._lam[:, None]
    return kron_apply([f.U for f in P.factors], y)


def _tri_solve(f, z, shift):
    """Solve ``(R + shift I) y = z`` for quasi-triangular R."""
    n = f.R.shape[0]
    if f.Tc is None:
        return sla.solve_triangular(f.R + shift * np.eye(n), z)
    w = f.Zc.conj().T @ z
    y = f.Zc @ sla.solve_triangular(f.Tc + shift * np.eye(n), w)
    if np.isrealobj(z) and np.isreal(shift):
        y = y.real
    return y


def _qt_solve(factors, Z, shift):
    """Solve ``(sum_l I x .. x R_l x .. x I + shift I) Y = Z`` on the tensor `Z`."""
    level = Z.ndim
    f = factors[level - 1]
    if level == 1:
        return _tri_solve(f, Z, shift)
    R = f.R
    real = np.isrealobj(Z) and np.isreal(shift)
    Y = np.zeros(Z.shape, dtype=float if real else complex)
    for k, size in reversed(f.blocks):
        rhs = Z[..., k:k + size]
        if k + size < R.shape[0]:
            rhs = rhs - np.tensordot(Y[..., k + size:], R[k:k + size, k + size:], axes=([-1], [1]))
        if size == 1:
            Y[..., k] = _qt_solve(factors, rhs[..., 0], shift + R[k, k])
            continue
        mu, W = np.linalg.eig(R[k:k + 2, k:k + 2])
        if real:
            # conjugate eigenpair: one complex solve gives both components
            w = W[:, 0]
            c = np.tensordot(rhs, np.linalg.inv(np.stack([w, w.conj()], axis=1))[0], axes=([-1], [0]))
            y1 = _qt_solve(factors, c, shift + mu[0])
            Y[..., k] = 2.0 * (w[0] * y1).real
            Y[..., k + 1] = 2.0 * (w[1] * y1).real
        else:
            C = np.tensordot(rhs, np.linalg.inv(W), axes=([-1], [1]))
            Ys = [_qt_solve(factors, C[..., i], shift + mu[i]) for i in range(2)]
            Y[..., k:k + 2] = np.tensordot(np.stack(Ys, axis=-1), W, axes=([-1], [1]))
    return Y


def apply_bs(P, b):
    """``s = (Z_d x .. x Z_1) T^-1 (G_d x .. x G_1)^T b`` with quasi-triangular T."""
    z = kron_apply([f.G.T for f in P.factors], b)
    Zt = np.reshape(z, P.dims, order="F")
    Y = _qt_solve(P.factors, Zt, 0.0)
    if np.iscomplexobj(Y):
        Y = Y.real
    return kron_apply([f.Z for f in P.factors], np.ravel(Y, order="F"))


def build_preconditioner(mats, backend="fd", tol_imag=1e-8, cond_max=1e8, fallback=True):
    """Factor the per-direction pencils; see :class:`Preconditioner`."""
    return Preconditioner(mats, backend, tol_imag, cond_max, fallback)


def build_convection_preconditioner(spaces, winds=None, rule=None, backend="fd", **kwargs):
    """Preconditioner with stiffness factors ``K_l + H_l``, ``H_l[i, j] = int w_l B_i B_j'``.

    `winds` holds one callable (or None for zero wind) per direction.
    """
    if winds is None:
        winds = [None] * len(spaces)
    mats = []
    for l, s in enumerate(spaces):
        g = univariate_galerkin_matrices(s, rule[l] if rule is not None else None)
        if winds[l] is None:
            mats.append(g)
        else:
            H = univariate_advection_matrix(s, winds[l], rule[l] if rule is not None else None)
            mats.append(UnivariateMatrices(g.M, g.K + H))
    return Preconditioner(mats, backend, **kwargs)
