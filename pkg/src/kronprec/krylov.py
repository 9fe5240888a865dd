"""Right-preconditioned BiCGStab and an ILU(0) baseline preconditioner."""
import time
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee


@dataclass
class SolveReport:
    """Outcome of a Krylov solve.

    `iterations` counts BiCGStab steps with half resolution: convergence
    right after the BiCG part of step ``k + 1`` is reported as ``k + 0.5``.
    """
    iterations: float = 0.0
    converged: bool = False
    breakdown: str = None
    residual_history: list = field(default_factory=list)
    true_residual: float = np.nan
    setup_time: float = 0.0
    apply_time: float = 0.0
    matvec_time: float = 0.0
    solve_time: float = 0.0

    @property
    def total_time(self):
        return self.setup_time + self.solve_time

    @property
    def status(self):
        if self.converged:
            return "converged"
        return "breakdown" if self.breakdown else "maxiter"


def _matvec(A):
    if A is None:
        return lambda v: v
    if hasattr(A, "apply"):
        return A.apply
    if sp.issparse(A) or isinstance(A, np.ndarray):
        return lambda v: A @ v
    if hasattr(A, "matvec"):
        return A.matvec
    if callable(A):
        return A
    raise TypeError("cannot use %r as a linear operator" % (type(A),))


def bicgstab(A, b, P_inv=None, tol=1e-8, max_iter=1000, x0=None, setup_time=0.0):
    """Solve ``A x = b`` with right-preconditioned BiCGStab.

    Parameters
    ----------
    A : matrix, sparse matrix, operator with ``matvec``, or callable
    b : ndarray
    P_inv : optional
        Approximate inverse: an object with ``apply``, a matrix (applied by
        multiplication) or a callable. ``None`` means no preconditioning.
    tol : float
        Stop once ``||b - A x|| / ||b|| <= tol``.
    max_iter : int
    x0 : ndarray, optional
        Initial guess, zero by default.
    setup_time : float
        Preconditioner setup time to record in the report.

    Returns
    -------
    x : ndarray
    report : SolveReport
    """
    t_start = time.perf_counter()
    Amv, Pmv = _matvec(A), _matvec(P_inv)
    rep = SolveReport(setup_time=setup_time)

    def mv(v):
        t = time.perf_counter()
        y = Amv(v)
        rep.matvec_time += time.perf_counter() - t
        return y

    def prec(v):
        t = time.perf_counter()
        y = Pmv(v)
        rep.apply_time += time.perf_counter() - t
        return y

    b = np.asarray(b, dtype=float)
    if tol <= 0:
        raise ValueError("tol must be positive")
    nb = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if nb == 0.0:
        rep.converged, rep.true_residual = True, 0.0
        rep.residual_history.append(0.0)
        rep.solve_time = time.perf_counter() - t_start
        return np.zeros_like(b), rep
    r = b - mv(x) if x0 is not None else b.copy()
    rel = np.linalg.norm(r) / nb
    rep.residual_history.append(rel)
    if rel <= tol:
        rep.converged, rep.true_residual = True, float(rel)
        rep.solve_time = time.perf_counter() - t_start
        return x, rep

    rhat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    tiny = np.finfo(float).tiny
    for k in range(max_iter):
        rho_new = rhat @ r
        if abs(rho_new) <= tiny:
            rep.breakdown = "rho"
            break
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        phat = prec(p)
        v = mv(phat)
        denom = rhat @ v
        if abs(denom) <= tiny:
            rep.breakdown = "rhat.v"
            break
        alpha = rho / denom
        x = x + alpha * phat
        s = r - alpha * v
        rel = np.linalg.norm(s) / nb
        rep.residual_history.append(rel)
        if rel <= tol:
            r = b - mv(x)
            rel_true = np.linalg.norm(r) / nb
            if rel_true <= tol:
                rep.iterations, rep.converged, rep.true_residual = k + 0.5, True, float(rel_true)
                break
            s = r
        shat = prec(s)
        t = mv(shat)
        tt = t @ t
        if tt <= tiny:
            rep.breakdown = "t"
            r = s
            break
        omega = (t @ s) / tt
        if omega == 0.0:
            rep.breakdown = "omega"
            r = s
            break
        x = x + omega * shat
        r = s - omega * t
        rel = np.linalg.norm(r) / nb
        rep.residual_history.append(rel)
        if rel <= tol:
            r = b - mv(x)
            rel_true = np.linalg.norm(r) / nb
            if rel_true <= tol:
                rep.iterations, rep.converged, rep.true_residual = k + 1.0, True, float(rel_true)
                break
    if not rep.converged:
        rep.iterations = float(k + 1) if max_iter else 0.0
        rep.true_residual = float(np.linalg.norm(b - Amv(x)) / nb)
    rep.solve_time = time.perf_counter() - t_start
    return x, rep


@numba.njit(cache=True)
def _ilu0_factor(indptr, indices, data, diag):
    n = indptr.size - 1
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for jj in range(indptr[i], indptr[i + 1]):
            pos[indices[jj]] = jj
        for kk in range(indptr[i], diag[i]):
            k = indices[kk]
            data[kk] /= data[diag[k]]
            lik = data[kk]
            for jj in range(diag[k] + 1, indptr[k + 1]):
                q = pos[indices[jj]]
                if q >= 0:
                    data[q] -= lik * data[jj]
        for jj in range(indptr[i], indptr[i + 1]):
            pos[indices[jj]] = -1
        if data[diag[i]] == 0.0:
            return i
    return -1


@numba.njit(cache=True)
def _ilu0_solve(indptr, indices, data, diag, b):
    n = b.size
    y = b.copy()
    for i in range(n):
        acc = y[i]
        for jj in range(indptr[i], diag[i]):
            acc -= data[jj] * y[indices[jj]]
        y[i] = acc
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for jj in range(diag[i] + 1, indptr[i + 1]):
            acc -= data[jj] * y[indices[jj]]
        y[i] = acc / data[diag[i]]
    return y


class ILU0Preconditioner:
    """Zero fill-in incomplete LU of a reverse Cuthill-McKee permuted matrix.

    ``L`` (unit lower) and ``U`` share the sparsity pattern of the permuted
    matrix and are stored together in one CSR array.
    """

    def __init__(self, A, reorder=True):
        t0 = time.perf_counter()
        if hasattr(A, "tosparse"):
            A = A.tosparse()
        A = sp.csr_matrix(A, dtype=float)
        A.eliminate_zeros()
        n = A.shape[0]
        if reorder:
            pattern = abs(A) + abs(A.T)
            self.perm = reverse_cuthill_mckee(pattern.tocsr(), symmetric_mode=True).astype(np.int64)
        else:
            self.perm = np.arange(n)
        Ap = A[self.perm][:, self.perm].tocsr()
        Ap.sort_indices()
        indptr = Ap.indptr.astype(np.int64)
        indices = Ap.indices.astype(np.int64)
        diag = np.full(n, -1, dtype=np.int64)
        rows = np.repeat(np.arange(n), np.diff(indptr))
        on_diag = np.flatnonzero(indices == rows)
        diag[rows[on_diag]] = on_diag
        if np.any(diag < 0):
            raise ZeroDivisionError("ILU(0): structurally zero pivot in row %d"
                                    % int(np.flatnonzero(diag < 0)[0]))
        data = Ap.data.copy()
        bad = _ilu0_factor(indptr, indices, data, diag)
        if bad >= 0:
            raise ZeroDivisionError("ILU(0): zero pivot in row %d" % bad)
        self.LU = sp.csr_matrix((data, indices, indptr), shape=(n, n))
        self._diag = diag
        self.shape = A.shape
        self.setup_time = time.perf_counter() - t0

    @property
    def L(self):
        return sp.tril(self.LU, -1, format="csr") + sp.identity(self.shape[0], format="csr")

    @property
    def U(self):
        return sp.triu(self.LU, 0, format="csr")

    def apply(self, v):
        v = np.asarray(v, dtype=float)
        z = _ilu0_solve(self.LU.indptr, self.LU.indices, self.LU.data, self._diag,
                        np.ascontiguousarray(v[self.perm]))
        out = np.empty_like(z)
        out[self.perm] = z
        return out

    __call__ = apply


def build_ilu0(A, reorder=True):
    return ILU0Preconditioner(A, reorder)


def apply_ilu0(prec, v):
    return prec.apply(v)
