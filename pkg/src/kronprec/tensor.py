"""Kronecker-sum operators applied through mode products.

A term ``(A_1, ..., A_d)`` stands for ``A_d kron ... kron A_1`` acting on
vectors flattened with the first direction fastest. Factors are therefore
listed in *direction* order, the reverse of how the Kronecker product is
written.
"""
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

MAX_DENSE = 8192


def mode_product(A, X, axis):
    """Multiply tensor `X` by matrix `A` along `axis`."""
    Y = np.tensordot(A, X, axes=(1, axis))
    if axis:
        Y = np.moveaxis(Y, 0, axis)
    return Y


def kron_apply(factors, v):
    """``(A_d kron ... kron A_1) v`` without forming the product.

    `v` may carry trailing columns: shape (N,) or (N, k).
    """
    shape_in = tuple(A.shape[1] for A in factors)
    shape_out = tuple(A.shape[0] for A in factors)
    extra = v.shape[1:]
    X = np.reshape(v, shape_in + extra, order="F")
    for l, A in enumerate(factors):
        X = mode_product(A, X, l)
    return np.reshape(X, (int(np.prod(shape_out)),) + extra, order="F")


def kron_dense(factors):
    out = np.ones((1, 1))
    for A in factors:
        out = np.kron(A, out)
    return out


class KroneckerSumOperator:
    """Sum of Kronecker products ``sum_t A_d^t kron ... kron A_1^t``.

    Parameters
    ----------
    terms : list of sequences of 2d arrays
        Each term lists its factors in direction order (direction 1 first).
    """

    def __init__(self, terms):
        terms = [tuple(np.asarray(A, dtype=float) for A in t) for t in terms]
        if not terms:
            raise ValueError("need at least one term")
        d = len(terms[0])
        shapes = tuple(A.shape for A in terms[0])
        for t in terms:
            if len(t) != d or tuple(A.shape for A in t) != shapes:
                raise ValueError("nonconformable Kronecker terms")
        for s in shapes:
            if len(s) != 2 or s[0] != s[1]:
                raise ValueError("Kronecker factors must be square")
        self.terms = terms
        self.d = d
        self.dims = tuple(s[0] for s in shapes)
        self.N = int(np.prod(self.dims))
        self.shape = (self.N, self.N)

    def matvec(self, v):
        v = np.asarray(v)
        if v.shape[0] != self.N:
            raise ValueError("vector of length %d, operator of size %d" % (v.shape[0], self.N))
        out = kron_apply(self.terms[0], v)
        for t in self.terms[1:]:
            out += kron_apply(t, v)
        return out

    def __matmul__(self, v):
        return self.matvec(v)

    def dot(self, v):
        return self.matvec(v)

    @property
    def T(self):
        return KroneckerSumOperator([[A.T for A in t] for t in self.terms])

    def dense(self, max_size=MAX_DENSE):
        if self.N > max_size:
            raise MemoryError("refusing to materialize a %d x %d matrix (limit %d)"
                              % (self.N, self.N, max_size))
        return sum(kron_dense(t) for t in self.terms)

    def tosparse(self):
        out = None
        for t in self.terms:
            K = sp.csr_matrix(t[0])
            for A in t[1:]:
                K = sp.kron(sp.csr_matrix(A), K, format="csr")
            out = K if out is None else out + K
        out.eliminate_zeros()
        return out.tocsr()

    def aslinearoperator(self):
        return LinearOperator(self.shape, matvec=self.matvec, rmatvec=self.T.matvec,
                              dtype=float)


def dense_materialize(op, max_size=MAX_DENSE):
    return op.dense(max_size)


def kron_matvec(op, v):
    return op.matvec(v)


def laplacian_terms(mats):
    """Terms of ``sum_l M_d .. K_l .. M_1`` from per-direction ``(M_l, K_l)`` pairs."""
    d = len(mats)
    terms = []
    for l in range(d):
        terms.append([mats[k].K if k == l else mats[k].M for k in range(d)])
    return terms
