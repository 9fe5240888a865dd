"""Univariate and tensor-product B-spline spaces.

Basis functions are indexed 0..m-1 over the full basis. Homogeneous
Dirichlet conditions are imposed by dropping the first and last function,
which leaves the ``n = m - 2`` interior functions 1..m-2. The interior
basis is a view over the full basis, not a separate construction.

Multivariate quantities are stored as arrays with one axis per parametric
direction (axis 0 = direction 1). Flattening uses Fortran order so the
first direction varies fastest, i.e. the multi-index ``(i_1, ..., i_d)``
maps to ``1 + sum_l n^(l-1) (i_l - 1)``.
"""
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class KnotVector:
    """Open knot vector of a given degree on [0, 1]."""
    degree: int
    knots: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = int(self.degree)
        kv = np.asarray(self.knots, dtype=float)
        if p < 1:
            raise ValueError("degree must be >= 1")
        if kv.ndim != 1 or kv.size < 2 * (p + 1):
            raise ValueError("knot vector too short for degree %d" % p)
        if np.any(np.diff(kv) < 0):
            raise ValueError("knots must be nondecreasing")
        if not (np.all(kv[:p + 1] == 0.0) and np.all(kv[-p - 1:] == 1.0)):
            raise ValueError("knot vector must be open on [0, 1]")
        interior = kv[p + 1:-p - 1]
        if interior.size:
            _, counts = np.unique(interior, return_counts=True)
            if counts.max() > p:
                raise ValueError("interior knot multiplicity exceeds degree")
            if interior.min() <= 0.0 or interior.max() >= 1.0:
                raise ValueError("interior knots must lie in (0, 1)")
        kv.setflags(write=False)
        object.__setattr__(self, "degree", p)
        object.__setattr__(self, "knots", kv)

    @property
    def numdofs(self):
        return self.knots.size - self.degree - 1

    @property
    def breakpoints(self):
        return np.unique(self.knots)

    @property
    def num_elements(self):
        return self.breakpoints.size - 1

    def __eq__(self, other):
        return (isinstance(other, KnotVector) and self.degree == other.degree
                and np.array_equal(self.knots, other.knots))

    def __hash__(self):
        return hash((self.degree, self.knots.tobytes()))


def make_uniform_open_knots(num_elements, p):
    """Open knot vector with `num_elements` uniform spans and simple interior knots."""
    if num_elements < 1:
        raise ValueError("num_elements must be >= 1")
    if p < 1:
        raise ValueError("degree must be >= 1")
    interior = np.arange(1, num_elements) / num_elements
    kv = np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])
    return KnotVector(p, kv)


def _ders_basis(knots, p, span, x, nder):
    """Nonzero basis functions and derivatives at points `x`.

    Vectorized Cox-de Boor recursion with derivatives. Returns an array of
    shape ``(len(x), nder + 1, p + 1)`` holding the values of functions
    ``span - p .. span``.
    """
    npts = x.size
    ndu = np.zeros((npts, p + 1, p + 1))
    left = np.zeros((npts, p + 1))
    right = np.zeros((npts, p + 1))
    ndu[:, 0, 0] = 1.0
    for j in range(1, p + 1):
        left[:, j] = x - knots[span + 1 - j]
        right[:, j] = knots[span + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            # lower triangle stores knot differences
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved

    ders = np.zeros((npts, nder + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    a = np.zeros((npts, 2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[:, 0, 0] = 1.0
        for k in range(1, nder + 1):
            d = np.zeros(npts)
            rk, pk = r - k, p - k
            if r >= k:
                a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                d = a[:, s2, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                d = d + a[:, s2, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[:, s2, k] = -a[:, s1, k - 1] / ndu[:, pk + 1, r]
                d = d + a[:, s2, k] * ndu[:, r, pk]
            ders[:, k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, nder + 1):
        ders[:, k, :] *= fac
        fac *= p - k
    return ders


class SplineSpace1D:
    """B-spline space of degree p over an open knot vector.

    Parameters
    ----------
    knot_vector : KnotVector

    Attributes
    ----------
    dim_full : int
        Number of basis functions ``m``.
    dim_interior : int
        Number of functions vanishing at both endpoints, ``n = m - 2``.
    """

    def __init__(self, knot_vector):
        self.knot_vector = knot_vector
        self.degree = knot_vector.degree
        self.knots = knot_vector.knots
        self.dim_full = knot_vector.numdofs
        # n = 0 is allowed for full-basis use; interior assembly checks it
        self.dim_interior = self.dim_full - 2

    @classmethod
    def uniform(cls, num_elements, p):
        return cls(make_uniform_open_knots(num_elements, p))

    def __repr__(self):
        return "SplineSpace1D(p=%d, m=%d, elements=%d)" % (
            self.degree, self.dim_full, self.knot_vector.num_elements)

    def __eq__(self, other):
        return isinstance(other, SplineSpace1D) and self.knot_vector == other.knot_vector

    def __hash__(self):
        return hash(self.knot_vector)

    @property
    def breakpoints(self):
        return self.knot_vector.breakpoints

    def find_span(self, x):
        """Knot span index ``s`` with ``knots[s] <= x < knots[s+1]``; x=1 uses the last span."""
        x = np.asarray(x, dtype=float)
        p, m = self.degree, self.dim_full
        span = np.searchsorted(self.knots, x, side="right") - 1
        return np.clip(span, p, m - 1)

    def eval_basis(self, x, deriv=0):
        """Evaluate the active basis functions (or a derivative) at a scalar point.

        Returns ``(first, values)`` where ``values[k]`` belongs to function
        ``first + k``; all other functions vanish at `x`.
        """
        if deriv not in (0, 1, 2):
            raise ValueError("deriv must be 0, 1 or 2")
        if not 0.0 <= x <= 1.0:
            raise ValueError("x=%r outside [0, 1]" % (x,))
        first, vals = self.eval_active(np.array([float(x)]), deriv)
        return int(first[0]), vals[0, deriv]

    def eval_active(self, x, nder=0):
        """Vectorized evaluation of active functions and derivatives up to `nder`.

        Returns
        -------
        first : ndarray of int, shape (npts,)
        values : ndarray, shape (npts, nder + 1, p + 1)
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any((x < 0.0) | (x > 1.0)):
            raise ValueError("evaluation points outside [0, 1]")
        if nder > 2:
            raise ValueError("derivatives above order 2 are not supported")
        span = self.find_span(x)
        vals = _ders_basis(self.knots, self.degree, span, x, nder)
        return span - self.degree, vals

    def collocation_matrix(self, x, deriv=0):
        """Dense matrix ``C[k, j] = B_j^(deriv)(x_k)`` over the full basis."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        first, vals = self.eval_active(x, deriv)
        C = np.zeros((x.size, self.dim_full))
        cols = first[:, None] + np.arange(self.degree + 1)
        np.put_along_axis(C, cols, vals[:, deriv, :], axis=1)
        return C

    def support(self, i):
        """Closed support interval of full-basis function `i`."""
        return self.knots[i], self.knots[i + self.degree + 1]

    def greville_full(self):
        p = self.degree
        kv = self.knots
        return np.array([kv[i + 1:i + p + 1].mean() for i in range(self.dim_full)])

    def greville_points(self):
        """Greville abscissae of the interior functions (collocation points)."""
        return self.greville_full()[1:-1]

    def require_interior(self):
        if self.dim_interior < 1:
            raise ValueError("%r has no interior basis functions" % self)


def greville_points(space):
    return space.greville_points()


def _as_dims(n, d):
    if np.isscalar(n):
        return (int(n),) * d
    dims = tuple(int(k) for k in n)
    if len(dims) != d:
        raise ValueError("expected %d dimensions, got %d" % (d, len(dims)))
    return dims


def flatten_index(mi, n, d=None):
    """Map a 1-based multi-index to its 1-based scalar index (first direction fastest).

    `n` is either the common per-direction dimension or a sequence of them.
    """
    mi = tuple(int(i) for i in mi)
    if d is None:
        d = len(mi)
    if len(mi) != d:
        raise ValueError("multi-index has %d components, expected %d" % (len(mi), d))
    dims = _as_dims(n, d)
    idx, stride = 1, 1
    for i, nl in zip(mi, dims):
        if not 1 <= i <= nl:
            raise IndexError("component %d out of range 1..%d" % (i, nl))
        idx += stride * (i - 1)
        stride *= nl
    return idx


def unflatten_index(i, n, d):
    """Inverse of :func:`flatten_index`."""
    dims = _as_dims(n, d)
    total = int(np.prod(dims))
    if not 1 <= i <= total:
        raise IndexError("index %d out of range 1..%d" % (i, total))
    rem = i - 1
    out = []
    for nl in dims:
        out.append(rem % nl + 1)
        rem //= nl
    return tuple(out)


def tensor_shape(spaces, interior=True):
    return tuple(s.dim_interior if interior else s.dim_full for s in spaces)


def to_tensor(v, shape):
    """Reshape a flat coefficient vector to a per-direction tensor (first direction fastest)."""
    return np.reshape(v, shape, order="F")


def to_vector(X):
    return np.ravel(X, order="F")
