"""Quadrature rules: element-wise Gauss-Legendre and row-wise weighted quadrature.

Both are exposed to the assembly code through :class:`RowQuadrature`, which
stores for every (full-basis) row ``i`` the indices of the quadrature points
lying in ``supp(B_i)`` together with one weight array per derivative pair
``(a, b)``: ``a`` is the derivative order carried by the test function,
``b`` the one applied to the trial function. For Gauss rules the test
function is folded into the weights, ``w[i, k] = g_k * B_i^(a)(x_k)``, so
Galerkin and weighted-quadrature assembly run through the same kernel.
"""
import numpy as np

DERIV_PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))


class QuadratureError(RuntimeError):
    pass


class GaussRule:
    """Gauss-Legendre rule with `q` nodes on every knot span of positive length."""

    def __init__(self, space, points_per_element):
        if points_per_element < 1:
            raise ValueError("points_per_element must be >= 1")
        self.space = space
        self.q = int(points_per_element)
        nodes, wts = np.polynomial.legendre.leggauss(self.q)
        bp = space.breakpoints
        a, b = bp[:-1], bp[1:]
        half = 0.5 * (b - a)
        self.points = ((a + b)[:, None] * 0.5 + half[:, None] * nodes).ravel()
        self.weights = (half[:, None] * wts).ravel()
        self.element = np.repeat(np.arange(bp.size - 1), self.q)

    def integrate(self, f):
        return np.dot(self.weights, f(self.points))

    def row_quadrature(self, max_test_deriv=1):
        """Per-row view with test functions folded into the weights."""
        sp = self.space
        p, m = sp.degree, sp.dim_full
        bp = sp.breakpoints
        # element range of each row's support
        lo = np.searchsorted(bp, sp.knots[:m], side="left")
        hi = np.searchsorted(bp, sp.knots[p + 1:p + 1 + m], side="left")
        nel_row = hi - lo
        L = int(nel_row.max()) * self.q
        index = np.zeros((m, L), dtype=np.intp)
        mask = np.zeros((m, L), dtype=bool)
        for i in range(m):
            k = nel_row[i] * self.q
            index[i, :k] = np.arange(lo[i] * self.q, hi[i] * self.q)
            mask[i, :k] = True
        weights = {}
        for a in range(max_test_deriv + 1):
            Ba = sp.collocation_matrix(self.points, a)          # Q x m
            vals = np.take_along_axis(Ba.T, index, axis=1)      # m x L
            w = np.where(mask, self.weights[index] * vals, 0.0)
            for b in range(3):
                weights[(a, b)] = w
        return RowQuadrature(sp, self.points, index, mask, weights, kind="gauss")


def gauss_rule(space, points_per_element):
    return GaussRule(space, points_per_element)


class RowQuadrature:
    """Row-dependent quadrature data for one parametric direction.

    Attributes
    ----------
    points : ndarray (Q,)
        Global quadrature points.
    index : ndarray of int (m, L)
        ``index[i, k]`` is the k-th point in the support of row ``i``;
        padded entries have ``mask == False`` and zero weight.
    weights : dict
        ``weights[(a, b)]`` has shape (m, L).
    """

    def __init__(self, space, points, index, mask, weights, kind):
        self.space = space
        self.points = np.asarray(points, dtype=float)
        self.index = index
        self.mask = mask
        self.weights = weights
        self.kind = kind
        self._trial = {}

    @property
    def num_points(self):
        return self.points.size

    def points_per_row(self):
        return self.mask.sum(axis=1)

    def row_points(self, i):
        return self.points[self.index[i, self.mask[i]]]

    def trial_values(self, b):
        """``T[i, o, k] = B_{i+o-p}^(b)(x_{index[i,k]})``, zero outside the basis range.

        Shape ``(m, 2p+1, L)``.
        """
        if b not in self._trial:
            sp = self.space
            p, m = sp.degree, sp.dim_full
            Bb = sp.collocation_matrix(self.points, b)              # Q x m
            cols = np.arange(m)[:, None] + np.arange(-p, p + 1)     # m x (2p+1)
            valid = (cols >= 0) & (cols < m)
            colsc = np.clip(cols, 0, m - 1)
            T = Bb[self.index[:, None, :], colsc[:, :, None]]      # m x (2p+1) x L
            T = np.where(valid[:, :, None] & self.mask[:, None, :], T, 0.0)
            self._trial[b] = T
        return self._trial[b]


def wq_points(space):
    """Global weighted-quadrature points.

    Interior spans contribute their endpoints and midpoint. The first and
    last span contribute ``max(p, 2) + 1`` equispaced points, which keeps the
    moment systems of rows touching the boundary solvable for every degree.
    """
    p = space.degree
    bp = space.breakpoints
    nel = bp.size - 1
    pts = [bp]
    nb = max(p, 2) + 1
    for e in range(nel):
        a, b = bp[e], bp[e + 1]
        if e == 0 or e == nel - 1:
            pts.append(np.linspace(a, b, nb))
        else:
            pts.append([0.5 * (a + b)])
    return np.unique(np.concatenate(pts))


def build_wq_rule(space, tol=1e-12):
    """Weighted-quadrature rule exact on every trial function overlapping each row.

    For each row ``i`` and derivative pair ``(a, b)`` the weights solve, in the
    minimum-norm least-squares sense,

        sum_q w[i, q] B_j^(b)(x_q) = int_0^1 B_i^(a) B_j^(b) dx

    for all ``j`` whose support overlaps ``supp(B_i)``. The systems for
    ``b = 1`` have a one-dimensional null row space (derivatives of a
    partition of unity sum to zero) but are consistent.

    Raises
    ------
    QuadratureError
        If some moment system cannot be satisfied to `tol` (relative).
    """
    p, m = space.degree, space.dim_full
    x = wq_points(space)
    lo, hi = space.knots[:m], space.knots[p + 1:p + 1 + m]
    in_supp = (x[None, :] >= lo[:, None]) & (x[None, :] <= hi[:, None])
    counts = in_supp.sum(axis=1)
    L = int(counts.max())
    index = np.zeros((m, L), dtype=np.intp)
    mask = np.zeros((m, L), dtype=bool)
    for i in range(m):
        k = counts[i]
        index[i, :k] = np.flatnonzero(in_supp[i])
        mask[i, :k] = True

    g = GaussRule(space, p + 1)
    Bg = [space.collocation_matrix(g.points, e) for e in (0, 1)]
    Bx = [space.collocation_matrix(x, e) for e in (0, 1)]
    weights = {}
    worst = 0.0
    for a, b in DERIV_PAIRS:
        moments = (Bg[a] * g.weights[:, None]).T @ Bg[b]    # m x m
        W = np.zeros((m, L))
        for i in range(m):
            js = np.arange(max(0, i - p), min(m, i + p + 1))
            q = index[i, :counts[i]]
            lhs = Bx[b][np.ix_(q, js)].T
            rhs = moments[i, js]
            w, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
            res = np.linalg.norm(lhs @ w - rhs)
            scale = max(np.linalg.norm(rhs), np.abs(moments[i]).max())
            rel = res / scale if scale > 0 else res
            worst = max(worst, rel)
            if rel > tol:
                raise QuadratureError(
                    "weighted quadrature moment system for row %d, pair %s is "
                    "inconsistent (relative residual %.2e); degenerate knot "
                    "configuration?" % (i, (a, b), rel))
            W[i, :counts[i]] = w
        weights[(a, b)] = W
    rule = RowQuadrature(space, x, index, mask, weights, kind="wq")
    rule.max_residual = worst
    return rule


def collocation_rows(space):
    """Degenerate row rule: row ``i`` uses only its own Greville point with unit weight."""
    m = space.dim_full
    tau = space.greville_points()
    index = np.zeros((m, 1), dtype=np.intp)
    mask = np.zeros((m, 1), dtype=bool)
    index[1:-1, 0] = np.arange(m - 2)
    mask[1:-1, 0] = True
    w = mask.astype(float)
    weights = {(0, e): w for e in range(3)}
    return RowQuadrature(space, tau, index, mask, weights, kind="collocation")
