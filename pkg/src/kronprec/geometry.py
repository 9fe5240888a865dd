"""Tensor-product spline/NURBS geometry maps and diffusion coefficients."""
import json

import numpy as np

from .splines import KnotVector, SplineSpace1D


class GeometryError(ValueError):
    pass


def _apply_along(A, X, axis):
    """Contract matrix `A` (r x m) with axis `axis` of `X` (size m)."""
    Y = np.tensordot(A, X, axes=(1, axis))
    return np.moveaxis(Y, 0, axis)


class GeometryMap:
    r"""Map F from [0,1]^d to R^d given by a tensor-product B-spline or NURBS.

    Parameters
    ----------
    spaces : sequence of SplineSpace1D
        Full-basis spaces, one per parametric direction.
    control_points : array_like, shape (m_1, ..., m_d, d)
    weights : array_like, shape (m_1, ..., m_d), optional
        Positive rational weights. Omitted for polynomial maps.
    name : str, optional
    """

    def __init__(self, spaces, control_points, weights=None, name=None):
        self.spaces = tuple(spaces)
        self.dim = len(self.spaces)
        if self.dim not in (1, 2, 3):
            raise GeometryError("only 1, 2 and 3 dimensional maps are supported")
        shape = tuple(s.dim_full for s in self.spaces)
        cp = np.asarray(control_points, dtype=float)
        if cp.shape != shape + (self.dim,):
            raise GeometryError("control points must have shape %s" % (shape + (self.dim,),))
        if weights is None:
            w = np.ones(shape)
            self.rational = False
        else:
            w = np.asarray(weights, dtype=float)
            if w.shape != shape:
                raise GeometryError("weights must have shape %s" % (shape,))
            if np.any(w <= 0):
                raise GeometryError("weights must be positive")
            self.rational = not np.all(w == 1.0)
        self.control_points = cp
        self.weights = w
        # homogeneous coefficients (w * C, w)
        self._hcoeffs = np.concatenate([cp * w[..., None], w[..., None]], axis=-1)
        self.name = name or "custom"
        self.is_identity = False

    def __repr__(self):
        return "GeometryMap(%s, d=%d, degrees=%s)" % (
            self.name, self.dim, tuple(s.degree for s in self.spaces))

    def grid_eval(self, axes, order=2):
        """Evaluate F and its derivatives on the tensor grid spanned by `axes`.

        Returns
        -------
        x : ndarray (Q_1, ..., Q_d, d)
        J : ndarray (Q_1, ..., Q_d, d, d), ``J[..., k, a] = dF_k / dxi_a``
        H : ndarray (Q_1, ..., Q_d, d, d, d), ``H[..., k, a, b]``; only if order == 2
        """
        d = self.dim
        axes = [np.atleast_1d(np.asarray(ax, dtype=float)) for ax in axes]
        if len(axes) != d:
            raise GeometryError("expected %d grid axes" % d)
        mats = [[s.collocation_matrix(ax, e) for e in range(order + 1)]
                for s, ax in zip(self.spaces, axes)]

        def hderiv(orders):
            X = self._hcoeffs
            for l, e in enumerate(orders):
                X = _apply_along(mats[l][e], X, l)
            return X

        def unit(*dirs):
            o = [0] * d
            for a in dirs:
                o[a] += 1
            return tuple(o)

        P0 = hderiv((0,) * d)
        w = P0[..., -1:]
        x = P0[..., :-1] / w
        dP = [hderiv(unit(a)) for a in range(d)]
        dF = [(dP[a][..., :-1] - x * dP[a][..., -1:]) / w for a in range(d)]
        J = np.stack(dF, axis=-1)
        if order < 2:
            return x, J
        H = np.zeros(J.shape + (d,))
        for a in range(d):
            for b in range(a, d):
                P = hderiv(unit(a, b))
                Fab = (P[..., :-1] - dF[a] * dP[b][..., -1:] - dF[b] * dP[a][..., -1:]
                       - x * P[..., -1:]) / w
                H[..., a, b] = Fab
                H[..., b, a] = Fab
        return x, J, H

    def eval_map(self, xi):
        """Point value, Jacobian and Hessian at a single parametric point."""
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.dim,):
            raise GeometryError("parametric point must have %d components" % self.dim)
        if np.any((xi < 0) | (xi > 1)):
            raise GeometryError("parametric point outside [0,1]^d")
        x, J, H = self.grid_eval([[t] for t in xi])
        idx = (0,) * self.dim
        return x[idx], J[idx], H[idx]

    def __call__(self, xi):
        return self.eval_map(xi)[0]

    def refine(self, spaces):
        """Represent the same map over richer spaces (knot insertion / degree elevation).

        The target spaces must contain the current ones; the homogeneous
        coefficients are obtained by interpolation at the target Greville
        points, which reproduces the map exactly.
        """
        spaces = tuple(spaces)
        for old, new in zip(self.spaces, spaces):
            if not _contains(new, old):
                raise GeometryError("%r does not contain %r" % (new, old))
        greville = [s.greville_full() for s in spaces]
        X = self._hcoeffs
        for l, (old, new, g) in enumerate(zip(self.spaces, spaces, greville)):
            X = _apply_along(old.collocation_matrix(g), X, l)
        for l, (new, g) in enumerate(zip(spaces, greville)):
            X = _apply_along(np.linalg.inv(new.collocation_matrix(g)), X, l)
        w = X[..., -1]
        cp = X[..., :-1] / w[..., None]
        return GeometryMap(spaces, cp, w if self.rational else None, name=self.name)

    def to_json(self):
        return json.dumps({
            "name": self.name,
            "dim": self.dim,
            "degrees": [s.degree for s in self.spaces],
            "knots": [s.knots.tolist() for s in self.spaces],
            "control_points": self.control_points.tolist(),
            "weights": self.weights.tolist(),
        })

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        spaces = [SplineSpace1D(KnotVector(p, kv)) for p, kv in zip(data["degrees"], data["knots"])]
        return cls(spaces, data["control_points"], data["weights"], name=data.get("name"))


def _contains(new, old):
    """True if spline space `new` contains `old` (same continuity or lower)."""
    if new.degree < old.degree:
        return False
    dp = new.degree - old.degree
    old_bp, old_cnt = np.unique(old.knots, return_counts=True)
    new_bp, new_cnt = np.unique(new.knots, return_counts=True)
    lookup = dict(zip(new_bp.tolist(), new_cnt.tolist()))
    for t, c in zip(old_bp.tolist(), old_cnt.tolist()):
        if t in (0.0, 1.0):
            continue
        if lookup.get(t, 0) < c + dp:
            return False
    return True


def identity_map(d):
    """F(xi) = xi as a degree-1 B-spline map."""
    sp = SplineSpace1D(KnotVector(1, [0, 0, 1, 1]))
    grid = np.stack(np.meshgrid(*([np.array([0.0, 1.0])] * d), indexing="ij"), axis=-1)
    G = GeometryMap([sp] * d, grid, name="identity")
    G.is_identity = True
    return G


def quarter_ring(inner=1.0, outer=2.0):
    """Quarter annulus in the first quadrant centred at the origin.

    Direction 1 runs along the arcs from (0, r) to (r, 0) (exact quadratic
    NURBS), direction 2 runs radially from `inner` to `outer`; this
    orientation gives det J > 0.
    """
    if not 0 < inner < outer:
        raise GeometryError("need 0 < inner < outer")
    arc = SplineSpace1D(KnotVector(2, [0, 0, 0, 1, 1, 1]))
    rad = SplineSpace1D(KnotVector(1, [0, 0, 1, 1]))
    unit_arc = np.array([[0.0, 1.0], [1.0, 1.0], [1.0, 0.0]])
    cp = np.stack([unit_arc * inner, unit_arc * outer], axis=1)      # 3 x 2 x 2
    w = np.array([1.0, np.sqrt(0.5), 1.0])[:, None] * np.ones((1, 2))
    return GeometryMap([arc, rad], cp, w, name="quarter_ring")


def _rotate_about_axis(X, point, direction, angle):
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    r = X - point
    axial = (r @ e)[..., None] * e
    u = r - axial
    v = np.cross(e, u)
    return point + axial + np.cos(angle) * u + np.sin(angle) * v


def revolved_quarter_ring(inner=1.0, outer=2.0, axis_point=(-1.0, -1.0, -1.0),
                          axis_direction=(0.0, 1.0, 0.0)):
    """Solid swept by rotating the quarter ring (in the plane z=0) by pi/2 about an axis.

    The sweep is the third parametric direction, again an exact quadratic
    NURBS arc. The sense of rotation is chosen so that det J > 0.
    """
    ring = quarter_ring(inner, outer)
    c = np.asarray(axis_point, dtype=float)
    e = np.asarray(axis_direction, dtype=float)
    e = e / np.linalg.norm(e)
    P = np.concatenate([ring.control_points, np.zeros(ring.control_points.shape[:-1] + (1,))], axis=-1)
    r0 = P - c
    u = r0 - (r0 @ e)[..., None] * e
    w = ring.weights[:, :, None] * np.array([1.0, np.sqrt(0.5), 1.0])
    sweep = SplineSpace1D(KnotVector(2, [0, 0, 0, 1, 1, 1]))
    for angle in (0.5 * np.pi, -0.5 * np.pi):
        end = _rotate_about_axis(P, c, e, angle)
        mid = end + u           # corner of the quarter-circle control polygon
        G = GeometryMap(list(ring.spaces) + [sweep], np.stack([P, mid, end], axis=2), w,
                        name="revolved_ring")
        if np.linalg.det(G.eval_map([0.5, 0.5, 0.5])[1]) > 0:
            break
    G.axis_point, G.axis_direction, G.sweep_angle = c, e, angle
    return G


GEOMETRIES = {
    "square": lambda: identity_map(2),
    "cube": lambda: identity_map(3),
    "quarter_ring": quarter_ring,
    "revolved_ring": revolved_quarter_ring,
}


def get_geometry(name, **kwargs):
    try:
        return GEOMETRIES[name](**kwargs)
    except KeyError:
        raise GeometryError("unknown geometry %r (choose from %s)"
                            % (name, ", ".join(sorted(GEOMETRIES)))) from None


class DiffusionCoefficient:
    """Symmetric positive definite coefficient K(x) of -div(K grad u).

    Parameters
    ----------
    func : callable
        Maps points of shape (..., d) to matrices of shape (..., d, d).
    dim : int
    constant : bool
        True if K does not depend on x.
    divergence : callable, optional
        Row-wise divergence of K, points (..., d) -> (..., d). Needed by
        collocation when K is not constant.
    """

    def __init__(self, func, dim, constant=False, divergence=None, identity=False):
        self.func = func
        self.dim = dim
        self.is_constant = constant or identity
        self.is_identity = identity
        self.divergence = divergence

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def div(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_constant:
            return np.zeros(x.shape)
        if self.divergence is None:
            raise GeometryError("non-constant coefficient requires a divergence for collocation")
        return self.divergence(x)

    @classmethod
    def identity(cls, dim):
        eye = np.eye(dim)
        return cls(lambda x: np.broadcast_to(eye, x.shape[:-1] + (dim, dim)), dim, identity=True)

    @classmethod
    def constant_matrix(cls, K):
        K = np.asarray(K, dtype=float)
        if not np.allclose(K, K.T):
            raise GeometryError("coefficient must be symmetric")
        if np.linalg.eigvalsh(K).min() <= 0:
            raise GeometryError("coefficient must be positive definite")
        d = K.shape[0]
        ident = np.array_equal(K, np.eye(d))
        return cls(lambda x: np.broadcast_to(K, x.shape[:-1] + (d, d)), d,
                   constant=True, identity=ident)


def jacobian_det_inv(J):
    det = np.linalg.det(J)
    if np.any(det <= 0):
        raise GeometryError("non-invertible or orientation-reversing Jacobian "
                            "(min det J = %.3e)" % det.min())
    return det, np.linalg.inv(J)


def coefficient_matrix_Q(G, K, xi):
    """Pulled-back coefficient ``det(J) J^-1 K(F) J^-T`` at parametric point(s) `xi`."""
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    pts = np.atleast_2d(xi)
    out = []
    for t in pts:
        x, J, _ = G.eval_map(t)
        det, Jinv = jacobian_det_inv(J)
        out.append(det * Jinv @ K(x) @ Jinv.T)
    out = np.array(out)
    return out[0] if single else out


def grid_Q(G, K, axes):
    """Q on a tensor grid; returns (Q, x, det J) with Q of shape (Q_1..Q_d, d, d)."""
    x, J = G.grid_eval(axes, order=1)
    det, Jinv = jacobian_det_inv(J)
    if K.is_identity:
        Q = det[..., None, None] * Jinv @ np.swapaxes(Jinv, -1, -2)
    else:
        Q = det[..., None, None] * Jinv @ K(x) @ np.swapaxes(Jinv, -1, -2)
    return 0.5 * (Q + np.swapaxes(Q, -1, -2)), x, det


def sample_grid(d, samples=50):
    return [np.linspace(0.0, 1.0, samples)] * d


def min_det_jacobian(G, samples=20):
    _, J = G.grid_eval(sample_grid(G.dim, samples), order=1)
    return np.linalg.det(J).min()

