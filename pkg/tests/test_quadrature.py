import numpy as np
import pytest

from kronprec.quadrature import (DERIV_PAIRS, GaussRule, QuadratureError, build_wq_rule,
                                 collocation_rows, gauss_rule, wq_points)
from kronprec.splines import KnotVector, SplineSpace1D


def test_gauss_midpoint_and_two_point():
    sp = SplineSpace1D(KnotVector(1, [0, 0, 1, 1]))
    g = gauss_rule(sp, 1)
    assert np.allclose(g.points, [0.5]) and np.allclose(g.weights, [1.0])
    g = gauss_rule(sp, 2)
    assert np.allclose(g.points, [0.5 - 0.5 / np.sqrt(3), 0.5 + 0.5 / np.sqrt(3)])
    assert np.allclose(g.weights, [0.5, 0.5])
    assert abs(g.integrate(lambda x: x ** 3) - 0.25) < 1e-15


def test_gauss_per_element():
    sp = SplineSpace1D.uniform(5, 2)
    g = GaussRule(sp, 3)
    assert g.points.size == 15
    assert np.all(g.weights > 0)
    assert abs(g.weights.sum() - 1.0) < 1e-14
    assert abs(g.integrate(lambda x: x ** 5) - 1 / 6) < 1e-14
    with pytest.raises(ValueError):
        GaussRule(sp, 0)


def _exact_moments(sp, a, b):
    g = GaussRule(sp, sp.degree + 1)
    Ba = sp.collocation_matrix(g.points, a)
    Bb = sp.collocation_matrix(g.points, b)
    return (Ba * g.weights[:, None]).T @ Bb


def _wq_error(sp, rule, a, b):
    p, m = sp.degree, sp.dim_full
    ref = _exact_moments(sp, a, b)
    Bb = sp.collocation_matrix(rule.points, b)
    err = 0.0
    for i in range(m):
        q = rule.index[i, rule.mask[i]]
        w = rule.weights[(a, b)][i, rule.mask[i]]
        for j in range(max(0, i - p), min(m, i + p + 1)):
            err = max(err, abs(w @ Bb[q, j] - ref[i, j]))
    return err


@pytest.mark.parametrize("nel,p", [(2, 1), (8, 2), (8, 3), (16, 4), (16, 5), (3, 5), (1, 3)])
def test_wq_exactness(nel, p):
    sp = SplineSpace1D.uniform(nel, p)
    rule = build_wq_rule(sp)
    for a, b in DERIV_PAIRS:
        assert _wq_error(sp, rule, a, b) < 1e-13 * max(1, nel)


def test_wq_p1_two_elements_vs_gauss():
    sp = SplineSpace1D.uniform(2, 1)
    rule = build_wq_rule(sp)
    for a, b in DERIV_PAIRS:
        assert _wq_error(sp, rule, a, b) < 1e-13


def test_wq_row_integral():
    sp = SplineSpace1D.uniform(8, 3)
    rule = build_wq_rule(sp)
    i = 4
    w = rule.weights[(0, 0)][i, rule.mask[i]]
    ones = sp.collocation_matrix(rule.row_points(i)).sum(axis=1)
    g = GaussRule(sp, 4)
    assert abs(w @ ones - g.integrate(lambda x: sp.collocation_matrix(x)[:, i])) < 1e-14


def test_wq_weights_supported_in_row_support():
    sp = SplineSpace1D.uniform(10, 3)
    rule = build_wq_rule(sp)
    for i in range(sp.dim_full):
        lo, hi = sp.support(i)
        x = rule.row_points(i)
        assert np.all((x >= lo) & (x <= hi))


def test_wq_points_per_row_linear_in_p():
    counts = {}
    for p in (2, 3, 4, 5):
        rule = build_wq_rule(SplineSpace1D.uniform(32, p))
        counts[p] = rule.points_per_row().max()
    assert all(counts[p] <= 4 * p for p in counts)
    assert counts == {2: 7, 3: 10, 4: 13, 5: 16}
    # away from the boundary a row sees p+1 spans: endpoints plus midpoints
    for p in (2, 3, 4, 5):
        sp = SplineSpace1D.uniform(32, p)
        inner = build_wq_rule(sp).points_per_row()[p + 3:-p - 3]
        assert np.all(inner == 2 * p + 3)


def test_wq_global_points_are_breakpoints_midpoints_and_boundary_spans():
    x = wq_points(SplineSpace1D.uniform(4, 2))
    assert np.allclose(x, np.arange(9) / 8)
    # boundary spans get max(p, 2) + 1 equispaced points
    x = wq_points(SplineSpace1D.uniform(4, 4))
    assert np.allclose(x[:5], np.linspace(0, 0.25, 5))
    assert np.allclose(x[4:9], [0.25, 0.375, 0.5, 0.625, 0.75])


def test_wq_inconsistent_raises():
    sp = SplineSpace1D.uniform(6, 3)
    with pytest.raises(QuadratureError):
        build_wq_rule(sp, tol=-1.0)


def test_collocation_rows():
    sp = SplineSpace1D.uniform(4, 2)
    rows = collocation_rows(sp)
    assert rows.num_points == sp.dim_interior
    assert not rows.mask[0].any() and not rows.mask[-1].any()
    T = rows.trial_values(0)
    # row i, offset p hits the diagonal function i at its own Greville point
    tau = sp.greville_points()
    for i in range(1, sp.dim_full - 1):
        assert abs(T[i, 2, 0] - sp.collocation_matrix([tau[i - 1]])[0, i]) < 1e-15
