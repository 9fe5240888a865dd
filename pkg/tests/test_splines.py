import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import BSpline

from kronprec.splines import (KnotVector, SplineSpace1D, flatten_index, greville_points,
                              make_uniform_open_knots, to_tensor, to_vector, unflatten_index)


def test_uniform_knots_examples():
    kv = make_uniform_open_knots(2, 2)
    assert np.array_equal(kv.knots, [0, 0, 0, 0.5, 1, 1, 1])
    assert kv.numdofs == 4
    kv = make_uniform_open_knots(1, 1)
    assert np.array_equal(kv.knots, [0, 0, 1, 1])
    assert kv.numdofs == 2
    kv = make_uniform_open_knots(4, 3)
    assert np.allclose(kv.knots[4:-4], [0.25, 0.5, 0.75])
    assert kv.numdofs == 7


@pytest.mark.parametrize("nel,p", [(0, 2), (3, 0), (-1, 1)])
def test_uniform_knots_reject(nel, p):
    with pytest.raises(ValueError):
        make_uniform_open_knots(nel, p)


@pytest.mark.parametrize("knots,p", [
    ([0, 0.5, 1, 1], 1),              # not open
    ([0, 0, 0.5, 0.5, 0.5, 1, 1], 2),  # multiplicity 3 > p
    ([0, 0, 0.7, 0.3, 1, 1], 1),      # decreasing
    ([0, 0, 1], 1),                   # too short
])
def test_knot_vector_invalid(knots, p):
    with pytest.raises(ValueError):
        KnotVector(p, knots)


def test_eval_basis_hat():
    sp = SplineSpace1D(KnotVector(1, [0, 0, 1, 1]))
    first, vals = sp.eval_basis(0.25, 0)
    assert first == 0
    assert np.allclose(vals, [0.75, 0.25])
    _, d1 = sp.eval_basis(0.25, 1)
    assert np.allclose(d1, [-1, 1])


def test_eval_basis_endpoints():
    sp = SplineSpace1D(KnotVector(2, [0, 0, 0, 0.5, 1, 1, 1]))
    first, vals = sp.eval_basis(0.0)
    assert first == 0 and np.array_equal(vals, [1, 0, 0])
    # x = 1 uses the left limit, so the last function equals 1
    first, vals = sp.eval_basis(1.0)
    assert first + 2 == sp.dim_full - 1 and np.allclose(vals, [0, 0, 1])


@pytest.mark.parametrize("x,deriv", [(-0.1, 0), (1.5, 0), (0.5, 3)])
def test_eval_basis_invalid(x, deriv):
    sp = SplineSpace1D.uniform(3, 2)
    with pytest.raises(ValueError):
        sp.eval_basis(x, deriv)


@pytest.mark.parametrize("p", [1, 2, 3, 4, 5])
def test_collocation_matrix_matches_scipy(p):
    sp = SplineSpace1D.uniform(7, p)
    x = np.linspace(0, 1, 57)[:-1]
    for deriv in range(min(p, 2) + 1):
        ours = sp.collocation_matrix(x, deriv)
        ref = np.column_stack([BSpline(sp.knots, np.eye(sp.dim_full)[i], p).derivative(deriv)(x)
                               if deriv else BSpline(sp.knots, np.eye(sp.dim_full)[i], p)(x)
                               for i in range(sp.dim_full)])
        assert np.abs(ours - ref).max() < 1e-11 * max(1.0, np.abs(ref).max())


@settings(max_examples=40, deadline=None)
@given(p=st.integers(1, 5), nel=st.integers(1, 12), x=st.floats(0, 1))
def test_partition_of_unity(p, nel, x):
    sp = SplineSpace1D.uniform(nel, p)
    _, vals = sp.eval_active(np.array([x]), 0)
    assert abs(vals.sum() - 1.0) < 1e-12
    assert np.count_nonzero(sp.collocation_matrix([x])) <= p + 1


@settings(max_examples=30, deadline=None)
@given(p=st.integers(2, 5), nel=st.integers(1, 10), x=st.floats(0.01, 0.99))
def test_derivative_matches_finite_difference(p, nel, x):
    sp = SplineSpace1D.uniform(nel, p)
    delta = 1e-6
    # stay on one polynomial piece
    if np.any(np.abs(sp.breakpoints - x) < 2 * delta):
        return
    fd = (sp.collocation_matrix([x + delta]) - sp.collocation_matrix([x - delta])) / (2 * delta)
    assert np.abs(sp.collocation_matrix([x], 1) - fd).max() < 1e-6 * p * nel


@pytest.mark.parametrize("p", [1, 2, 3, 4, 5])
def test_greville_reproduces_linears(p):
    sp = SplineSpace1D.uniform(6, p)
    x = np.linspace(0, 1, 31)
    assert np.abs(sp.collocation_matrix(x) @ sp.greville_full() - x).max() < 1e-12


def test_greville_examples():
    assert np.allclose(greville_points(SplineSpace1D(KnotVector(2, [0, 0, 0, .5, 1, 1, 1]))), [0.25, 0.75])
    assert np.allclose(greville_points(SplineSpace1D(KnotVector(1, [0, 0, .5, 1, 1]))), [0.5])
    tau = greville_points(SplineSpace1D.uniform(4, 3))
    assert np.all(np.diff(tau) > 0) and tau[0] > 0 and tau[-1] < 1
    tau = SplineSpace1D.uniform(8, 3).greville_points()
    assert np.allclose(tau, [1 / 24, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 23 / 24])


def test_interior_requirement():
    sp = SplineSpace1D(KnotVector(1, [0, 0, 1, 1]))
    assert sp.dim_interior == 0
    with pytest.raises(ValueError):
        sp.require_interior()


def test_flatten_examples():
    assert flatten_index((1, 1), 3, 2) == 1
    assert flatten_index((2, 3), 3, 2) == 8
    assert flatten_index((2, 2, 2), 2, 3) == 8
    assert flatten_index((2, 1), (2, 5)) == 2
    with pytest.raises(IndexError):
        flatten_index((4, 1), 3, 2)
    with pytest.raises(ValueError):
        flatten_index((1, 1, 1), 3, 2)


@given(dims=st.lists(st.integers(1, 5), min_size=2, max_size=3), data=st.data())
def test_flatten_bijection(dims, data):
    N = int(np.prod(dims))
    i = data.draw(st.integers(1, N))
    mi = unflatten_index(i, dims, len(dims))
    assert flatten_index(mi, dims) == i


def test_tensor_vector_roundtrip_first_direction_fastest():
    X = np.arange(6.0).reshape(2, 3, order="F")
    v = to_vector(X)
    assert np.array_equal(v, np.arange(6.0))
    assert np.array_equal(to_tensor(v, (2, 3)), X)
    # multi-index (i1, i2) sits at position flatten_index - 1
    assert X[1, 2] == v[flatten_index((2, 3), (2, 3)) - 1]
