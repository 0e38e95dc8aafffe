import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heisenheat.group import (GroupParams, GroupPoint, compose, compose_arrays, dilate, distance,
                              fujita_exponent, gauge, gauge_arrays, identity, inverse)

coord = st.floats(-10, 10, allow_nan=False)
point = st.builds(lambda x, y, t: GroupPoint([x], [y], t), coord, coord, coord)
point2 = st.builds(lambda a, b, c, d, t: GroupPoint([a, b], [c, d], t), coord, coord, coord, coord, coord)
radius = st.floats(0.05, 20)


def P(x, y, t):
    return GroupPoint([x], [y], t)


@pytest.mark.parametrize("a, b, expected", [
    ((1, 0, 0), (0, 0, 0), (1, 0, 0)),
    ((1, 0, 0), (0, 1, 0), (1, 1, 2)),
    ((1, 1, 2), (-1, -1, -2), (0, 0, 0)),
])
def test_compose_examples(a, b, expected):
    assert compose(P(*a), P(*b)) == P(*expected)


def test_inverse_examples():
    assert inverse(identity()) == identity()
    assert inverse(P(1, 2, 3)) == P(-1, -2, -3)


@pytest.mark.parametrize("a, g", [((0, 0, 0), 0.0), ((1, 0, 0), 1.0), ((0, 0, 4), 2.0)])
def test_gauge_examples(a, g):
    assert gauge(P(*a)) == pytest.approx(g, abs=1e-15)


def test_distance_and_dilate_examples():
    assert distance(P(1, 1, 2), identity()) == pytest.approx(8 ** 0.25, rel=1e-15)
    assert dilate(2, P(1, 0, 3)) == P(2, 0, 12)
    with pytest.raises(ValueError):
        dilate(0, P(1, 0, 0))


def test_fujita_exponent():
    assert fujita_exponent(1) == 1.5
    assert fujita_exponent(GroupParams(2)) == pytest.approx(4 / 3)
    vals = [fujita_exponent(n) for n in range(1, 30)]
    assert all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] > 1
    assert GroupParams(3).Q == 8


def test_rejects_bad_points():
    with pytest.raises(ValueError):
        GroupPoint([1, 2], [1], 0)
    with pytest.raises(ValueError):
        GroupPoint([math.nan], [0], 0)
    with pytest.raises(ValueError):
        compose(P(0, 0, 0), GroupPoint([0, 0], [0, 0], 0))


@settings(max_examples=1000, deadline=None)
@given(point, point, point)
def test_associativity(a, b, c):
    lhs = compose(compose(a, b), c).as_array()
    rhs = compose(a, compose(b, c)).as_array()
    scale = 1 + np.abs(lhs).max()
    assert np.all(np.abs(lhs - rhs) <= 1e-12 * scale)


@settings(max_examples=300, deadline=None)
@given(point2, point2, point2)
def test_associativity_n2(a, b, c):
    assert compose(compose(a, b), c).isclose(compose(a, compose(b, c)), rtol=1e-12, atol=1e-9)


@settings(max_examples=2000, deadline=None)
@given(point, point)
def test_triangle_inequalities(a, b):
    assert gauge(compose(a, b)) <= gauge(a) + gauge(b) + 1e-12
    assert abs(gauge(a) - gauge(b)) <= distance(a, b) + 1e-12


@settings(max_examples=300, deadline=None)
@given(point, radius)
def test_homogeneity_and_dilation_inverse(a, r):
    assert abs(gauge(dilate(r, a)) - r * gauge(a)) <= 1e-12 * r * gauge(a) + 1e-300
    assert dilate(r, dilate(1 / r, a)).isclose(a, rtol=1e-12, atol=1e-12)
    assert dilate(1, a) == a


@settings(max_examples=300, deadline=None)
@given(point, point, point)
def test_left_invariance(g, a, b):
    assert distance(compose(g, a), compose(g, b)) == pytest.approx(distance(a, b), rel=1e-9, abs=1e-9)
    assert distance(a, a) == 0
    assert inverse(inverse(a)) == a


@settings(max_examples=100, deadline=None)
@given(point, point)
def test_array_versions_match(a, b):
    x, y, t = compose_arrays(a.x[:, None], a.y[:, None], np.array([a.tau]),
                             b.x[:, None], b.y[:, None], np.array([b.tau]))
    c = compose(a, b)
    assert np.allclose([x[0, 0], y[0, 0], t[0]], c.as_array(), rtol=1e-14, atol=1e-12)
    assert gauge_arrays(a.x[:, None], a.y[:, None], np.array([a.tau]))[0] == pytest.approx(gauge(a))
