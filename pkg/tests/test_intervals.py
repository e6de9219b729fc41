from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repp_lab.intervals import BoxUnion, IntervalUnion, union_all

unions = st.lists(st.tuples(st.integers(0, 60), st.integers(1, 20)), max_size=4).map(
    lambda xs: IntervalUnion([(F(a, 8), F(a + w, 8)) for a, w in xs]))


def test_merge_and_measure():
    u = IntervalUnion([(0, 1), (F(1, 2), 2), (3, 4)])
    assert list(u) == [(0, 2), (3, 4)]
    assert u.measure() == 3


def test_ball_wraps_on_circle():
    b = IntervalUnion.ball(F(0), F(1, 10))
    assert list(b) == [(0, F(1, 10)), (F(9, 10), 1)]
    assert b.measure() == F(1, 5)


def test_closure_conventions():
    left = IntervalUnion([(0, 1)])
    right = IntervalUnion([(0, 1)], closed="right")
    assert left.contains(0) and not left.contains(1)
    assert right.contains(1) and not right.contains(0)


def test_mod1_and_scale():
    u = IntervalUnion([(F(3, 4), F(5, 4))]).mod1()
    assert list(u) == [(0, F(1, 4)), (F(3, 4), 1)]
    assert IntervalUnion([(1, 2)]).scale(F(1, 2)) == IntervalUnion([(F(1, 2), 1)])


@settings(max_examples=100, deadline=None)
@given(unions, unions)
def test_set_algebra(a, b):
    assert a.union(b).measure() == a.measure() + b.measure() - a.intersection(b).measure()
    assert a.difference(b).measure() == a.measure() - a.intersection(b).measure()
    assert a.intersection(b).issubset(a)
    assert not a.difference(b).intersects(b)
    xs = np.linspace(0, 10, 2001)
    assert np.array_equal(a.union(b).contains_array(xs), a.contains_array(xs) | b.contains_array(xs))


def test_union_all():
    parts = [IntervalUnion([(i, i + F(1, 2))]) for i in range(3)]
    assert union_all(parts).measure() == F(3, 2)


def test_box_union_measure():
    a = BoxUnion([((0, 0), (2, 2)), ((1, 1), (3, 3))])
    assert a.measure() == pytest.approx(7.0)
    d = a.difference(BoxUnion.box((0, 0), (1, 1)))
    assert d.measure() == pytest.approx(6.0)
    assert a.contains((2.5, 2.5)) and not a.contains((2.5, 0.5))
    assert a.scale_diag((F(1, 2), F(1, 3))).measure() == pytest.approx(7.0 / 6)
