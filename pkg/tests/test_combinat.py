import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from gdev.combinat import falling, falling_ratio, log_falling, pair_count
from oracles import falling_bruteforce


@given(st.integers(0, 60), st.integers(0, 12))
def test_falling_matches_factorials(x, k):
    assert falling(x, k) == falling_bruteforce(x, k)


def test_falling_edge_cases():
    assert falling(5, 0) == 1
    assert falling(3, 5) == 0
    assert falling(10, 3) == 720


@given(st.integers(1, 500), st.integers(0, 8))
def test_log_falling_consistent(x, k):
    f = falling(x, k)
    if f == 0:
        assert log_falling(x, k) == -math.inf
    else:
        assert log_falling(x, k) == pytest.approx(math.log(f), rel=1e-12, abs=1e-12)


def test_falling_ratio_exact():
    assert falling_ratio(5, 8, 2) == Fraction(20, 56)


def test_pair_count():
    assert [pair_count(n) for n in (2, 3, 4, 10)] == [1, 3, 6, 45]
