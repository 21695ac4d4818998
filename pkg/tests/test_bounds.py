import math

import pytest
from hypothesis import given, strategies as st

from gdev.bounds import (
    BoundQuery,
    converse_delta,
    freedman_converse,
    freedman_upper,
    hoeffding_azuma,
    hypergeometric_tail,
    log_freedman_converse,
    log_freedman_upper,
    psi_lipschitz,
    upto_bound,
)
from gdev.errors import InfeasibleRegimeError, InvalidArgumentError


def test_hoeffding_azuma_examples():
    assert hoeffding_azuma(0, [1, 2]) == 1.0
    assert hoeffding_azuma(2, [1, 1]) == pytest.approx(math.exp(-1))
    assert psi_lipschitz(math.sqrt(8 * 3.0), 3.0) == pytest.approx(math.exp(-1))


def test_freedman_examples():
    assert freedman_upper(1, 1, 0) == pytest.approx(math.exp(-0.5))
    assert freedman_upper(2, 1, 1) == pytest.approx(math.exp(-4 / 6))
    assert freedman_upper(3, 2, 1e-12) == pytest.approx(math.exp(-9 / 4))


def test_freedman_converse_small_delta_limit():
    a, b = 1e4, 1e5
    log_lb, delta = log_freedman_converse(a, b, 1e-6)
    _, delta_big = freedman_converse(1e6, 1e7, 1e-6)
    assert delta_big < delta < 0.5
    assert log_lb <= math.log(0.5) - a * a / (2 * b)
    assert log_lb == pytest.approx(math.log(0.5) - a * a * (1 + 4 * delta) / (2 * b))


def test_converse_first_constraint():
    # R=1, beta/alpha=900: the variance constraint alone forces delta >= 0.1
    alpha, beta = 1e4, 9e6
    d = converse_delta(alpha, beta, 1.0)
    assert d >= 0.1 - 1e-12
    assert beta / alpha >= 9 / d**2 - 1e-9
    assert alpha**2 / beta >= 16 / d**2 * math.log(64 / d**2) - 1e-6


def test_converse_unit_parameters_feasible():
    d = converse_delta(1, 1, 1)
    assert d == pytest.approx(4.386, abs=1e-3)


def test_converse_infeasible():
    with pytest.raises(InfeasibleRegimeError):
        freedman_converse(1, 1, 1e12)


def test_hypergeometric_examples():
    assert hypergeometric_tail(8, 0, "upper") == hypergeometric_tail(8, 0, "lower") == 1.0
    assert hypergeometric_tail(8, 4, "lower") == pytest.approx(math.exp(-1))
    with pytest.raises(InvalidArgumentError):
        hypergeometric_tail(8, 1, "middle")


@given(st.floats(0.1, 1e3), st.floats(0, 1e3))
def test_sharp_upper_tail_is_weaker(mu, a):
    assert hypergeometric_tail(mu, a, "upper", sharp=True) <= hypergeometric_tail(mu, a, "upper") or a == 0


def test_upto_examples():
    assert upto_bound(5, 100, 1) == pytest.approx(math.exp(-25))
    assert math.log(upto_bound(20, 100, 1)) == pytest.approx(-200)


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(1, 1e4), st.floats(0.01, 5))
def test_upto_monotone(a1, a2, n, c):
    lo, hi = sorted((a1, a2))
    assert upto_bound(hi, n, c) <= upto_bound(lo, n, c)


@given(st.floats(0, 1e4), st.floats(1e-3, 1e4), st.floats(0, 1e3))
def test_freedman_is_probability(alpha, beta, R):
    v = log_freedman_upper(alpha, beta, R)
    assert v <= 0


def test_bound_query():
    r = BoundQuery("freedman_upper", {"alpha": "2", "beta": "1", "R": "1"}).evaluate()
    assert r.bound == pytest.approx(math.exp(-4 / 6))
    r = BoundQuery("hoeffding_azuma", {"a": "2", "c": "1;1"}).evaluate()
    assert r.bound == pytest.approx(math.exp(-1))
    with pytest.raises(InvalidArgumentError):
        BoundQuery("nope", {}).evaluate()
    with pytest.raises(InvalidArgumentError):
        BoundQuery("freedman_upper", {"alpha": "1"}).evaluate()


def test_negative_inputs_rejected():
    with pytest.raises(InvalidArgumentError):
        freedman_upper(-1, 1, 1)
    with pytest.raises(InvalidArgumentError):
        hoeffding_azuma(-1, [1])
