import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gdev.combinat import pair_count
from gdev.covariance import (
    a_star_candidates,
    a_star_form,
    candidate_increments,
    cond_cov_exact,
    cond_cov_matrix,
    covariance_rows,
    lambda_star_kappa_rho,
    lambda_star_tau,
    rows_to_csv,
    surrogate,
    tau_quadratic_variation,
    v_surrogate,
    w_correction,
    y_second_moment,
)
from gdev.errors import ResourceLimitError
from gdev.graph_process import new_process
from gdev.martingale import increment
from gdev.montecarlo import gamma_rate
from gdev.patterns import C4, EDGE, K4, PATH3, TRIANGLE, WEDGE, HostGraph
from oracles import W_CORRECTION_EXAMPLE


@pytest.mark.parametrize("F", [EDGE, WEDGE, TRIANGLE, PATH3, C4], ids=lambda F: F.name)
def test_candidate_increments_match_direct_count(F):
    st_ = new_process(9, 17, codegrees=True).run_to(14)
    host = HostGraph(9, list(st_.nbr))
    cu, cw = st_.non_edges()
    want = [increment(F, host, int(u), int(w)) for u, w in zip(cu, cw)]
    assert candidate_increments(F, st_).tolist() == want


def test_empty_state_has_zero_wedge_variance():
    assert cond_cov_exact(WEDGE, WEDGE, new_process(10, 1, codegrees=True), exact=True) == 0


def test_single_candidate_has_zero_variance():
    st_ = new_process(4, 5, codegrees=True).run_to(5)
    assert cond_cov_exact(TRIANGLE, TRIANGLE, st_, exact=True) == 0


def test_wedge_triangle_cross_moment_two_ways():
    st_ = new_process(14, 3, codegrees=True).run_to(40)
    cu, cw = st_.non_edges()
    d = st_.degree
    c = st_.codegree_matrix()[cu, cw]
    k = cu.size
    mean_prod = Fraction(int((12 * (d[cu] + d[cw]) * c).sum()), k)
    mean_w = Fraction(int((2 * (d[cu] + d[cw])).sum()), k)
    mean_t = Fraction(int((6 * c).sum()), k)
    assert cond_cov_exact(WEDGE, TRIANGLE, st_, exact=True) == mean_prod - mean_w * mean_t
    assert float(cond_cov_exact(WEDGE, TRIANGLE, st_, exact=True)) == pytest.approx(
        cond_cov_exact(WEDGE, TRIANGLE, st_)
    )
    M = cond_cov_matrix([WEDGE, TRIANGLE], st_)
    assert M[0, 1] == pytest.approx(cond_cov_exact(WEDGE, TRIANGLE, st_))


@given(st.integers(10, 200), st.floats(0.01, 0.99))
def test_surrogate_closed_forms(n, s_frac):
    N = pair_count(n)
    i = max(1, min(N, round(s_frac * N)))
    s = i / N
    assert v_surrogate(WEDGE, WEDGE, i, n) == pytest.approx(8 * n * s * (1 - s))
    assert v_surrogate(WEDGE, TRIANGLE, i, n) == pytest.approx(24 * n * s * s * (1 - s))
    assert v_surrogate(TRIANGLE, TRIANGLE, i, n) == pytest.approx(36 * n * s * s * (1 - s * s))
    orth = v_surrogate(WEDGE, TRIANGLE, i, n) - 3 * s * v_surrogate(WEDGE, WEDGE, i, n)
    assert orth == pytest.approx(0, abs=1e-9 * n)


def test_w_correction_examples():
    n = 20
    N = pair_count(n)
    assert w_correction(WEDGE, WEDGE, N // 2, n, 0.0) == 0
    assert w_correction(EDGE, WEDGE, N // 2, n, 10.0) == 0
    i = N // 2
    assert i / N == 0.5
    assert w_correction(WEDGE, WEDGE, i, n, 10.0) == pytest.approx(W_CORRECTION_EXAMPLE)
    sur = surrogate(WEDGE, TRIANGLE, i, n, 10.0)
    assert sur.theta1 == 24 and sur.theta2 == 0


def test_a_star_form_examples():
    n, N = 30, pair_count(30)
    i = N // 3
    s = i / N
    assert a_star_form(WEDGE, i, n, 0, 0, 0) == pytest.approx(4 * s * n)
    assert a_star_form(EDGE, i, n, 5, -3, 2) == 2


def test_a_star_wedge_error_is_small():
    n = 60
    st_ = new_process(n, 8, codegrees=True).run_to(500)
    diff = candidate_increments(WEDGE, st_) - a_star_candidates(WEDGE, st_)
    # A_wedge - A*_wedge = 4s n - 8(i-1)/n, uniformly over candidates
    assert np.ptp(diff) == pytest.approx(0, abs=1e-9)
    assert abs(diff[0]) < 5


def test_y_second_moment_zero_for_wedge_and_triangle():
    st_ = new_process(20, 2, codegrees=True).run_to(60)
    assert y_second_moment(WEDGE, st_) == pytest.approx(0, abs=1e-9)
    assert y_second_moment(TRIANGLE, st_) == pytest.approx(0, abs=1e-9)


def test_y_second_moment_path3_small():
    n = 40
    st_ = new_process(n, 6, codegrees=True).run_to(int(0.4 * pair_count(n)) - 1)
    assert y_second_moment(PATH3, st_) <= 50 * math.log(n) * n**2


def test_general_pattern_cap():
    st_ = new_process(40, 0, codegrees=True)
    with pytest.raises(ResourceLimitError):
        candidate_increments(K4, st_, cap=10)


def test_tau_examples():
    assert tau_quadratic_variation(0.0, 0.0, 50, 0.5) == 0
    assert tau_quadratic_variation(1.0, 0.0, 2000, 1.0) == pytest.approx(2 / 3, rel=2e-3)
    arr = np.ones(pair_count(30) // 2)
    assert tau_quadratic_variation(arr, None, 30, 0.5) == pytest.approx(
        tau_quadratic_variation(1.0, None, 30, 0.5)
    )


@pytest.mark.parametrize("H", [WEDGE, TRIANGLE, K4], ids=lambda H: H.name)
@pytest.mark.parametrize("t", [0.3, 0.7])
def test_closed_form_tau_matches_sum(H, t):
    n = 300
    k, r = lambda_star_kappa_rho(H, t)
    assert lambda_star_tau(H, n, t) == pytest.approx(tau_quadratic_variation(k, r, n, t), rel=1e-9)
    val = 2 * t ** (2 * H.e - 4) * lambda_star_tau(H, n, t) * gamma_rate(H, t)
    assert abs(val - 1) < 5 / n


def test_covariance_rows_csv():
    base = new_process(25, 1, codegrees=True)
    states = [base.replay(k) for k in (0, 50, 150)]
    rows = covariance_rows(states)
    assert [r["i"] for r in rows] == [1, 51, 151]
    text = rows_to_csv(rows)
    assert text.splitlines()[0].startswith("i,s,cov_ww")
