import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from gdev.combinat import pair_count
from gdev.errors import InternalInconsistencyError
from gdev.graph_process import new_process
from gdev.martingale import (
    build_trace,
    cond_exp_increment,
    increment,
    increment_and_center,
    lambda_combination,
    lambda_double_star,
    lambda_star_accumulate,
    lambda_star_coefficients,
    lattice_x_star_coefficients,
    mart_coefficient,
    mart_coefficient_float,
    nu_coefficient,
    trace_summary,
    trace_to_csv,
    verify_decomposition,
    x_star,
    y_residual,
)
from gdev.patterns import (
    C4,
    EDGE,
    K4,
    PATH3,
    TRIANGLE,
    WEDGE,
    HostGraph,
    SubgraphLattice,
    count_embeddings,
    parse_pattern,
)
from oracles import MART_COEF_1_2_N10_I2_M5


def test_coefficient_examples():
    assert mart_coefficient(1, 2, 2, 5, 10) == MART_COEF_1_2_N10_I2_M5
    assert mart_coefficient(3, 3, 7, 7, 20) == 1
    assert mart_coefficient(0, 2, 4, 4, 20) == 0
    assert mart_coefficient(2, 2, 3, 8, 15) == Fraction(7 * 6, 12 * 11)


@given(st.integers(1, 4), st.data())
def test_coefficient_float_matches_exact(e, data):
    N = data.draw(st.integers(e + 1, 60))
    c = data.draw(st.integers(0, e))
    m = data.draw(st.integers(1, N - e))
    i = data.draw(st.integers(0, m))
    assert mart_coefficient_float(c, e, i, m, N) == pytest.approx(float(mart_coefficient(c, e, i, m, N)), rel=1e-12, abs=1e-300)


def test_coefficient_recursion_agrees_with_closed_form():
    from gdev.martingale import _coefficient_by_recursion

    N = 15
    for e in (2, 3):
        for c in range(e + 1):
            for i in range(0, N - e + 1):
                for m in range(i, N + 1):
                    if N - m < 0:
                        continue
                    closed = Fraction(
                        math.perm(N - m, c) * math.perm(m - i, e - c), math.perm(N - i, e)
                    )
                    assert _coefficient_by_recursion(c, e, i, m, N) == closed


def test_nu_coefficient_examples():
    assert nu_coefficient(1, 1, 3, 10, 45) == 0.0
    assert abs(nu_coefficient(2, 2, 5, 20, 45)) <= 24 * 4 / 100
    assert nu_coefficient(1, 3, 9, 9, 45) == 0.0


def test_cond_exp_examples():
    n = 7
    N = pair_count(n)
    for i in (1, 5, 20):
        lat = SubgraphLattice(EDGE)
        counts = {0: n * (n - 1), 1: 2 * (i - 1)}
        assert cond_exp_increment(lat, 1, counts, i, N) == 2
    lat = SubgraphLattice(WEDGE)
    G = HostGraph(n, [0] * n)
    counts = {mk: count_embeddings(G, lat[mk]) for mk in lat}
    assert cond_exp_increment(lat, lat.full, counts, 1, N) == 0


def test_single_candidate_triangle():
    G = HostGraph.from_edges(4, [(0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    A, X = increment_and_center(TRIANGLE, G, 0, 1)
    assert A == 12 and X == 0
    assert increment(WEDGE, HostGraph(5, [0] * 5), 0, 1) == 0


@pytest.mark.parametrize("H", [WEDGE, TRIANGLE, PATH3, C4, K4], ids=lambda H: H.name)
def test_increments_are_centred(H):
    rng = random.Random(H.e)
    n = 7
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    rng.shuffle(pairs)
    G = HostGraph.from_edges(n, pairs[:9])
    cands = pairs[9:]
    assert sum(increment_and_center(H, G, u, w)[1] for u, w in cands) == 0


def test_wedge_increment_formula():
    G = HostGraph.from_edges(6, [(0, 2), (0, 3), (1, 4)])
    assert increment(WEDGE, G, 0, 1) == 2 * (2 + 1)


@pytest.mark.parametrize("H", [EDGE, WEDGE, TRIANGLE, PATH3, C4], ids=lambda H: H.name)
@pytest.mark.parametrize("n", [5, 6])
def test_decomposition_exact(H, n):
    tr = build_trace(new_process(n, 2024 + n), H)
    for m in range(1, tr.N + 1):
        assert verify_decomposition(tr, m).residual == 0


def test_decomposition_examples():
    tr = build_trace(new_process(6, 9), WEDGE, 9)
    assert verify_decomposition(tr).residual == 0
    tr = build_trace(new_process(6, 9), EDGE)
    assert all(st.X[1] == 0 for st in tr.steps)


def test_tampered_trace_is_detected():
    tr = build_trace(new_process(6, 3), TRIANGLE, 10)
    tr.steps[4].X[tr.lattice.full] += 1
    with pytest.raises(InternalInconsistencyError):
        verify_decomposition(tr, 10)


def test_general_pattern_trace():
    H = parse_pattern("v=4; edges=0-1,1-2,0-2,2-3")
    tr = build_trace(new_process(6, 1), H)
    assert verify_decomposition(tr).residual == 0


def test_x_star_examples():
    assert x_star(WEDGE, 10, 45, 10, 3, 2.5, 7.0) == 2.5
    s = 10 / 45
    assert x_star(TRIANGLE, 10, 45, 10, 3, 2.5, 7.0) == pytest.approx(7.0)
    assert x_star(PATH3, 10, 45, 10, 4, 2.5, 7.0) == pytest.approx(10 * s * 2 * 2.5)


def test_y_residual_vanishes_for_wedge_and_triangle():
    tr = build_trace(new_process(9, 5), TRIANGLE, exact=False)
    for stp in tr.steps:
        full = tr.lattice.full
        xs = x_star(TRIANGLE, stp.i, tr.N, tr.n, 3, float(stp.X_wedge), float(stp.X_tri))
        assert y_residual(float(stp.X[full]), xs) == pytest.approx(0, abs=1e-9)
        wedge_mask = 0b011
        xs = x_star(WEDGE, stp.i, tr.N, tr.n, 3, float(stp.X_wedge), float(stp.X_tri))
        assert float(stp.X[wedge_mask]) == pytest.approx(xs, abs=1e-9)


def test_lambda_combination_examples():
    assert lambda_combination(WEDGE, 0.3, 50, 4.0, 9.0) == 4.0
    assert lambda_combination(TRIANGLE, 0.5, 10, 4.0, 9.0) == 9.0
    n, t = 20, 0.4
    assert lambda_combination(K4, t, n, 4.0, 9.0) == pytest.approx(4 * n * t**3 * 9.0)


@pytest.mark.parametrize("H", [WEDGE, TRIANGLE, PATH3, C4, K4], ids=lambda H: H.name)
def test_lambda_star_coefficients_from_lattice(H):
    for s in (0.01, 0.2, 0.45):
        a = lambda_star_coefficients(H, 30, s, 0.5)
        b = lattice_x_star_coefficients(H, 30, s, 0.5)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-9)


def test_lambda_star_pure_wedge_when_triangle_free():
    cw, ct = lambda_star_coefficients(PATH3, 30, 0.2, 0.5)
    assert ct == 0 and cw > 0


def test_lambda_approximants_track_deviation():
    n, t = 30, 0.4
    m = math.floor(t * pair_count(n))
    star_err = []
    dstar_err = []
    for seed in range(12):
        tr = build_trace(new_process(n, seed), TRIANGLE, m, exact=False)
        d = float(tr.deviation())
        star_err.append(abs(lambda_star_accumulate(TRIANGLE, t, tr) - d))
        dstar_err.append(abs(lambda_double_star(TRIANGLE, t, tr) - d))
    assert max(star_err) <= 10 * math.sqrt(t) * n * math.log(n)
    assert max(dstar_err) <= 10 * t * n


def test_lambda_double_star_edge_is_zero():
    tr = build_trace(new_process(8, 0), EDGE, exact=False)
    assert lambda_double_star(EDGE, 0.5, tr) == 0


def test_trace_exports():
    tr = build_trace(new_process(8, 4), TRIANGLE, 14, quad_var=True)
    text = trace_to_csv(tr)
    assert text.splitlines()[0].startswith("i,s,u,w,A_0")
    assert len(text.splitlines()) == 15
    summ = trace_summary(tr, 0.5)
    assert summ["D_H_at_t"] == tr.deviation(14)
    assert summ["V"] >= 0
