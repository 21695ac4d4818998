import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from gdev.errors import InvalidArgumentError
from gdev.graph_process import new_process
from gdev.patterns import (
    C4,
    EDGE,
    K4,
    PATH3,
    TRIANGLE,
    WEDGE,
    HostGraph,
    Pattern,
    SubgraphLattice,
    all_patterns_up_to,
    complement_check,
    complement_deviation,
    count_anchored,
    count_embeddings,
    deviation,
    expected_count,
    l_increment_identity_check,
    parse_pattern,
)
from oracles import (
    K3_IN_K4_COPIES,
    K3_IN_K4_EMBEDDINGS,
    L_TRIANGLE_N4_M3,
    WEDGE_IN_K3,
    brute_embeddings,
    enumerate_mean_embeddings,
)


def complete(n):
    return HostGraph.from_edges(n, itertools.combinations(range(n), 2))


def random_host(n, p, seed):
    rng = random.Random(seed)
    return HostGraph.from_edges(n, [e for e in itertools.combinations(range(n), 2) if rng.random() < p])


def test_triangle_in_k4():
    N = count_embeddings(complete(4), TRIANGLE)
    assert N == K3_IN_K4_EMBEDDINGS
    assert N // TRIANGLE.aut_embedding_factor == K3_IN_K4_COPIES


def test_wedge_in_triangle():
    assert count_embeddings(complete(3), WEDGE) == WEDGE_IN_K3


def test_path3_in_c5_matches_brute_force():
    c5 = [(k, (k + 1) % 5) for k in range(5)]
    G = HostGraph.from_edges(5, c5)
    want = brute_embeddings(5, c5, 4, PATH3.edges)
    assert count_embeddings(G, PATH3) == want == count_embeddings(G, PATH3, general=True)


@pytest.mark.parametrize("H", all_patterns_up_to(4), ids=lambda H: H.label())
def test_counts_match_brute_force(H):
    if H.v > 7:
        pytest.skip("brute force too slow")
    G = random_host(7, 0.5, H.e * 31 + H.v)
    assert count_embeddings(G, H) == brute_embeddings(7, G.edges(), H.v, H.edges)


def test_pattern_classes_up_to_four_edges():
    assert len(all_patterns_up_to(4)) == 19


@pytest.mark.parametrize("H", [WEDGE, TRIANGLE, PATH3, C4, K4], ids=lambda H: H.label())
def test_anchored_count_is_difference(H):
    G = random_host(8, 0.4, 3)
    for u, w in itertools.combinations(range(8), 2):
        if G.nbr[u] >> w & 1:
            continue
        diff = count_embeddings(G.with_edge(u, w), H) - count_embeddings(G, H)
        assert count_anchored(G, H, u, w) == diff


def test_expected_count_examples():
    assert expected_count(TRIANGLE, 4, 3) == L_TRIANGLE_N4_M3
    assert enumerate_mean_embeddings(4, 3, 3, TRIANGLE.edges) == L_TRIANGLE_N4_M3
    assert expected_count(K4, 6, 15) == 6 * 5 * 4 * 3
    assert expected_count(K4, 6, 5) == 0


def test_l_increment_identity_examples():
    assert l_increment_identity_check(WEDGE, 5, 3)
    assert all(l_increment_identity_check(EDGE, 7, m) for m in range(1, 22))
    assert all(l_increment_identity_check(TRIANGLE, 6, m) for m in range(1, 16))


def test_deviation_examples():
    k4_minus = HostGraph.from_edges(4, [e for e in itertools.combinations(range(4), 2) if e != (0, 1)])
    assert deviation(k4_minus, TRIANGLE, exact=True) == 0
    star = HostGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    assert deviation(star, WEDGE, exact=True) == Fraction(6, 5)
    st = new_process(9, 2).run_to(17)
    assert deviation(st, EDGE, exact=True) == 0


def test_complement_examples():
    G = random_host(9, 0.45, 8)
    Gc = G.complement()
    assert deviation(G, WEDGE, exact=True) == deviation(Gc, WEDGE, exact=True)
    lhs = deviation(G, TRIANGLE, exact=True)
    assert lhs == -deviation(Gc, TRIANGLE, exact=True) + 3 * deviation(Gc, WEDGE, exact=True)
    assert deviation(G, EDGE, exact=True) == -deviation(Gc, EDGE, exact=True) == 0


@given(st.integers(4, 9), st.floats(0.0, 1.0), st.integers(0, 10**6))
def test_complement_identity_property(n, p, seed):
    G = random_host(n, p, seed)
    for H in (WEDGE, TRIANGLE, PATH3, C4):
        if H.v <= n:
            lhs, rhs = complement_check(G, H)
            assert lhs == rhs


def test_complement_deviation_needs_all_members():
    with pytest.raises(InvalidArgumentError):
        complement_deviation(WEDGE, {0: 0, 3: 1})


def test_lattice_structure():
    lat = SubgraphLattice(K4)
    assert len(lat) == 64
    assert lat[lat.full] == K4
    assert sorted(lat.drop(0b101)) == [0b001, 0b100]


def test_parse_pattern():
    H = parse_pattern("v=4; edges=0-1,1-2,2-3")
    assert H.edges == PATH3.edges
    assert parse_pattern("Triangle") is TRIANGLE
    with pytest.raises(InvalidArgumentError):
        parse_pattern("v=3; edges=0-0")
    with pytest.raises(InvalidArgumentError):
        parse_pattern("hexagon")


def test_pattern_validation():
    with pytest.raises(InvalidArgumentError):
        Pattern(3, ((0, 1), (0, 1)))
    with pytest.raises(InvalidArgumentError):
        Pattern(2, ((0, 5),))


def test_wedge_triangle_counts():
    assert (K4.wedge_count, K4.triangle_count) == (12, 4)
    assert (TRIANGLE.wedge_count, TRIANGLE.triangle_count) == (3, 1)
    assert (PATH3.wedge_count, PATH3.triangle_count) == (2, 0)
