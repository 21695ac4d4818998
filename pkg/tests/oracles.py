"""Independent brute-force oracles and frozen reference values.

Nothing here imports the package under test except for plain data types.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import comb, factorial

# Hand-evaluated constants.
K3_IN_K4_EMBEDDINGS = 24
K3_IN_K4_COPIES = 4
WEDGE_IN_K3 = 6
L_TRIANGLE_N4_M3 = Fraction(6, 5)  # 4 of the 20 three-edge graphs on 4 vertices hold a triangle
MART_COEF_1_2_N10_I2_M5 = Fraction(15, 56)
GAMMA_WEDGE_HALF = 4.0
GAMMA_TRIANGLE_HALF = 4.0 / 3.0
W_CORRECTION_EXAMPLE = 4.0  # F=F'=wedge, n=20, s=1/2, D=10
BINOM_N4_HALF_K2 = Fraction(6, 16)


def brute_embeddings(n: int, edges, H_v: int, H_edges) -> int:
    """Count injective maps V(H) -> [n] sending every edge of H to an edge."""
    E = {frozenset(e) for e in edges}
    total = 0
    for phi in itertools.permutations(range(n), H_v):
        if all(frozenset((phi[a], phi[b])) in E for a, b in H_edges):
            total += 1
    return total


def enumerate_mean_embeddings(n: int, m: int, H_v: int, H_edges) -> Fraction:
    """Exact E[N_H(G(n, m))] by listing every m-edge graph."""
    pairs = list(itertools.combinations(range(n), 2))
    tot = 0
    cnt = 0
    for es in itertools.combinations(pairs, m):
        tot += brute_embeddings(n, es, H_v, H_edges)
        cnt += 1
    return Fraction(tot, cnt)


def binom_tail_rational(N: int, p: Fraction, k: int) -> Fraction:
    q = 1 - p
    return sum((comb(N, j) * p**j * q ** (N - j) for j in range(k, N + 1)), Fraction(0))


def falling_bruteforce(x: int, k: int) -> int:
    if k > x:
        return 0
    return factorial(x) // factorial(x - k)
