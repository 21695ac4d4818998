"""Conditional second moments of the step increments, and their deterministic
surrogates.

Given G_{i-1}, the next edge is uniform over the N-i+1 non-edges, so every
conditional moment is an exact finite average over those candidates.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.special import zeta

from .combinat import falling, pair_count
from .errors import InvalidArgumentError, ResourceLimitError
from .graph_process import GraphState, codegree_mean
from .patterns import HostGraph, Pattern, _shape, count_anchored

DEFAULT_CANDIDATE_CAP = 5_000_000
GENERAL_CANDIDATE_CAP = 20_000


def candidate_increments(F: Pattern, state: GraphState, cap: int | None = None) -> np.ndarray:
    """A_F for every non-edge of the current graph, in pair-index order."""
    cu, cw = state.non_edges()
    k = cu.size
    shape = _shape(F) if F.e else "empty"
    limit = cap if cap is not None else (DEFAULT_CANDIDATE_CAP if shape else GENERAL_CANDIDATE_CAP)
    if k > limit:
        raise ResourceLimitError(f"{k} candidate edges exceed the cap of {limit}")
    if shape == "empty":
        return np.zeros(k, dtype=np.int64)
    iso = falling(state.n - F.v_core, F.v - F.v_core)
    deg = state.degree
    if shape == "edge":
        a = np.full(k, 2, dtype=np.int64)
    elif shape == "wedge":
        a = 2 * (deg[cu] + deg[cw])
    elif shape == "triangle":
        a = 6 * state.codegree_matrix()[cu, cw]
    elif shape == "star3":
        a = 3 * (deg[cu] * (deg[cu] - 1) + deg[cw] * (deg[cw] - 1))
    elif shape == "path3":
        S = state.adj.astype(np.int64) @ deg
        c = state.codegree_matrix()[cu, cw]
        du, dw = deg[cu], deg[cw]
        a = 2 * (du * dw - 3 * c + S[cu] + S[cw] - du - dw)
    else:
        host = HostGraph(state.n, list(state.nbr))
        return np.array(
            [count_anchored(host, F, int(u), int(w)) for u, w in zip(cu, cw)], dtype=np.int64
        )
    return iso * a.astype(np.int64)


def _moments(a: np.ndarray, b: np.ndarray, exact: bool):
    k = a.size
    if k == 0:
        return Fraction(0) if exact else 0.0
    if exact:
        sa = sum(int(x) for x in a)
        sb = sum(int(x) for x in b)
        sab = sum(int(x) * int(y) for x, y in zip(a.tolist(), b.tolist()))
        return Fraction(sab * k - sa * sb, k * k)
    af = a.astype(np.float64)
    bf = b.astype(np.float64)
    return float(np.mean((af - af.mean()) * (bf - bf.mean())))


def cond_cov_exact(F: Pattern, F2: Pattern, state: GraphState, exact: bool = False, cap=None):
    """E[X_F X_F' | G_{i-1}] with G_{i-1} the current graph of ``state``."""
    a = candidate_increments(F, state, cap)
    b = a if F2 == F else candidate_increments(F2, state, cap)
    return _moments(a, b, exact)


def cond_cov_matrix(patterns: Sequence[Pattern], state: GraphState) -> np.ndarray:
    cols = np.stack([candidate_increments(F, state).astype(np.float64) for F in patterns])
    cols -= cols.mean(axis=1, keepdims=True)
    return cols @ cols.T / cols.shape[1]


def x_star_weights(F: Pattern, i: int, N: int, n: int, v: int | None = None) -> tuple[float, float]:
    """Weights (c_wedge, c_tri) with X*_F = c_wedge X_wedge + c_tri X_tri at step i."""
    if not 1 <= i <= N:
        raise InvalidArgumentError("need 1 <= i <= N")
    v = F.v if v is None else v
    s = i / N
    scale = float(n) ** (v - 3)
    W, T, e = F.wedge_count, F.triangle_count, F.e
    cw = scale * s ** (e - 2) * (W - 3 * T) if W - 3 * T else 0.0
    ct = scale * s ** (e - 3) * T if T else 0.0
    return cw, ct


def y_second_moment(F: Pattern, state: GraphState, v: int | None = None) -> float:
    """E[Y_F^2 | G_{i-1}] where Y_F = X_F - X*_F and i is the next step."""
    from .patterns import TRIANGLE, WEDGE

    i = state.i + 1
    cw, ct = x_star_weights(F, i, state.N, state.n, v)
    y = candidate_increments(F, state).astype(np.float64)
    if cw:
        y = y - cw * candidate_increments(WEDGE, state)
    if ct:
        y = y - ct * candidate_increments(TRIANGLE, state)
    return float(np.var(y)) if y.size else 0.0


def theta1(F: Pattern, F2: Pattern) -> int:
    return 8 * F.wedge_count * F2.wedge_count


def theta2(F: Pattern, F2: Pattern) -> int:
    return 36 * F.triangle_count * F2.triangle_count


def _s(i: int, n: int) -> float:
    N = pair_count(n)
    if not 1 <= i <= N:
        raise InvalidArgumentError(f"i={i} outside 1..{N}")
    return i / N


def v_surrogate(F: Pattern, F2: Pattern, i: int, n: int) -> float:
    s = _s(i, n)
    v, v2, e, e2 = F.v, F2.v, F.e, F2.e
    return (
        float(n) ** (v + v2 - 5)
        * s ** (e + e2 - 4)
        * (1 - s)
        * (s * theta1(F, F2) + (1 - s) * theta2(F, F2))
    )


def w_correction(F: Pattern, F2: Pattern, i: int, n: int, d_wedge: float) -> float:
    """State-dependent correction driven by the wedge deviation of G_{i-1}."""
    s = _s(i, n)
    W = F.wedge_count * F2.wedge_count
    if W == 0 or d_wedge == 0:
        return 0.0
    return 8.0 * float(n) ** (F.v + F2.v - 7) * s ** (F.e + F2.e - 4) * W * d_wedge


@dataclass
class CovarianceSurrogate:
    F: Pattern
    F2: Pattern
    i: int
    n: int
    V: float
    W: float
    theta1: int
    theta2: int


def surrogate(F: Pattern, F2: Pattern, i: int, n: int, d_wedge: float = 0.0) -> CovarianceSurrogate:
    return CovarianceSurrogate(
        F, F2, i, n, v_surrogate(F, F2, i, n), w_correction(F, F2, i, n, d_wedge),
        theta1(F, F2), theta2(F, F2),
    )


def a_star_form(F: Pattern, i: int, n: int, d_u: float, d_w: float, d_uw: float) -> float:
    """Linear approximation of A_F through endpoint degree and codegree deviations."""
    s = _s(i, n)
    v, e = F.v, F.e
    W, T = F.wedge_count, F.triangle_count
    out = 2.0 * e * s ** (e - 1) * float(n) ** (v - 2)
    if 2 * W - 6 * T:
        out += s ** (e - 2) * float(n) ** (v - 3) * (2 * W - 6 * T) * (d_u + d_w)
    if T:
        out += 6.0 * s ** (e - 3) * float(n) ** (v - 3) * T * d_uw
    return out


def a_star_candidates(F: Pattern, state: GraphState) -> np.ndarray:
    """A*_F at every candidate edge, with deviations taken in G_{i-1}."""
    cu, cw = state.non_edges()
    i = state.i + 1
    mean_d = 2.0 * state.i / state.n
    dev = state.degree - mean_d
    co = state.codegree_matrix()[cu, cw] - codegree_mean(state.n, state.i)
    return np.array(
        [a_star_form(F, i, state.n, dev[u], dev[w], c) for u, w, c in zip(cu, cw, co)]
    )


def _as_array(f, s: np.ndarray) -> np.ndarray:
    if f is None:
        return np.zeros_like(s)
    if callable(f):
        return np.broadcast_to(np.asarray(f(s), dtype=np.float64), s.shape)
    arr = np.asarray(f, dtype=np.float64)
    if arr.ndim == 0:
        return np.full_like(s, float(arr))
    if arr.shape != s.shape:
        raise InvalidArgumentError("coefficient array must have one entry per step")
    return arr


def tau_quadratic_variation(
    kappa: Callable | float | np.ndarray | None,
    rho: Callable | float | np.ndarray | None,
    n: int,
    t: float,
    chunk: int = 1 << 20,
) -> float:
    """n^{-2} sum_{i <= tN} (8 s(1-s) kappa^2 + 36 s^2 (1-s)^2 rho^2) with s = i/N.

    ``kappa`` and ``rho`` are constants, per-step arrays, or vectorised
    functions of s.
    """
    if not 0 < t <= 1:
        raise InvalidArgumentError("t must lie in (0, 1]")
    N = pair_count(n)
    m = math.floor(t * N)
    parts = []
    for lo in range(1, m + 1, chunk):
        i = np.arange(lo, min(lo + chunk, m + 1), dtype=np.float64)
        s = i / N
        if isinstance(kappa, np.ndarray) or isinstance(rho, np.ndarray):
            sl = slice(lo - 1, lo - 1 + s.size)
            ka = _as_array(kappa[sl] if isinstance(kappa, np.ndarray) else kappa, s)
            ra = _as_array(rho[sl] if isinstance(rho, np.ndarray) else rho, s)
        else:
            ka, ra = _as_array(kappa, s), _as_array(rho, s)
        parts.append(
            math.fsum((8 * s * (1 - s) * ka**2 + 36 * s * s * (1 - s) ** 2 * ra**2).tolist())
        )
    return math.fsum(parts) / (n * n)


def lambda_star_kappa_rho(H: Pattern, t: float):
    """Coefficient functions of the Lambda* increments, normalised by t^{e-2}."""
    W, T = H.wedge_count, H.triangle_count

    def kappa(s):
        return W * ((1 - t) / (1 - s)) ** 2

    def rho(s):
        return T / t * ((1 - t) / (1 - s)) ** 3

    return kappa, rho


def _inv_power_sum(j: int, a: int, b: int) -> float:
    """sum_{k=a}^{b} k^{-j}."""
    if a > b:
        return 0.0
    return float(zeta(j, a) - zeta(j, b + 1))


def lambda_star_tau(H: Pattern, n: int, t: float) -> float:
    """Closed form of tau for the Lambda* coefficients (no per-step loop).

    With k = N - i: s/(1-s)^3 = N^3/k^3 - N^2/k^2 and
    s^2/(1-s)^4 = N^4/k^4 - 2N^3/k^3 + N^2/k^2.
    """
    if not 0 < t < 1:
        raise InvalidArgumentError("t must lie in (0, 1)")
    N = pair_count(n)
    m = math.floor(t * N)
    a, b = N - m, N - 1
    z2, z3, z4 = (_inv_power_sum(j, a, b) for j in (2, 3, 4))
    Nf = float(N)
    s_w = Nf**3 * z3 - Nf**2 * z2
    s_t = Nf**4 * z4 - 2 * Nf**3 * z3 + Nf**2 * z2
    W, T = H.wedge_count, H.triangle_count
    tau = 8 * W * W * (1 - t) ** 4 * s_w + 36 * T * T * (1 - t) ** 6 / (t * t) * s_t
    return tau / (n * n)


def covariance_rows(states: Sequence[GraphState], patterns=None) -> list[dict]:
    """Per-state exact covariances of the wedge/triangle increments next to V and W."""
    from .patterns import TRIANGLE, WEDGE, count_embeddings, expected_count

    rows = []
    for st in states:
        i = st.i + 1
        n = st.n
        s = i / st.N
        cov = cond_cov_matrix([WEDGE, TRIANGLE], st)
        host = HostGraph(n, list(st.nbr))
        dw = float(count_embeddings(host, WEDGE) - expected_count(WEDGE, n, st.i))
        v_ww = v_surrogate(WEDGE, WEDGE, i, n)
        w_ww = w_correction(WEDGE, WEDGE, i, n, dw)
        rows.append(
            {
                "i": i,
                "s": s,
                "cov_ww": float(cov[0, 0]),
                "cov_wt": float(cov[0, 1]),
                "cov_tt": float(cov[1, 1]),
                "V_ww": v_ww,
                "V_wt": v_surrogate(WEDGE, TRIANGLE, i, n),
                "V_tt": v_surrogate(TRIANGLE, TRIANGLE, i, n),
                "W_ww": w_ww,
                "resid_ww": float(cov[0, 0]) - v_ww - w_ww,
                "orth": float(cov[0, 1]) - 3 * s * float(cov[0, 0]),
            }
        )
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        wr = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
