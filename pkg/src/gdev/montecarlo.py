"""Seeded Monte Carlo estimates of G(n, m) deviation tails.

Samples are produced in fixed-size chunks; chunk ``c`` draws from the
substream ``SeedSequence(seed, spawn_key=(c,))``.  Chunks are reduced in
index order, so results depend on (seed, samples) only, never on the number
of worker threads.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import beta as beta_dist
from scipy.stats import norm

from .combinat import falling, pair_count
from .errors import DegenerateRateError, InvalidArgumentError
from .graph_process import GENERATOR_NAME, make_rng, pair_arrays
from .patterns import EDGE, TRIANGLE, WEDGE, HostGraph, Pattern, _shape, count_embeddings

CHUNK_ELEMENTS = 1 << 22
EXACT_GENERAL_MAX_N = 40


def gamma_rate(H: Pattern, t: float) -> float:
    """Rate constant of the moderate-deviation tail of D_H(G(n, tN))."""
    if not 0 < t < 1:
        raise InvalidArgumentError(f"t={t} must lie in (0, 1)")
    W, T, e = H.wedge_count, H.triangle_count, H.e
    if W == 0 and T == 0:
        raise DegenerateRateError("pattern has neither wedges nor triangles")
    den = 4 * W * W * t ** (2 * e - 2) * (1 - t) ** 2 + 12 * T * T * t ** (2 * e - 3) * (1 - t) ** 3
    return 1.0 / den


def gamma_rate_terms(H: Pattern, t: float) -> dict:
    """The two contributions to 1/gamma; the wedge one alone governs triangle-free H."""
    W, T, e = H.wedge_count, H.triangle_count, H.e
    return {
        "wedge_term": 4 * W * W * t ** (2 * e - 2) * (1 - t) ** 2,
        "triangle_term": 12 * T * T * t ** (2 * e - 3) * (1 - t) ** 3,
    }


@dataclass
class RatePrediction:
    gamma: float
    alpha: float
    log_prob_pred: float
    regime_ok: bool
    notes: list = field(default_factory=list)


def predict_rate(H: Pattern, t: float, alpha: float, n: int) -> RatePrediction:
    g = gamma_rate(H, t)
    notes = []
    if not alpha > 1:
        notes.append("alpha should tend to infinity")
    if not alpha < math.sqrt(n):
        notes.append("alpha should be o(sqrt n)")
    return RatePrediction(g, alpha, -g * alpha * alpha, not notes, notes)


@dataclass
class TailEstimate:
    n: int
    t: float
    pattern: str
    alpha: float
    direction: str
    threshold: float
    samples: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    ci_method: str
    confidence: float
    seed: int
    streams: int
    chunk_size: int
    generator: str
    method: str
    runtime: float = 0.0

    def as_dict(self, runtime: bool = False) -> dict:
        d = dict(self.__dict__)
        if not runtime:
            d.pop("runtime")
        return d


def clopper_pearson(hits: int, samples: int, confidence: float = 0.95) -> tuple[float, float]:
    a = 1 - confidence
    lo = 0.0 if hits == 0 else float(beta_dist.ppf(a / 2, hits, samples - hits + 1))
    hi = 1.0 if hits == samples else float(beta_dist.ppf(1 - a / 2, hits + 1, samples - hits))
    return lo, hi


def wilson(hits: int, samples: int, confidence: float = 0.95) -> tuple[float, float]:
    z = float(norm.ppf(1 - (1 - confidence) / 2))
    ph = hits / samples
    den = 1 + z * z / samples
    mid = (ph + z * z / (2 * samples)) / den
    half = z * math.sqrt(ph * (1 - ph) / samples + z * z / (4 * samples * samples)) / den
    lo = 0.0 if hits == 0 else max(0.0, mid - half)
    hi = 1.0 if hits == samples else min(1.0, mid + half)
    return lo, hi


def chunk_size_for(n: int) -> int:
    return int(max(8, min(2048, CHUNK_ELEMENTS // pair_count(n))))


def _needs(H: Pattern, method: str, n: int) -> tuple[str, bool]:
    """(evaluation route, whether adjacency matrices are required)."""
    shape = _shape(H) if H.e else "empty"
    if method not in ("auto", "exact", "lambda"):
        raise InvalidArgumentError(f"unknown method {method!r}")
    if shape in ("empty", "edge", "wedge", "star3") and method != "lambda":
        return shape, False
    if shape in ("triangle", "path3") and method != "lambda":
        return shape, True
    if method == "exact" or (method == "auto" and n <= EXACT_GENERAL_MAX_N):
        return "general", True
    return "lambda", H.triangle_count > 0


def sample_chunk(n: int, m: int, B: int, rng: np.random.Generator, adjacency: bool):
    """Degrees (B, n) and optionally adjacency (B, n, n) of B samples of G(n, m)."""
    N = pair_count(n)
    pu, pw = pair_arrays(n)
    keys = rng.random((B, N))
    if m < N:
        idx = np.argpartition(keys, m - 1, axis=1)[:, :m] if m > 0 else np.empty((B, 0), np.int64)
    else:
        idx = np.broadcast_to(np.arange(N), (B, N))
    u, w = pu[idx], pw[idx]
    off = (np.arange(B) * n)[:, None]
    deg = np.bincount((u + off).ravel(), minlength=B * n) + np.bincount(
        (w + off).ravel(), minlength=B * n
    )
    deg = deg.reshape(B, n)
    A = None
    if adjacency:
        A = np.zeros((B, n * n), dtype=np.float32)
        rows = np.repeat(np.arange(B), m)
        A[rows, (u * n + w).ravel()] = 1.0
        A[rows, (w * n + u).ravel()] = 1.0
        A = A.reshape(B, n, n)
    return deg, A


def _chunk_stats(n: int, m: int, H: Pattern, route: str, adjacency: bool, B: int, rng) -> dict:
    deg, A = sample_chunk(n, m, B, rng, adjacency or route in ("triangle", "path3", "general"))
    d = deg.astype(np.float64)
    v = H.v
    N = pair_count(n)
    L = lambda P: float(falling(n, P.v) * falling(m, P.e)) / float(falling(N, P.e))
    n_wedge = np.sum(d * (d - 1), axis=1)
    d_wedge = n_wedge - L(WEDGE)
    d_tri = None
    if A is not None:
        A2 = np.matmul(A, A)
        n_tri = np.einsum("bij,bij->b", A2, A).astype(np.float64)
        d_tri = n_tri - L(TRIANGLE)
    iso = float(falling(n - H.v_core, v - H.v_core))
    if route == "empty" or route == "edge":
        dh = np.zeros(B)
    elif route == "wedge":
        dh = iso * n_wedge - L(H)
    elif route == "star3":
        dh = iso * np.sum(d * (d - 1) * (d - 2), axis=1) - L(H)
    elif route == "triangle":
        dh = iso * n_tri - L(H)
    elif route == "path3":
        dm = (d - 1)[:, :, None]
        q = np.matmul(np.matmul(np.transpose(dm, (0, 2, 1)), A.astype(np.float64)), dm)[:, 0, 0]
        dh = iso * (q - n_tri) - L(H)
    elif route == "general":
        Ab = A.astype(bool)
        cnt = np.array(
            [count_embeddings(HostGraph.from_adjacency(Ab[b]), H) for b in range(B)], dtype=np.float64
        )
        dh = cnt - L(H)
    else:
        dh = None
    return {"D_wedge": d_wedge, "D_tri": d_tri, "D_H": dh}


def _run_chunks(n, m, H, samples, seed, threads, method):
    route, adjacency = _needs(H, method, n)
    B = chunk_size_for(n)
    nchunks = -(-samples // B)
    sizes = [min(B, samples - c * B) for c in range(nchunks)]

    def work(c):
        return _chunk_stats(n, m, H, route, adjacency, sizes[c], make_rng(seed, (c,)))

    threads = max(1, int(threads or os.cpu_count() or 1))
    if threads == 1:
        res = [work(c) for c in range(nchunks)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            res = list(ex.map(work, range(nchunks)))
    out = {}
    for key in ("D_wedge", "D_tri", "D_H"):
        parts = [r[key] for r in res]
        out[key] = None if parts[0] is None else np.concatenate(parts)
    return out, route, B, nchunks


def _lambda_values(H: Pattern, t: float, n: int, dw: np.ndarray, dt) -> np.ndarray:
    from .martingale import lambda_combination

    dt = np.zeros_like(dw) if dt is None else dt
    return np.array([lambda_combination(H, t, n, a, b) for a, b in zip(dw, dt)])


def _m_of(n: int, t: float) -> int:
    if not 0 < t <= 1:
        raise InvalidArgumentError("t must lie in (0, 1]")
    m = math.floor(t * pair_count(n))
    if m < 1:
        raise InvalidArgumentError("t*N must be at least 1")
    return m


def estimate_tail(
    n: int,
    t: float,
    H: Pattern,
    alpha: float,
    direction: str = "upper",
    samples: int = 10_000,
    seed: int = 0,
    threads: int | None = None,
    ci: str = "clopper-pearson",
    confidence: float = 0.95,
    method: str = "auto",
) -> TailEstimate:
    """P(D_H(G(n, m)) > alpha n^{v-3/2}) (or < -alpha n^{v-3/2}) with m = floor(tN)."""
    if samples < 1:
        raise InvalidArgumentError("samples must be positive")
    if direction not in ("upper", "lower"):
        raise InvalidArgumentError("direction must be 'upper' or 'lower'")
    m = _m_of(n, t)
    t0 = time.perf_counter()
    stats, route, B, nchunks = _run_chunks(n, m, H, samples, seed, threads, method)
    dh = stats["D_H"]
    if dh is None:
        dh = _lambda_values(H, t, n, stats["D_wedge"], stats["D_tri"])
    thr = alpha * float(n) ** (H.v - 1.5)
    hits = int(np.sum(dh > thr)) if direction == "upper" else int(np.sum(dh < -thr))
    if ci == "clopper-pearson":
        lo, hi = clopper_pearson(hits, samples, confidence)
    elif ci == "wilson":
        lo, hi = wilson(hits, samples, confidence)
    else:
        raise InvalidArgumentError(f"unknown interval method {ci!r}")
    ph = hits / samples
    return TailEstimate(
        n, t, H.spec(), float(alpha), direction, thr, samples, hits, ph,
        min(lo, ph), max(hi, ph), ci, confidence, int(seed), nchunks, B, GENERATOR_NAME,
        route, time.perf_counter() - t0,
    )


def alpha_for_exponent(H: Pattern, t: float, target: float) -> float:
    """alpha with gamma_H(t) alpha^2 = target."""
    return math.sqrt(target / gamma_rate(H, t))


def rate_statistic(est: TailEstimate, H: Pattern) -> float:
    """-log p_hat / (gamma alpha^2); the predicted limit is 1."""
    if est.hits == 0:
        return math.inf
    return -math.log(est.p_hat) / (gamma_rate(H, est.t) * est.alpha**2)


def empirical_distribution(
    n: int,
    t: float,
    H: Pattern,
    samples: int = 1000,
    seed: int = 0,
    threads: int | None = None,
    method: str = "auto",
) -> dict:
    """Moments and quantiles of D_H(G_m)/n^{v-3/2}, plus the joint samples."""
    m = _m_of(n, t)
    stats, route, B, nchunks = _run_chunks(n, m, H, samples, seed, threads, method)
    dw, dt = stats["D_wedge"], stats["D_tri"]
    lam = _lambda_values(H, t, n, dw, dt) if H.e >= 2 else np.zeros(samples)
    dh = stats["D_H"] if stats["D_H"] is not None else lam
    scale = float(n) ** (H.v - 1.5)
    z = dh / scale
    mean = float(np.mean(z))
    var = float(np.var(z, ddof=1)) if samples > 1 else 0.0
    se = math.sqrt(var / samples) if samples > 1 else math.inf
    corr = None
    if samples > 2 and np.std(dh) > 0 and np.std(lam) > 0:
        corr = float(np.corrcoef(dh, lam)[0, 1])
    qs = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99]
    return {
        "n": n,
        "t": t,
        "m": m,
        "pattern": H.spec(),
        "samples": samples,
        "seed": int(seed),
        "streams": nchunks,
        "chunk_size": B,
        "generator": GENERATOR_NAME,
        "method": route,
        "scale": scale,
        "mean": mean,
        "var": var,
        "se": se,
        "z": mean / se if se > 0 and math.isfinite(se) else 0.0,
        "quantiles": {str(q): float(v) for q, v in zip(qs, np.quantile(z, qs))},
        "corr_D_Lambda": corr,
        "samples_D_wedge": dw,
        "samples_D_tri": dt,
        "samples_Lambda": lam,
        "samples_D_H": dh,
    }
