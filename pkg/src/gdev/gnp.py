"""Binomial tails and moderate-deviation rates for subgraph counts in G(n, p).

Conditioning on the number of edges turns a G(n, p) tail into a binomial
mixture of G(n, m) tails, so everything here is binomial asymptotics glued
to the G(n, m) rate gamma_H.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp
from scipy.stats import binom

from .combinat import falling, pair_count
from .errors import DomainError, InvalidArgumentError, ResourceLimitError
from .montecarlo import gamma_rate
from .patterns import HostGraph, Pattern, _shape, count_embeddings

SERIES_CAP = 64
CONDITIONING_MAX_N = 7


@dataclass(frozen=True)
class BinomialSpec:
    N: int
    p: float

    def __post_init__(self) -> None:
        if not 0 < self.p < 1:
            raise InvalidArgumentError("p must lie in (0, 1)")
        if self.N < 1:
            raise InvalidArgumentError("N must be positive")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def sigma(self) -> float:
        return math.sqrt(self.N * self.p * self.q)

    def x_of(self, k: float) -> float:
        return (k - self.p * self.N) / self.sigma


def log_binom_exact(spec: BinomialSpec, k: float, mode: str = "pmf") -> float:
    """log b_N(k) or log B_N(k) = log P(Bin >= k); non-integer k is rounded up for tails."""
    N, p = spec.N, spec.p
    if mode == "pmf":
        if k != int(k) or not 0 <= k <= N:
            raise InvalidArgumentError(f"k={k} must be an integer in 0..{N}")
        return float(binom.logpmf(int(k), N, p))
    if mode != "upper_tail":
        raise InvalidArgumentError(f"unknown mode {mode!r}")
    if not 0 <= k <= N:
        raise InvalidArgumentError(f"k={k} outside 0..{N}")
    kk = math.ceil(k)
    if kk <= 0:
        return 0.0
    sf = float(binom.sf(kk - 1, N, p))
    if sf > 1e-280:
        return math.log(sf)
    ks = np.arange(kk, N + 1)
    return float(logsumexp(binom.logpmf(ks, N, p)))


def binom_exact(spec: BinomialSpec, k: float, mode: str = "pmf") -> float:
    return math.exp(log_binom_exact(spec, k, mode))


def binom_exact_rational(N: int, p: Fraction, k: int, mode: str = "pmf") -> Fraction:
    """Exact rational oracle for small N."""
    q = 1 - p
    if mode == "pmf":
        return math.comb(N, k) * p**k * q ** (N - k)
    return sum((math.comb(N, j) * p**j * q ** (N - j) for j in range(k, N + 1)), Fraction(0))


def bahadur_term(i: int, x: float, N: float, p: float) -> float:
    q = 1.0 - p
    num = p ** (i + 1) + (-1) ** i * q ** (i + 1)
    return num * x ** (i + 2) / ((i + 1) * (i + 2) * (p * q * N) ** (i / 2))


def bahadur_series(x: float, N: float, p: float, J: int | str = "converged") -> float:
    """E(x, N, J), or the full series E(x, N) summed adaptively."""
    if not 0 < p < 1:
        raise InvalidArgumentError("p must lie in (0, 1)")
    if not abs(x) < math.sqrt(N) / 2:
        raise DomainError(f"x={x} outside the convergence guard |x| < sqrt(N)/2")
    if J != "converged":
        J = int(J)
        if J < 0:
            raise InvalidArgumentError("J must be nonnegative")
        return math.fsum(bahadur_term(i, x, N, p) for i in range(1, J + 1))
    terms: list[float] = []
    prev = math.inf
    for i in range(1, SERIES_CAP + 1):
        t = bahadur_term(i, x, N, p)
        if t != 0.0:
            if abs(t) > prev and i > 2:
                raise DomainError(f"series terms grow at i={i}; x={x} too close to the guard")
            prev = abs(t)
        terms.append(t)
        s = math.fsum(terms)
        if t == 0.0 and s == 0.0:
            continue
        if abs(t) < 1e-15 * abs(s):
            return s
    raise DomainError(f"series did not converge within {SERIES_CAP} terms")


@dataclass
class BahadurTail:
    x: float
    log_pmf: float
    log_tail: float
    E: float

    @property
    def pmf(self) -> float:
        return math.exp(self.log_pmf)

    @property
    def tail(self) -> float:
        return math.exp(self.log_tail)


def bahadur_tail(spec: BinomialSpec, x: float, J: int | str = "converged") -> BahadurTail:
    """Asymptotic b_N and B_N at pN + x sqrt(Npq)."""
    if not x > 0:
        raise InvalidArgumentError("x must be positive")
    E = bahadur_series(x, spec.N, spec.p, J)
    expo = -x * x / 2 - E
    log_pmf = -0.5 * math.log(2 * math.pi * spec.N * spec.p * spec.q) + expo
    log_tail = -math.log(x * math.sqrt(2 * math.pi)) + expo
    return BahadurTail(x, log_pmf, log_tail, E)


def bahadur_error_envelope(spec: BinomialSpec, x: float) -> float:
    return x / math.sqrt(spec.N * spec.p) + 1 / (x * x)


@dataclass
class DeltaRegime:
    n: int
    p: float
    H: Pattern
    delta: float
    N: int
    m_star: float
    x_star: float
    m_minus: int
    m_plus: int
    x_minus: float
    x_plus: float
    mean_check: bool


def x_star_value(delta: float, e: int, N: int, p: float) -> float:
    return math.expm1(math.log1p(delta) / e) * math.sqrt(p * N / (1 - p))


def x_star_expansion(delta: float, e: int, N: int, p: float) -> float:
    """Two-term expansion of x_* in delta."""
    r = math.sqrt(p * N / (1 - p))
    return delta * r / e - delta * delta * (e - 1) * r / (2 * e * e)


def delta_regime(n: int, p: float, H: Pattern, delta: float) -> DeltaRegime:
    if not delta > 0:
        raise InvalidArgumentError("delta must be positive")
    if H.e < 1:
        raise InvalidArgumentError("pattern needs at least one edge")
    spec = BinomialSpec(pair_count(n), p)
    N, e = spec.N, H.e
    m_star = p * N * math.exp(math.log1p(delta) / e)
    width = delta**-0.5 * n**0.25
    m_minus = math.floor(m_star - width)
    m_plus = math.floor(m_star + width)
    fm = math.floor(m_star)
    # L_H(floor m_*) <= (1 + delta) p^e (n)_v, compared in log space
    lhs = sum(math.log(fm - j) for j in range(e)) - sum(math.log(N - j) for j in range(e)) if fm >= e else -math.inf
    rhs = math.log1p(delta) + e * math.log(p)
    return DeltaRegime(
        n, p, H, delta, N, m_star, x_star_value(delta, e, N, p),
        m_minus, m_plus, spec.x_of(m_minus), spec.x_of(m_plus), lhs <= rhs + 1e-12,
    )


@dataclass
class GnpRate:
    regime: str
    components: dict
    log_prob: float
    diagnostics: dict = field(default_factory=dict)
    unmodeled: list = field(default_factory=list)


def rate_small_delta(n: int, p: float, H: Pattern, delta: float) -> GnpRate:
    """Log of the precise tail asymptotic valid for 1/n << delta << n^{-1/2}."""
    if not delta > 0:
        raise InvalidArgumentError("delta must be positive")
    if not 0 < p < 1:
        raise InvalidArgumentError("p must lie in (0, 1)")
    e, q = H.e, 1 - p
    comps = {
        "prefactor": 0.5 * math.log(e * e * q / (math.pi * p)),
        "quadratic": -delta * delta * p * n * n / (4 * e * e * q),
        "cubic": ((3 * e - 2) - (3 * e - 1) * p) * delta**3 * p * n * n / (12 * e**3 * q * q),
        "log_term": -math.log(n * delta),
    }
    return GnpRate(
        "small",
        comps,
        math.fsum(comps.values()),
        {"n_delta": n * delta, "sqrt_n_delta": math.sqrt(n) * delta},
        ["multiplicative (1+o(1))"],
    )


def rate_expansion(n: int, p: float, H: Pattern, delta: float, variant: str = "consistent") -> dict:
    """Explicit polynomial form of the larger-delta rate up to delta^4.

    ``consistent`` uses the coefficients obtained by expanding
    -x_*^2/2 - E(x_*, N) in delta (its cubic term equals the one of the
    small-delta formula); ``printed`` is an alternative coefficient set with
    the opposite cubic sign and a different quartic, kept for comparison.
    """
    e, q = H.e, 1 - p
    n2 = float(n) * n
    quad = -delta * delta * p * n2 / (4 * q * e * e)
    if variant == "consistent":
        cub = p * ((3 * e - 1) * q - 1) * delta**3 * n2 / (12 * q * q * e**3)
        br = 11 * e * e * q * q - 6 * e * q * q - 6 * e * q + q * q + 2
        quart = -p * br * delta**4 * n2 / (48 * q**3 * e**4)
    elif variant == "printed":
        cub = -p * ((3 * e - 1) * q - 1) * delta**3 * n2 / (12 * q * q * e**3)
        br = (e - 1) * q * ((8 * e + 11) * q - 6) + 1 - 3 * p * q
        quart = p * br * delta**4 * n2 / (48 * q**3 * e**4)
    else:
        raise InvalidArgumentError(f"unknown variant {variant!r}")
    g = _gamma_term(n, p, H, delta)
    return {"quadratic": quad, "cubic": cub, "quartic": quart, "gamma_term": g,
            "total": math.fsum([quad, cub, quart, g])}


def _gamma_term(n: int, p: float, H: Pattern, delta: float) -> float:
    e, q = H.e, 1 - p
    gam = gamma_rate(H, p)
    return delta * delta * n / (16 * gam * e**4 * p ** (2 * e - 2) * q * q)


def rate_larger_delta(n: int, p: float, H: Pattern, delta: float, J: int | str = "converged") -> GnpRate:
    """Components of the log tail for 1/n << delta << 1.

    The binomial correction enters as -E(x_*, N): the maximising term of the
    conditioning sum is b_N(m_*) = exp(-x_*^2/2 - E(x_*, N) + O(log n)).
    """
    if not delta > 0:
        raise InvalidArgumentError("delta must be positive")
    reg = delta_regime(n, p, H, delta)
    spec = BinomialSpec(reg.N, p)
    xs = reg.x_star
    E = bahadur_series(xs, spec.N, p, J)
    g = _gamma_term(n, p, H, delta)
    comps = {"gaussian": -xs * xs / 2, "bahadur": -E, "gamma_term": g}
    gam = gamma_rate(H, p)
    f_star = xs * n / (8 * gam * spec.sigma * H.e**2 * p ** (2 * H.e - 2))
    diag = {
        "x_star": xs,
        "m_star": reg.m_star,
        "f_star": f_star,
        "gamma_H_p": gam,
        "rate_expansion": rate_expansion(n, p, H, delta),
    }
    return GnpRate("large", comps, math.fsum(comps.values()), diag,
                   ["additive O(log n) in the exponent", "(1+o(1)) on gamma_term"])


def rate_auto(n: int, p: float, H: Pattern, delta: float) -> GnpRate:
    """Small-delta formula when delta sqrt(n) < 1, otherwise the larger-delta one."""
    if delta * math.sqrt(n) < 1:
        return rate_small_delta(n, p, H, delta)
    return rate_larger_delta(n, p, H, delta)


def _all_graph_counts(n: int, H: Pattern) -> tuple[np.ndarray, np.ndarray]:
    """(edge count, N_H) for every labelled graph on n vertices, indexed by edge bitcode."""
    N = pair_count(n)
    pairs = list(itertools.combinations(range(n), 2))
    codes = np.arange(1 << N, dtype=np.int64)
    bits = [(codes >> k) & 1 for k in range(N)]
    m = np.sum(bits, axis=0)
    shape = _shape(H) if H.e else None
    iso = falling(n - H.v_core, H.v - H.v_core)
    if shape in ("edge", "wedge", "star3", "triangle"):
        idx = {pr: k for k, pr in enumerate(pairs)}
        deg = [sum(bits[idx[tuple(sorted((u, w)))]] for w in range(n) if w != u) for u in range(n)]
        if shape == "edge":
            core = 2 * m
        elif shape == "wedge":
            core = sum(d * (d - 1) for d in deg)
        elif shape == "star3":
            core = sum(d * (d - 1) * (d - 2) for d in deg)
        else:
            core = 6 * sum(
                bits[idx[(a, b)]] * bits[idx[(a, c)]] * bits[idx[(b, c)]]
                for a, b, c in itertools.combinations(range(n), 3)
            )
        return m, iso * core
    counts = np.empty(codes.size, dtype=np.int64)
    for code in range(codes.size):
        counts[code] = count_embeddings(
            HostGraph.from_edges(n, [pr for k, pr in enumerate(pairs) if code >> k & 1]), H
        )
    return m, counts


_COUNT_CACHE: dict = {}


def conditioning_identity_check(
    n: int, p: float, H: Pattern, threshold: float, max_n: int = CONDITIONING_MAX_N
) -> tuple[float, float, float]:
    """P(D_H(G_p) > threshold) by direct enumeration and via the mixture over m.

    The deviation is taken against the G(n, p) mean p^e (n)_v.
    """
    if n > max_n:
        raise ResourceLimitError(f"exhaustive enumeration capped at n={max_n}")
    key = (n, H)
    if key not in _COUNT_CACHE:
        _COUNT_CACHE[key] = _all_graph_counts(n, H)
    m, counts = _COUNT_CACHE[key]
    N = pair_count(n)
    mean_p = p**H.e * falling(n, H.v)
    hit = counts > mean_p + threshold
    logp, logq = math.log(p), math.log1p(-p)
    # direct: every graph weighted by p^m q^(N-m)
    w = np.exp(m * logp + (N - m) * logq)
    lhs = math.fsum(w[hit].tolist())
    # mixture: b_N(m) times the fraction of m-edge graphs above the threshold
    per_m = np.bincount(m, minlength=N + 1)
    hit_m = np.bincount(m[hit], minlength=N + 1)
    bm = binom.pmf(np.arange(N + 1), N, p)
    rhs = math.fsum((bm * hit_m / per_m).tolist())
    return lhs, rhs, lhs - rhs
