"""The Erdős–Rényi graph process with incremental degree/codegree upkeep.

A trajectory is a uniformly random ordering of all ``N = n(n-1)/2`` vertex
pairs, drawn once at construction.  ``G_m`` is the graph on the first ``m``
pairs, so a single state replays every ``G(n, m)`` along the way.

Randomness comes from numpy's Philox generator (a counter-based design)
keyed through ``SeedSequence``; independent replicas use
``SeedSequence(seed, spawn_key=(k,))`` and therefore draw from
non-overlapping streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .combinat import pair_count
from .errors import ConfigurationError, InvalidArgumentError, ProcessExhaustedError

GENERATOR_NAME = "numpy.Philox(SeedSequence)"


def make_rng(seed: int, stream: tuple[int, ...] = ()) -> np.random.Generator:
    """Philox generator for ``seed``; ``stream`` selects an independent substream."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(stream))
    return np.random.Generator(np.random.Philox(ss))


def pair_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints (u < w) of every pair, in lexicographic pair-index order."""
    u, w = np.triu_indices(n, 1)
    return u.astype(np.int64), w.astype(np.int64)


@dataclass
class DegreeDiagnostics:
    d_max_dev: float
    d_min_dev: float
    sum_sq: float
    sum_4: float
    co_max_dev: float | None = None
    co_sum_sq: float | None = None
    co_sum_4: float | None = None


@dataclass
class GraphState:
    n: int
    N: int
    order: np.ndarray
    seed: int | None = None
    track_codegrees: bool = False
    i: int = 0
    generator: str = GENERATOR_NAME
    pair_u: np.ndarray = field(init=False, repr=False)
    pair_w: np.ndarray = field(init=False, repr=False)
    adj: np.ndarray = field(init=False, repr=False)
    degree: np.ndarray = field(init=False, repr=False)
    codegree: np.ndarray | None = field(init=False, repr=False)
    nbr: list[int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.pair_u, self.pair_w = pair_arrays(self.n)
        self.adj = np.zeros((self.n, self.n), dtype=bool)
        self.degree = np.zeros(self.n, dtype=np.int64)
        self.codegree = (
            np.zeros((self.n, self.n), dtype=np.int64) if self.track_codegrees else None
        )
        self.nbr = [0] * self.n
        replay, self.i = self.i, 0
        for _ in range(replay):
            self.step()

    @property
    def m(self) -> int:
        return self.i

    @property
    def edge_order(self) -> list[tuple[int, int]]:
        return [self.pair(k) for k in self.order[: self.i]]

    def pair(self, k: int) -> tuple[int, int]:
        return int(self.pair_u[k]), int(self.pair_w[k])

    def next_edge(self) -> tuple[int, int]:
        if self.i >= self.N:
            raise ProcessExhaustedError("all pairs already added")
        return self.pair(self.order[self.i])

    def has_edge(self, u: int, w: int) -> bool:
        return bool(self.adj[u, w])

    def edges(self) -> list[tuple[int, int]]:
        return self.edge_order

    def step(self) -> tuple[int, int]:
        u, w = self.next_edge()
        self.add_edge(u, w)
        self.i += 1
        return u, w

    def add_edge(self, u: int, w: int) -> None:
        # Internal: callers outside step() must keep `order` consistent themselves.
        if self.adj[u, w]:
            raise InvalidArgumentError(f"edge {u}-{w} already present")
        if self.codegree is not None:
            nu = self.adj[u].copy()
            nw = self.adj[w].copy()
            # x ~ w gains common neighbour w with u, and symmetrically.
            self.codegree[u, nw] += 1
            self.codegree[nw, u] += 1
            self.codegree[w, nu] += 1
            self.codegree[nu, w] += 1
        self.adj[u, w] = self.adj[w, u] = True
        self.degree[u] += 1
        self.degree[w] += 1
        self.nbr[u] |= 1 << w
        self.nbr[w] |= 1 << u

    def run_to(self, m: int) -> "GraphState":
        if not 0 <= m <= self.N:
            raise InvalidArgumentError(f"m={m} outside 0..{self.N}")
        if m < self.i:
            raise InvalidArgumentError("the process cannot move backwards; use replay()")
        while self.i < m:
            self.step()
        return self

    def replay(self, m: int | None = None) -> "GraphState":
        """Fresh state on the same trajectory, advanced to ``m`` (default: current)."""
        st = GraphState(self.n, self.N, self.order, self.seed, self.track_codegrees)
        return st.run_to(self.i if m is None else m)

    def non_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoints of the pairs not yet added, i.e. the candidates for the next step."""
        mask = ~self.adj[self.pair_u, self.pair_w]
        return self.pair_u[mask], self.pair_w[mask]

    def codegree_matrix(self) -> np.ndarray:
        if self.codegree is not None:
            return self.codegree
        a = self.adj.astype(np.int64)
        return a @ a


def new_process(n: int, seed: int, codegrees: bool = False) -> GraphState:
    """Empty graph on ``n`` vertices with its whole trajectory fixed by ``seed``."""
    if n < 2:
        raise InvalidArgumentError("n must be at least 2")
    N = pair_count(n)
    order = make_rng(seed).permutation(N)
    return GraphState(n, N, order, seed, codegrees)


def from_order(n: int, order, codegrees: bool = False) -> GraphState:
    """State following a caller-supplied ordering.

    ``order`` is either a permutation of the pair indices or a sequence of
    vertex pairs; a partial list of pairs is completed with the remaining
    pairs in index order.
    """
    N = pair_count(n)
    order = np.asarray(order, dtype=np.int64)
    if order.ndim == 2:
        pu, pw = pair_arrays(n)
        index = {(int(a), int(b)): k for k, (a, b) in enumerate(zip(pu, pw))}
        try:
            head = [index[(min(a, b), max(a, b))] for a, b in order.tolist()]
        except KeyError as exc:
            raise InvalidArgumentError(f"pair {exc.args[0]} is not a pair of [{n}]") from None
        seen = set(head)
        order = np.array(head + [k for k in range(N) if k not in seen], dtype=np.int64)
    if sorted(order.tolist()) != list(range(N)):
        raise InvalidArgumentError("order must be a permutation of the pair indices")
    return GraphState(n, N, order, None, codegrees)


def step(state: GraphState) -> tuple[int, int]:
    return state.step()


def codegree_mean(n: int, m: int) -> float:
    N = pair_count(n)
    if N < 2:
        return 0.0
    return (n - 2) * m * (m - 1) / (N * (N - 1))


def degree_deviations(state: GraphState) -> np.ndarray:
    return state.degree - 2.0 * state.i / state.n


def codegree_deviations(state: GraphState) -> np.ndarray:
    """Deviation D_{u,w} for every unordered pair, in pair-index order."""
    if state.codegree is None:
        raise ConfigurationError("codegrees are not materialized for this state")
    c = state.codegree[state.pair_u, state.pair_w]
    return c - codegree_mean(state.n, state.i)


def degree_diagnostics(state: GraphState, codegrees: bool | None = None) -> DegreeDiagnostics:
    """Summaries of degree (and optionally codegree) deviations of the current graph."""
    d = degree_deviations(state)
    sq = d * d
    out = DegreeDiagnostics(
        d_max_dev=float(d.max()),
        d_min_dev=float(d.min()),
        sum_sq=float(sq.sum()),
        sum_4=float((sq * sq).sum()),
    )
    if codegrees is None:
        codegrees = state.codegree is not None
    if codegrees:
        c = codegree_deviations(state)
        csq = c * c
        out.co_max_dev = float(np.abs(c).max()) if c.size else 0.0
        out.co_sum_sq = float(csq.sum())
        out.co_sum_4 = float((csq * csq).sum())
    return out


def edge_delta(state: GraphState, u: int, w: int) -> float:
    """Sum of squared degree and codegree deviations attached to the pair ``uw``."""
    if state.codegree is None:
        raise ConfigurationError("codegrees are not materialized for this state")
    mean_d = 2.0 * state.i / state.n
    du = state.degree[u] - mean_d
    dw = state.degree[w] - mean_d
    duw = state.codegree[u, w] - codegree_mean(state.n, state.i)
    return float(du * du + dw * dw + duw * duw)
