"""Small pattern graphs, embedding counts and expected counts in G(n, m).

Counts are of *embeddings*: injective vertex maps sending pattern edges to
host edges.  Patterns may contain isolated vertices (the spanning subgraphs
of a pattern usually do); those contribute a falling-factorial factor over
the vertices not used by the non-isolated core.
"""

from __future__ import annotations

import functools
import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .combinat import falling, log_falling, pair_count
from .errors import InvalidArgumentError, ResourceLimitError

Edge = tuple[int, int]

MAX_GENERAL_V = 8
MAX_GENERAL_N = 4096


@dataclass(frozen=True)
class Pattern:
    v: int
    edges: tuple[Edge, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.v < 1:
            raise InvalidArgumentError("a pattern needs at least one vertex")
        norm = []
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise InvalidArgumentError(f"self-loop at {a}")
            if not (0 <= a < self.v and 0 <= b < self.v):
                raise InvalidArgumentError(f"edge {a}-{b} outside 0..{self.v - 1}")
            norm.append((min(a, b), max(a, b)))
        if len(set(norm)) != len(norm):
            raise InvalidArgumentError("multi-edges are not allowed")
        object.__setattr__(self, "edges", tuple(norm))

    @property
    def e(self) -> int:
        return len(self.edges)

    @cached_property
    def degrees(self) -> tuple[int, ...]:
        d = [0] * self.v
        for a, b in self.edges:
            d[a] += 1
            d[b] += 1
        return tuple(d)

    @cached_property
    def nbr(self) -> tuple[int, ...]:
        """Neighbour bitmask per pattern vertex."""
        out = [0] * self.v
        for a, b in self.edges:
            out[a] |= 1 << b
            out[b] |= 1 << a
        return tuple(out)

    @cached_property
    def wedge_count(self) -> int:
        return sum(d * (d - 1) // 2 for d in self.degrees)

    @cached_property
    def triangle_count(self) -> int:
        es = set(self.edges)
        return sum(
            1
            for a, b, c in itertools.combinations(range(self.v), 3)
            if (a, b) in es and (a, c) in es and (b, c) in es
        )

    @cached_property
    def core(self) -> tuple[int, ...]:
        return tuple(x for x in range(self.v) if self.degrees[x] > 0)

    @property
    def v_core(self) -> int:
        return len(self.core)

    @cached_property
    def aut_embedding_factor(self) -> int:
        return count_embeddings(HostGraph.from_edges(self.v, self.edges), self)

    def without(self, idx: int) -> "Pattern":
        """Same vertex set with the ``idx``-th edge removed."""
        return Pattern(self.v, self.edges[:idx] + self.edges[idx + 1 :])

    def sub(self, mask: int) -> "Pattern":
        """Spanning subgraph keeping the edges whose index bit is set in ``mask``."""
        return Pattern(self.v, tuple(ed for k, ed in enumerate(self.edges) if mask >> k & 1))

    def spec(self) -> str:
        return f"v={self.v}; edges=" + ",".join(f"{a}-{b}" for a, b in self.edges)

    def label(self) -> str:
        return self.name or self.spec()


def _builtin(name: str, v: int, edges: Iterable[Edge]) -> Pattern:
    return Pattern(v, tuple(edges), name)


BUILTINS: dict[str, Pattern] = {
    "edge": _builtin("edge", 2, [(0, 1)]),
    "wedge": _builtin("wedge", 3, [(0, 1), (1, 2)]),
    "triangle": _builtin("triangle", 3, [(0, 1), (1, 2), (0, 2)]),
    "path3": _builtin("path3", 4, [(0, 1), (1, 2), (2, 3)]),
    "c4": _builtin("c4", 4, [(0, 1), (1, 2), (2, 3), (0, 3)]),
    "k4": _builtin("k4", 4, list(itertools.combinations(range(4), 2))),
}
EDGE, WEDGE, TRIANGLE = BUILTINS["edge"], BUILTINS["wedge"], BUILTINS["triangle"]
PATH3, C4, K4 = BUILTINS["path3"], BUILTINS["c4"], BUILTINS["k4"]

_SPEC_RE = re.compile(r"^v=(\d+);edges=(.*)$")


def parse_pattern(text: str) -> Pattern:
    """Parse a built-in name or the ``v=4; edges=0-1,1-2`` text format."""
    key = text.strip().lower()
    if key in BUILTINS:
        return BUILTINS[key]
    compact = re.sub(r"\s+", "", key)
    mt = _SPEC_RE.match(compact)
    if not mt:
        raise InvalidArgumentError(f"cannot parse pattern {text!r}")
    v = int(mt.group(1))
    edges = []
    if mt.group(2):
        for tok in mt.group(2).split(","):
            parts = tok.split("-")
            if len(parts) != 2 or not all(p.isdigit() for p in parts):
                raise InvalidArgumentError(f"bad edge token {tok!r}")
            edges.append((int(parts[0]), int(parts[1])))
    return Pattern(v, tuple(edges))


@functools.lru_cache(maxsize=None)
def all_patterns_up_to(max_e: int, max_v: int | None = None) -> tuple[Pattern, ...]:
    """One representative per isomorphism class of graphs without isolated
    vertices having 1..max_e edges, grown one edge at a time."""
    max_v = 2 * max_e if max_v is None else max_v
    layer = {_canonical(2, ((0, 1),)): (2, ((0, 1),))}
    out = [] if max_v < 2 else [Pattern(2, ((0, 1),))]
    for _ in range(2, max_e + 1):
        nxt: dict = {}
        for v, es in layer.values():
            have = set(es)
            # join two old vertices, an old vertex to a new one, or two new ones
            cands = [(a, b) for a, b in itertools.combinations(range(v), 2) if (a, b) not in have]
            cands += [(a, v) for a in range(v)] + [(v, v + 1)]
            for a, b in cands:
                w = max(v, b + 1)
                if w > max_v:
                    continue
                grown = es + ((a, b),)
                key = _canonical(w, grown)
                if key not in nxt:
                    nxt[key] = (w, grown)
        layer = nxt
        out.extend(Pattern(v, es) for v, es in layer.values())
    return tuple(out)


def _canonical(v: int, edges) -> tuple:
    # relabel by decreasing degree; only permutations inside a degree class matter
    deg = [0] * v
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    classes: dict[int, list[int]] = {}
    for x in sorted(range(v), key=lambda x: -deg[x]):
        classes.setdefault(deg[x], []).append(x)
    groups = [classes[d] for d in sorted(classes, reverse=True)]
    best = None
    for choice in itertools.product(*(itertools.permutations(g) for g in groups)):
        label = {}
        for x in itertools.chain.from_iterable(choice):
            label[x] = len(label)
        key = tuple(sorted(tuple(sorted((label[a], label[b]))) for a, b in edges))
        if best is None or key < best:
            best = key
    return (v, tuple(sorted(deg, reverse=True)), best)


@dataclass
class SubgraphLattice:
    """All 2^e spanning subgraphs of ``H``, keyed by edge-index bitmask."""

    H: Pattern
    members: dict[int, Pattern] = field(init=False)

    def __post_init__(self) -> None:
        self.members = {mask: self.H.sub(mask) for mask in range(1 << self.H.e)}

    @property
    def full(self) -> int:
        return (1 << self.H.e) - 1

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(sorted(self.members))

    def __getitem__(self, mask: int) -> Pattern:
        return self.members[mask]

    @staticmethod
    def size(mask: int) -> int:
        return mask.bit_count()

    def drop(self, mask: int) -> list[int]:
        """Masks of F minus f for every edge f of F."""
        return [mask & ~(1 << k) for k in range(self.H.e) if mask >> k & 1]


@dataclass
class HostGraph:
    """Plain simple graph with bitmask neighbourhoods."""

    n: int
    nbr: list[int]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Edge]) -> "HostGraph":
        nbr = [0] * n
        for a, b in edges:
            if a == b:
                raise InvalidArgumentError("host graphs have no self-loops")
            nbr[a] |= 1 << b
            nbr[b] |= 1 << a
        return cls(n, nbr)

    @classmethod
    def from_adjacency(cls, adj) -> "HostGraph":
        adj = np.asarray(adj, dtype=bool)
        n = adj.shape[0]
        nbr = []
        for u in range(n):
            row = 0
            for w in np.flatnonzero(adj[u]):
                row |= 1 << int(w)
            nbr.append(row)
        return cls(n, nbr)

    @property
    def m(self) -> int:
        return sum(x.bit_count() for x in self.nbr) // 2

    @property
    def degrees(self) -> list[int]:
        return [x.bit_count() for x in self.nbr]

    def edges(self) -> list[Edge]:
        return [(u, w) for u in range(self.n) for w in _bits(self.nbr[u] >> (u + 1) << (u + 1))]

    def complement(self) -> "HostGraph":
        full = (1 << self.n) - 1
        return HostGraph(self.n, [full & ~x & ~(1 << u) for u, x in enumerate(self.nbr)])

    def with_edge(self, u: int, w: int) -> "HostGraph":
        nbr = list(self.nbr)
        nbr[u] |= 1 << w
        nbr[w] |= 1 << u
        return HostGraph(self.n, nbr)


def as_host(host) -> HostGraph:
    if isinstance(host, HostGraph):
        return host
    if hasattr(host, "nbr") and hasattr(host, "n"):
        return HostGraph(host.n, list(host.nbr))
    if isinstance(host, tuple) and len(host) == 2:
        return HostGraph.from_edges(host[0], host[1])
    return HostGraph.from_adjacency(host)


def _bits(x: int):
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


def _search_order(H: Pattern, fixed: Sequence[int], core: Iterable[int] | None = None) -> list[int]:
    """Core vertices ordered so each one (after the first of its component)
    has an already-placed neighbour."""
    order = list(fixed)
    placed = set(order)
    core = [x for x in (H.core if core is None else core) if x not in placed]
    while core:
        nxt = None
        for x in core:
            if any(y in placed for y in _bits(H.nbr[x])):
                nxt = x
                break
        if nxt is None:
            # start a new component at its highest-degree vertex
            nxt = max(core, key=lambda x: H.degrees[x])
        order.append(nxt)
        placed.add(nxt)
        core.remove(nxt)
    return order


def _count_core(H: Pattern, G: HostGraph, fixed: Mapping[int, int] | None = None) -> int:
    """Injective maps of the core (plus any fixed vertices) respecting edges."""
    fixed = dict(fixed or {})
    order = _search_order(H, list(fixed), H.core)
    pos = {x: k for k, x in enumerate(order)}
    back = [[y for y in _bits(H.nbr[x]) if pos.get(y, len(order)) < k] for k, x in enumerate(order)]
    full = (1 << G.n) - 1
    img = [0] * len(order)
    used = 0
    for k, x in enumerate(order[: len(fixed)]):
        u = fixed[x]
        if used >> u & 1:
            return 0
        for y in back[k]:
            if not G.nbr[img[pos[y]]] >> u & 1:
                return 0
        img[k] = u
        used |= 1 << u
    start = len(fixed)
    last = len(order) - 1
    if start > last:
        return 1

    def rec(k: int, used: int) -> int:
        cand = full
        for y in back[k]:
            cand &= G.nbr[img[pos[y]]]
        cand &= ~used
        if k == last:
            return cand.bit_count()
        total = 0
        for u in _bits(cand):
            img[k] = u
            total += rec(k + 1, used | 1 << u)
        return total

    return rec(start, used)


def _shape(H: Pattern) -> str | None:
    vc, e = H.v_core, H.e
    if e == 1:
        return "edge"
    if vc == 3 and e == 2:
        return "wedge"
    if vc == 3 and e == 3:
        return "triangle"
    if vc == 4 and e == 3:
        ds = sorted(d for d in H.degrees if d)
        return "path3" if ds == [1, 1, 2, 2] else "star3"
    return None


def _fast_core_count(shape: str, G: HostGraph) -> int:
    d = G.degrees
    if shape == "edge":
        return sum(d)
    if shape == "wedge":
        return sum(x * (x - 1) for x in d)
    if shape == "star3":
        return sum(x * (x - 1) * (x - 2) for x in d)
    tri2 = 0  # sum over ordered adjacent (u, w) of codegree = 6 * #triangles
    for u in range(G.n):
        for w in _bits(G.nbr[u]):
            tri2 += (G.nbr[u] & G.nbr[w]).bit_count()
    if shape == "triangle":
        return tri2
    # path3: ordered edge (u, w) extended on both ends, minus closed triangles
    s = 0
    for u in range(G.n):
        for w in _bits(G.nbr[u]):
            s += (d[u] - 1) * (d[w] - 1)
    return s - tri2


def count_embeddings(
    host,
    H: Pattern,
    *,
    general: bool = False,
    max_v: int = MAX_GENERAL_V,
    max_n: int = MAX_GENERAL_N,
) -> int:
    """Number of injective maps V(H) -> V(G) sending edges to edges.

    ``general=True`` bypasses the degree/codegree fast paths.
    """
    G = as_host(host)
    if H.v > G.n:
        raise InvalidArgumentError(f"pattern has {H.v} vertices but host only {G.n}")
    iso = falling(G.n - H.v_core, H.v - H.v_core)
    if H.e == 0:
        return iso
    shape = None if general else _shape(H)
    if shape is not None:
        return iso * _fast_core_count(shape, G)
    if H.v_core > max_v or G.n > max_n:
        raise ResourceLimitError(
            f"general counter limited to v<={max_v}, n<={max_n} (got v={H.v_core}, n={G.n})"
        )
    return iso * _count_core(H, G)


def count_anchored(host, H: Pattern, u: int, w: int) -> int:
    """Embeddings of H into G + uw that use the pair uw, for uw not in G.

    This is the number of embeddings created by inserting uw.
    """
    G = as_host(host)
    if G.nbr[u] >> w & 1:
        raise InvalidArgumentError(f"pair {u}-{w} already present")
    if H.e == 0:
        return 0
    total = 0
    for k, (a, b) in enumerate(H.edges):
        rest = H.without(k)
        core = set(rest.core) | {a, b}
        iso = falling(G.n - len(core), H.v - len(core))
        if iso == 0:
            continue
        for x, y in ((u, w), (w, u)):
            total += iso * _count_core(rest, G, {a: x, b: y})
    return total


def expected_count(H: Pattern, n: int, m: int) -> Fraction:
    """L_H(m) = (n)_v (m)_e / (N)_e, exactly."""
    N = pair_count(n)
    if not 0 <= m <= N:
        raise InvalidArgumentError(f"m={m} outside 0..{N}")
    return Fraction(falling(n, H.v) * falling(m, H.e), falling(N, H.e))


def expected_count_float(H: Pattern, n: int, m: float) -> float:
    N = pair_count(n)
    lf = log_falling(n, H.v) + log_falling(m, H.e) - log_falling(N, H.e)
    return math.exp(lf) if lf > -math.inf else 0.0


def l_increment_identity_check(H: Pattern, n: int, m: int) -> bool:
    """Exact check that L_H(m) - L_H(m-1) equals its conditional-increment form."""
    N = pair_count(n)
    if not 1 <= m <= N:
        raise InvalidArgumentError(f"m={m} outside 1..{N}")
    lhs = expected_count(H, n, m) - expected_count(H, n, m - 1)
    base = expected_count(H, n, m - 1)
    rhs = sum(
        (expected_count(H.without(k), n, m - 1) - base for k in range(H.e)), Fraction(0)
    ) / (N - m + 1)
    return lhs == rhs


def deviation(host, H: Pattern, m: int | None = None, exact: bool = False):
    """D_H(G) = N_H(G) - L_H(m); ``m`` defaults to the host's edge count."""
    G = as_host(host)
    if m is not None and m != G.m:
        raise InvalidArgumentError(f"host has {G.m} edges, not {m}")
    val = count_embeddings(G, H) - expected_count(H, G.n, G.m)
    return val if exact else float(val)


def complement_deviation(H: Pattern, devs: Mapping[int, object]):
    """Alternating sum over the spanning subgraphs of H of their deviations in
    the complement; keys are edge-index bitmasks."""
    missing = [mask for mask in range(1 << H.e) if mask not in devs]
    if missing:
        raise InvalidArgumentError(f"missing lattice members {missing[:5]}")
    total = 0
    for mask in range(1 << H.e):
        sign = -1 if mask.bit_count() % 2 else 1
        total = total + sign * devs[mask]
    return total


def complement_check(host, H: Pattern) -> tuple[Fraction, Fraction]:
    """(D_H(G), alternating sum over G^c), both exact."""
    G = as_host(host)
    Gc = G.complement()
    lat = SubgraphLattice(H)
    devs = {mask: deviation(Gc, lat[mask], exact=True) for mask in lat}
    return deviation(G, H, exact=True), complement_deviation(H, devs)
