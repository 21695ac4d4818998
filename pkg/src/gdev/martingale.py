"""Per-step increments along the graph process and the exact martingale
decomposition of subgraph-count deviations, with its approximants.

For a pattern H the trace follows every spanning subgraph F of H (the
2^e members of its subgraph lattice).  At step i, with G_{i-1} the current
graph and uw the pair being inserted,

    A_F       = N_F(G_i) - N_F(G_{i-1})
    E[A_F | ] = (N-i+1)^{-1} sum_{f in F} (N_{F-f}(G_{i-1}) - N_F(G_{i-1}))
    X_F       = A_F - E[A_F | G_{i-1}]

and the deviation D_H(G_m) equals sum_{i<=m} sum_F c_F(i, m) X_F(G_i) with
c_F(i, m) = (N-m)_{e(F)} (m-i)_{e-e(F)} / (N-i)_e.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from .combinat import falling, log_falling, pair_count
from .errors import InternalInconsistencyError, InvalidArgumentError, ResourceLimitError
from .patterns import (
    HostGraph,
    Pattern,
    SubgraphLattice,
    _bits,
    _shape,
    TRIANGLE,
    WEDGE,
    count_anchored,
    count_embeddings,
    expected_count,
)

DEFAULT_MAX_STEPS = 2_000_000

Number = Fraction | float


def mart_coefficient(e_F: int, e: int, i: int, m: int, N: int) -> Fraction:
    """(N-m)_{e_F} (m-i)_{e-e_F} / (N-i)_e, exactly."""
    if not (0 <= e_F <= e and 0 <= i <= m <= N):
        raise InvalidArgumentError("need 0 <= e_F <= e and 0 <= i <= m <= N")
    den = falling(N - i, e)
    if den == 0:
        # i > N - e: the ratio is 0/0, take the value the step recursion produces
        return _coefficient_by_recursion(e_F, e, i, m, N)
    return Fraction(falling(N - m, e_F) * falling(m - i, e - e_F), den)


def _coefficient_by_recursion(c: int, e: int, i: int, m: int, N: int) -> Fraction:
    """Coefficient of X_F (e(F) = c) in D_H(G_m) (e(H) = e) from the one-step
    relation D_e(m) = D_e(m-1) + X_e(m) + (e D_{e-1}(m-1) - e D_e(m-1)) / (N-m+1)."""
    # a[k] is the coefficient for a pattern with k edges, k = c..e
    a = [Fraction(0)] * (e + 1)
    a[c] = Fraction(1)
    for j in range(i + 1, m + 1):
        k = N - j + 1
        new = list(a)
        for ee in range(c + 1, e + 1):
            new[ee] = a[ee] * (1 - Fraction(ee, k)) + Fraction(ee - c, k) * a[ee - 1]
        new[c] = a[c] * (1 - Fraction(c, k))
        a = new
    return a[e]


def mart_coefficient_float(e_F: int, e: int, i: int, m: int, N: int) -> float:
    num = log_falling(N - m, e_F) + log_falling(m - i, e - e_F)
    if num == -math.inf:
        return 0.0
    return math.exp(num - log_falling(N - i, e))


def lattice_coefficient(e_F: int, e: int, s: float, t: float) -> float:
    """(1-t)^{e_F} (t-s)^{e-e_F} / (1-s)^e, kept in ratio form."""
    r = (1.0 - t) / (1.0 - s)
    q = (t - s) / (1.0 - s)
    return r**e_F * q ** (e - e_F)


def nu_coefficient(c: int, e: int, i: int, m: int, N: int) -> float:
    """Discrete minus continuum coefficient, evaluated exactly then rounded."""
    if not 1 <= i <= m <= N:
        raise InvalidArgumentError("need 1 <= i <= m <= N")
    if i == N:
        return 0.0
    t = Fraction(m, N)
    s = Fraction(i, N)
    cont = (1 - t) ** c * (t - s) ** (e - c) / (1 - s) ** e
    return float(mart_coefficient(c, e, i, m, N) - cont)


def increment(F: Pattern, host: HostGraph, u: int, w: int) -> int:
    """A_F: embeddings of F created when the pair uw is added to ``host``."""
    if host.nbr[u] >> w & 1:
        raise InvalidArgumentError(f"pair {u}-{w} already present")
    if F.e == 0:
        return 0
    shape = _shape(F)
    if shape is None:
        return count_anchored(host, F, u, w)
    iso = falling(host.n - F.v_core, F.v - F.v_core)
    nu, nw = host.nbr[u], host.nbr[w]
    du, dw = nu.bit_count(), nw.bit_count()
    if shape == "edge":
        a = 2
    elif shape == "wedge":
        a = 2 * (du + dw)
    elif shape == "triangle":
        a = 6 * (nu & nw).bit_count()
    elif shape == "star3":
        a = 3 * (du * (du - 1) + dw * (dw - 1))
    else:
        c = (nu & nw).bit_count()
        su = sum(host.nbr[y].bit_count() for y in _bits(nu))
        sw = sum(host.nbr[y].bit_count() for y in _bits(nw))
        a = 2 * (du * dw - 3 * c + su + sw - du - dw)
    return iso * a


def cond_exp_increment(
    lattice: SubgraphLattice, mask: int, counts: dict[int, int], i: int, N: int
) -> Fraction:
    """E[A_F | G_{i-1}] from the lattice counts N_F(G_{i-1})."""
    if not 1 <= i <= N:
        raise InvalidArgumentError(f"i={i} outside 1..{N}")
    base = counts[mask]
    tot = sum(counts[sub] - base for sub in lattice.drop(mask))
    return Fraction(tot, N - i + 1)


def increment_and_center(F: Pattern, host: HostGraph, u: int, w: int) -> tuple[int, Fraction]:
    """(A_F, X_F) for inserting uw into ``host`` (which is G_{i-1})."""
    N = pair_count(host.n)
    i = host.m + 1
    lat = SubgraphLattice(F)
    full = lat.full
    counts = {mk: count_embeddings(host, lat[mk]) for mk in [full, *lat.drop(full)]}
    a = increment(F, host, u, w)
    return a, a - cond_exp_increment(lat, full, counts, i, N)


def _base_condexp(n: int, i: int, N: int, n_wedge: int, n_tri: int) -> tuple[Fraction, Fraction]:
    k = N - i + 1
    cw = Fraction(2 * (2 * (i - 1) * (n - 2) - n_wedge), k)
    ct = Fraction(3 * (n_wedge - n_tri), k)
    return cw, ct


@dataclass
class StepRecord:
    i: int
    edge: tuple[int, int]
    A: dict[int, int]
    condexp: dict[int, Number]
    X: dict[int, Number]
    X_wedge: Number
    X_tri: Number
    qv: Number | None = None


@dataclass
class DecompositionReport:
    m: int
    lhs: Fraction
    rhs: Fraction

    @property
    def residual(self) -> Fraction:
        return self.lhs - self.rhs


@dataclass
class ProcessTrace:
    H: Pattern
    n: int
    N: int
    exact: bool
    lattice: SubgraphLattice
    steps: list[StepRecord] = field(default_factory=list)
    counts_history: list[dict[int, int]] = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.steps)

    def deviation(self, m: int | None = None) -> Fraction:
        m = self.m if m is None else m
        return self.counts_history[m][self.lattice.full] - expected_count(self.H, self.n, m)

    def quadratic_variation(self) -> list[Number]:
        """Running V(m); only available when recorded."""
        out, acc = [], 0
        for st in self.steps:
            if st.qv is None:
                raise InvalidArgumentError("trace was built without quadratic variation")
            acc = acc + st.qv
            out.append(acc)
        return out

    def x_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        xw = np.array([float(st.X_wedge) for st in self.steps])
        xt = np.array([float(st.X_tri) for st in self.steps])
        return xw, xt


def build_trace(
    source,
    H: Pattern,
    m: int | None = None,
    *,
    exact: bool = True,
    quad_var: bool = False,
    max_steps: int = DEFAULT_MAX_STEPS,
    on_step: Callable[[StepRecord], None] | None = None,
    keep_steps: bool = True,
) -> ProcessTrace:
    """Replay the trajectory of ``source`` (a GraphState, or ``(n, order)``) up
    to ``m`` edges, recording increments for every lattice member of H."""
    if isinstance(source, tuple):
        n, order = source
        from .graph_process import from_order

        state = from_order(n, order)
    else:
        state = source.replay(0)
    n, N = state.n, state.N
    m = N if m is None else m
    if not 0 <= m <= N:
        raise InvalidArgumentError(f"m={m} outside 0..{N}")
    if m > max_steps and keep_steps:
        raise ResourceLimitError(f"trace of {m} steps exceeds the cap of {max_steps}")
    lat = SubgraphLattice(H)
    G = HostGraph(n, [0] * n)
    counts = {mk: (falling(n, H.v) if mk == 0 else 0) for mk in lat}
    n_wedge = n_tri = 0
    tr = ProcessTrace(H, n, N, exact, lat)
    tr.counts_history.append(dict(counts))
    conv = (lambda x: x) if exact else float
    for i in range(1, m + 1):
        u, w = state.step()
        ce = {mk: cond_exp_increment(lat, mk, counts, i, N) for mk in lat}
        A = {mk: increment(lat[mk], G, u, w) for mk in lat}
        X = {mk: conv(A[mk] - ce[mk]) for mk in lat}
        cw, ct = _base_condexp(n, i, N, n_wedge, n_tri)
        du, dw = G.nbr[u].bit_count(), G.nbr[w].bit_count()
        aw = 2 * (du + dw)
        at = 6 * (G.nbr[u] & G.nbr[w]).bit_count()
        qv = None
        if quad_var:
            qv = conv(_cond_var_full(lat, G, ce[lat.full]))
        rec = StepRecord(
            i, (u, w), A, {mk: conv(c) for mk, c in ce.items()}, X, conv(aw - cw), conv(at - ct), qv
        )
        for mk in lat:
            counts[mk] += A[mk]
        n_wedge += aw
        n_tri += at
        G.nbr[u] |= 1 << w
        G.nbr[w] |= 1 << u
        if on_step is not None:
            on_step(rec)
        if keep_steps:
            tr.steps.append(rec)
        tr.counts_history.append(dict(counts))
    return tr


def _cond_var_full(lat: SubgraphLattice, G: HostGraph, mean: Fraction) -> Fraction:
    H = lat[lat.full]
    vals = []
    for u in range(G.n):
        free = ~G.nbr[u] & ((1 << G.n) - 1) & ~((1 << (u + 1)) - 1)
        for w in _bits(free):
            vals.append(increment(H, G, u, w))
    if not vals:
        return Fraction(0)
    sq = Fraction(sum(a * a for a in vals), len(vals))
    return sq - mean * mean


def decomposition_rhs(trace: ProcessTrace, m: int) -> Fraction:
    if not trace.exact:
        raise InvalidArgumentError("the exact decomposition needs an exact trace")
    if m > trace.m:
        raise InvalidArgumentError(f"trace covers {trace.m} steps, not {m}")
    e, N = trace.H.e, trace.N
    sizes = {mk: mk.bit_count() for mk in trace.lattice}
    total = Fraction(0)
    for st in trace.steps[:m]:
        for mk in trace.lattice:
            x = st.X[mk]
            if x:
                total += mart_coefficient(sizes[mk], e, st.i, m, N) * x
    return total


def verify_decomposition(trace: ProcessTrace, m: int | None = None) -> DecompositionReport:
    """Compare D_H(G_m) with its martingale expansion; any residual is a bug."""
    m = trace.m if m is None else m
    rep = DecompositionReport(m, trace.deviation(m), decomposition_rhs(trace, m))
    if rep.residual != 0:
        raise InternalInconsistencyError(f"decomposition residual {rep.residual} at m={m}")
    return rep


def verify_decomposition_all(trace: ProcessTrace) -> list[DecompositionReport]:
    return [verify_decomposition(trace, m) for m in range(1, trace.m + 1)]


def x_star(F: Pattern, i: int, N: int, n: int, v: int, x_wedge: float, x_tri: float) -> float:
    """Linear surrogate of X_F built from the wedge and triangle increments."""
    if not 1 <= i <= N:
        raise InvalidArgumentError("x_star needs 1 <= i <= N")
    s = i / N
    scale = float(n) ** (v - 3)
    W, T, e = F.wedge_count, F.triangle_count, F.e
    out = 0.0
    if W - 3 * T:
        out += scale * s ** (e - 2) * (W - 3 * T) * x_wedge
    if T:
        out += scale * s ** (e - 3) * T * x_tri
    return out


def y_residual(x_F: float, x_star_F: float) -> float:
    return x_F - x_star_F


def _check_t(t: float) -> None:
    if not 0 < t < 1:
        raise InvalidArgumentError(f"t={t} must lie in (0, 1)")


def lambda_combination(H: Pattern, t: float, n: int, d_wedge: float, d_tri: float) -> float:
    """Deviation of H predicted by the wedge and triangle deviations alone."""
    _check_t(t)
    v, e = H.v, H.e
    W, T = H.wedge_count, H.triangle_count
    scale = float(n) ** (v - 3)
    out = 0.0
    if W - 3 * T:
        out += scale * t ** (e - 2) * (W - 3 * T) * d_wedge
    if T:
        out += scale * t ** (e - 3) * T * d_tri
    return out


def lambda_star_coefficients(H: Pattern, n: int, s: float, t: float) -> tuple[float, float]:
    """Coefficients of X_wedge and X_tri in the step-i term of Lambda*."""
    v, e = H.v, H.e
    W, T = H.wedge_count, H.triangle_count
    scale = float(n) ** (v - 3)
    r = (1.0 - t) / (1.0 - s)
    cw = scale * t ** (e - 2) * W * r * r if W else 0.0
    ct = scale * t ** (e - 3) * T * r**3 if T else 0.0
    return cw - 3.0 * s * ct, ct


def lattice_x_star_coefficients(H: Pattern, n: int, s: float, t: float) -> tuple[float, float]:
    """Same two coefficients, obtained by summing X*_F over the subgraph lattice."""
    lat = SubgraphLattice(H)
    scale = float(n) ** (H.v - 3)
    cw = ct = 0.0
    for mk in lat:
        F = lat[mk]
        c = lattice_coefficient(F.e, H.e, s, t)
        W, T = F.wedge_count, F.triangle_count
        if W - 3 * T:
            cw += c * scale * s ** (F.e - 2) * (W - 3 * T)
        if T:
            ct += c * scale * s ** (F.e - 3) * T
    return cw, ct


def _m_for(trace: ProcessTrace, t: float) -> int:
    _check_t(t)
    m = math.floor(t * trace.N)
    if trace.m < m:
        raise InvalidArgumentError(f"trace has {trace.m} steps; {m} are needed for t={t}")
    return m


def lambda_star_accumulate(H: Pattern, t: float, trace: ProcessTrace) -> float:
    m = _m_for(trace, t)
    N, n = trace.N, trace.n
    terms = []
    for st in trace.steps[:m]:
        cw, ct = lambda_star_coefficients(H, n, st.i / N, t)
        terms.append(cw * float(st.X_wedge) + ct * float(st.X_tri))
    return math.fsum(terms)


def lambda_double_star(H: Pattern, t: float, trace: ProcessTrace) -> float:
    m = _m_for(trace, t)
    if H != trace.H:
        raise InvalidArgumentError("trace was recorded for a different pattern")
    N, e = trace.N, H.e
    sizes = {mk: mk.bit_count() for mk in trace.lattice}
    terms = []
    for st in trace.steps[:m]:
        s = st.i / N
        for mk in trace.lattice:
            terms.append(lattice_coefficient(sizes[mk], e, s, t) * float(st.X[mk]))
    return math.fsum(terms)


def step_x_star(trace: ProcessTrace, st: StepRecord, mask: int) -> float:
    return x_star(
        trace.lattice[mask], st.i, trace.N, trace.n, trace.H.v, float(st.X_wedge), float(st.X_tri)
    )


def trace_rows(trace: ProcessTrace) -> Iterable[dict]:
    for st in trace.steps:
        row = {"i": st.i, "s": st.i / trace.N, "u": st.edge[0], "w": st.edge[1]}
        for mk in trace.lattice:
            xs = step_x_star(trace, st, mk)
            row[f"A_{mk}"] = st.A[mk]
            row[f"X_{mk}"] = float(st.X[mk])
            row[f"Xstar_{mk}"] = xs
            row[f"Y_{mk}"] = float(st.X[mk]) - xs
        yield row


def trace_to_csv(trace: ProcessTrace, fh=None) -> str:
    """CSV with one row per step; columns are suffixed by the lattice bitmask."""
    buf = io.StringIO() if fh is None else fh
    rows = list(trace_rows(trace))
    if rows:
        wr = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue() if fh is None else ""


def trace_summary(trace: ProcessTrace, t: float | None = None) -> dict:
    """D_H at the end of the trace and, for ``t`` given, the three approximants."""
    out: dict = {"n": trace.n, "m": trace.m, "pattern": trace.H.spec(), "D_H": trace.deviation()}
    if t is not None:
        m = _m_for(trace, t)
        dw, dt = _base_deviations(trace, m)
        out["t"] = t
        out["D_H_at_t"] = trace.deviation(m)
        out["Lambda"] = lambda_combination(trace.H, t, trace.n, dw, dt)
        out["Lambda_star"] = lambda_star_accumulate(trace.H, t, trace)
        out["Lambda_double_star"] = lambda_double_star(trace.H, t, trace)
    if trace.steps and trace.steps[0].qv is not None:
        out["V"] = trace.quadratic_variation()[-1]
    return out


def _base_deviations(trace: ProcessTrace, m: int) -> tuple[float, float]:
    """Wedge and triangle deviations of G_m, rebuilt from the recorded increments."""
    G = HostGraph.from_edges(trace.n, [st.edge for st in trace.steps[:m]])
    nw = count_embeddings(G, WEDGE)
    nt = count_embeddings(G, TRIANGLE)
    return (
        float(nw - expected_count(WEDGE, trace.n, m)),
        float(nt - expected_count(TRIANGLE, trace.n, m)),
    )


def summary_json(summary: dict) -> str:
    def enc(x):
        if isinstance(x, Fraction):
            return f"{x.numerator}/{x.denominator}"
        raise TypeError(type(x))

    return json.dumps(summary, default=enc, sort_keys=True)
