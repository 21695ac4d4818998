"""Closed-form concentration inequalities, evaluated in log space."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from scipy.optimize import brentq

from .errors import InfeasibleRegimeError, InvalidArgumentError

DELTA_MAX = 1e6
KINDS = (
    "hoeffding_azuma",
    "psi_lipschitz",
    "freedman_upper",
    "freedman_converse",
    "hypergeom_upper",
    "hypergeom_lower",
    "upto_form",
)


@dataclass
class BoundResult:
    log_bound: float
    extra: dict = field(default_factory=dict)

    @property
    def bound(self) -> float:
        return math.exp(self.log_bound)


def _clamp(logp: float) -> float:
    return min(0.0, logp)


def _nonneg(name: str, x: float) -> None:
    if not x >= 0:
        raise InvalidArgumentError(f"{name} must be nonnegative, got {x}")


def log_hoeffding_azuma(a: float, c: Sequence[float]) -> float:
    _nonneg("a", a)
    ss = math.fsum(x * x for x in c)
    if a == 0:
        return 0.0
    if ss == 0:
        return -math.inf
    return _clamp(-a * a / (2 * ss))


def hoeffding_azuma(a: float, c: Sequence[float]) -> float:
    return math.exp(log_hoeffding_azuma(a, c))


def log_psi_lipschitz(a: float, psi_sq: float) -> float:
    """Bound for a psi-Lipschitz function of G(n, m); ``psi_sq`` is sum psi(e)^2."""
    _nonneg("a", a)
    _nonneg("psi_sq", psi_sq)
    if a == 0:
        return 0.0
    if psi_sq == 0:
        return -math.inf
    return _clamp(-a * a / (8 * psi_sq))


def psi_lipschitz(a: float, psi_sq: float) -> float:
    return math.exp(log_psi_lipschitz(a, psi_sq))


def log_freedman_upper(alpha: float, beta: float, R: float) -> float:
    for nm, x in (("alpha", alpha), ("beta", beta), ("R", R)):
        _nonneg(nm, x)
    den = beta + R * alpha
    if den <= 0:
        if alpha == 0:
            return 0.0
        raise InvalidArgumentError("beta + R*alpha must be positive")
    return _clamp(-alpha * alpha / (2 * den))


def freedman_upper(alpha: float, beta: float, R: float) -> float:
    return math.exp(log_freedman_upper(alpha, beta, R))


def _converse_gap(delta: float, alpha: float, beta: float) -> float:
    # >= 0 iff the second constraint holds; decreasing on (0, 8), nonpositive beyond
    return 16.0 / delta**2 * math.log(64.0 / delta**2) - alpha * alpha / beta


def converse_delta(alpha: float, beta: float, R: float, delta_max: float = DELTA_MAX) -> float:
    """Smallest delta > 0 with beta/alpha >= 9R/delta^2 and
    alpha^2/beta >= 16 delta^{-2} log(64 delta^{-2})."""
    if not (alpha > 0 and beta > 0 and R > 0):
        raise InvalidArgumentError("alpha, beta and R must be positive")
    d1 = math.sqrt(9.0 * R * alpha / beta)
    # the gap is -alpha^2/beta < 0 at delta = 8 and tends to +inf at 0;
    # halve down from 8 to bracket its single root
    lo = 8.0
    while _converse_gap(lo, alpha, beta) <= 0:
        lo /= 2
    d2 = brentq(_converse_gap, lo, 2 * lo, args=(alpha, beta), xtol=1e-300, rtol=1e-12)
    delta = max(d1, d2)
    if delta > delta_max:
        raise InfeasibleRegimeError(f"smallest feasible delta {delta:g} exceeds {delta_max:g}")
    return delta


def log_freedman_converse(
    alpha: float, beta: float, R: float, delta_max: float = DELTA_MAX
) -> tuple[float, float]:
    """(log lower bound, delta) for the converse Freedman inequality."""
    delta = converse_delta(alpha, beta, R, delta_max)
    return _clamp(math.log(0.5) - alpha * alpha * (1 + 4 * delta) / (2 * beta)), delta


def freedman_converse(alpha: float, beta: float, R: float, delta_max: float = DELTA_MAX):
    lb, delta = log_freedman_converse(alpha, beta, R, delta_max)
    return math.exp(lb), delta


def log_hypergeometric_tail(mu: float, a: float, side: str = "upper", sharp: bool = False) -> float:
    if not mu > 0:
        raise InvalidArgumentError("mu must be positive")
    _nonneg("a", a)
    if a == 0:
        return 0.0
    if side == "upper":
        den = 2 * mu + (2 * a / 3 if sharp else a)
    elif side == "lower":
        den = 2 * mu
    else:
        raise InvalidArgumentError(f"unknown side {side!r}")
    return _clamp(-a * a / den)


def hypergeometric_tail(mu: float, a: float, side: str = "upper", sharp: bool = False) -> float:
    return math.exp(log_hypergeometric_tail(mu, a, side, sharp))


def log_upto_bound(alpha: float, n: float, c: float) -> float:
    if not (alpha > 0 and n > 0 and c > 0):
        raise InvalidArgumentError("alpha, n and c must be positive")
    return _clamp(-c * alpha * min(alpha, math.sqrt(n)))


def upto_bound(alpha: float, n: float, c: float) -> float:
    return math.exp(log_upto_bound(alpha, n, c))


@dataclass
class BoundQuery:
    kind: str
    params: dict

    def evaluate(self) -> BoundResult:
        p = self.params
        k = self.kind
        try:
            if k == "hoeffding_azuma":
                c = p["c"]
                c = [float(x) for x in (c if isinstance(c, (list, tuple)) else str(c).split(";"))]
                return BoundResult(log_hoeffding_azuma(float(p["a"]), c))
            if k == "psi_lipschitz":
                return BoundResult(log_psi_lipschitz(float(p["a"]), float(p["psi_sq"])))
            if k == "freedman_upper":
                return BoundResult(
                    log_freedman_upper(float(p["alpha"]), float(p["beta"]), float(p["R"]))
                )
            if k == "freedman_converse":
                lb, d = log_freedman_converse(
                    float(p["alpha"]),
                    float(p["beta"]),
                    float(p["R"]),
                    float(p.get("delta_max", DELTA_MAX)),
                )
                return BoundResult(lb, {"delta": d})
            if k in ("hypergeom_upper", "hypergeom_lower"):
                side = k.split("_")[1]
                sharp = str(p.get("sharp", "0")).lower() in ("1", "true", "yes")
                return BoundResult(
                    log_hypergeometric_tail(float(p["mu"]), float(p["a"]), side, sharp)
                )
            if k == "upto_form":
                return BoundResult(log_upto_bound(float(p["alpha"]), float(p["n"]), float(p["c"])))
        except KeyError as exc:
            raise InvalidArgumentError(f"missing parameter {exc.args[0]!r} for {k}") from None
        raise InvalidArgumentError(f"unknown bound kind {k!r}; expected one of {KINDS}")
