"""Command-line entry point: ``gdev <command> [subcommand] [flags]``.

Every JSON document carries the package version, the seed (when one is
used) and a hash of the run's manifest (command plus resolved parameters).
Timestamps and wall-clock times only go to the optional ``--manifest``
file, so statistical outputs are byte-identical across reruns.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict, is_dataclass
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from . import __version__
from .errors import GdevError, InternalInconsistencyError, ResourceLimitError

SCHEMA = "gdev/1"
NON_HASHED = {"threads", "out", "trace", "manifest", "config", "format"}


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, 17 significant digits, rationals as "p/q"."""
    return _enc(obj)


def _enc(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Fraction):
        return json.dumps(_frac(x))
    if isinstance(x, (float, np.floating)):
        xf = float(x)
        if not math.isfinite(xf):
            raise InternalInconsistencyError(f"non-finite number {xf} in output")
        s = format(xf, ".17g")
        if "." not in s and "e" not in s and "inf" not in s:
            s += ".0"
        return s
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_enc(v)}" for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))) + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ",".join(_enc(v) for v in x) + "]"
    if isinstance(x, np.ndarray):
        return _enc(x.tolist())
    if is_dataclass(x):
        return _enc(asdict(x))
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _fmt_num(v) -> str:
    if isinstance(v, float):
        if not math.isfinite(v):
            raise InternalInconsistencyError(f"non-finite number {v} in output")
        return format(v, ".17g")
    if isinstance(v, Fraction):
        return _frac(v)
    return str(v)


def _frac(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def rows_csv(rows: list[dict], manifest_hash: str) -> str:
    if not rows:
        return f"# manifest {manifest_hash}\n"
    cols = list(rows[0])
    lines = [f"# manifest {manifest_hash}", ",".join(cols)]
    for r in rows:
        lines.append(",".join(_fmt_num(r[c]) for c in cols))
    return "\n".join(lines) + "\n"


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _resolve(args: argparse.Namespace) -> None:
    """Fill unset flags from the config file, then GDEV_* environment variables."""
    cfg = _load_config(getattr(args, "config", None))
    for key, val in vars(args).copy().items():
        if val is None:
            if key in cfg:
                setattr(args, key, cfg[key])
            elif f"GDEV_{key.upper()}" in os.environ:
                setattr(args, key, os.environ[f"GDEV_{key.upper()}"])
    for key, default in getattr(args, "_defaults", {}).items():
        if getattr(args, key, None) is None:
            setattr(args, key, default)
    for key, typ in getattr(args, "_types", {}).items():
        v = getattr(args, key, None)
        if v is not None and not isinstance(v, typ):
            setattr(args, key, typ(v))


def _params(args: argparse.Namespace) -> dict:
    return {
        k: v
        for k, v in sorted(vars(args).items())
        if not k.startswith("_") and k not in NON_HASHED and k != "func" and v is not None
    }


def manifest_hash(command: str, params: dict) -> str:
    blob = dumps({"command": command, "parameters": params, "version": __version__})
    return hashlib.sha256(blob.encode()).hexdigest()


# --- command implementations ---------------------------------------------------


def _pattern(name):
    from .patterns import parse_pattern

    return parse_pattern(name)


def cmd_simulate(a):
    from .graph_process import degree_diagnostics, new_process
    from .patterns import deviation

    st = new_process(a.n, a.seed, codegrees=a.codegrees)
    m = a.m if a.m is not None else math.floor(a.t * st.N)
    st.run_to(m)
    out = {"n": a.n, "N": st.N, "m": m, "generator": st.generator,
           "diagnostics": degree_diagnostics(st)}
    if a.pattern:
        H = _pattern(a.pattern)
        out["pattern"] = H.spec()
        out["D_H"] = deviation(st, H, exact=True)
        if a.trace:
            from .martingale import build_trace, trace_to_csv

            tr = build_trace(st, H, m, exact=a.n <= 12)
            with open(a.trace, "w") as fh:
                fh.write(f"# manifest {a._hash}\n")
                trace_to_csv(tr, fh)
    return out


def cmd_verify(a):
    from .patterns import SubgraphLattice, complement_check, l_increment_identity_check

    H = _pattern(a.pattern)
    if a.what == "mart":
        from .graph_process import new_process
        from .martingale import build_trace, verify_decomposition

        st = new_process(a.n, a.seed)
        ms = range(1, st.N + 1) if a.m == "all" else [int(a.m)]
        tr = build_trace(st, H, max(ms))
        res = max((abs(verify_decomposition(tr, m).residual) for m in ms), default=Fraction(0))
        return {"check": "martingale", "pattern": H.spec(), "n": a.n, "m": a.m,
                "checked": len(ms), "residual": res}
    if a.what == "lident":
        from .combinat import pair_count

        N = pair_count(a.n)
        ms = range(1, N + 1) if a.m == "all" else [int(a.m)]
        ok = all(l_increment_identity_check(H, a.n, m) for m in ms)
        return {"check": "lident", "pattern": H.spec(), "n": a.n, "checked": len(ms), "holds": ok}
    if a.what == "comp":
        from .graph_process import new_process
        from .patterns import HostGraph

        worst = Fraction(0)
        rng = np.random.default_rng(a.seed)
        for h in range(a.hosts):
            st = new_process(a.n, a.seed + h)
            st.run_to(int(rng.integers(0, st.N + 1)))
            lhs, rhs = complement_check(HostGraph(st.n, list(st.nbr)), H)
            worst = max(worst, abs(lhs - rhs))
        return {"check": "complement", "pattern": H.spec(), "n": a.n, "hosts": a.hosts,
                "lattice_size": len(SubgraphLattice(H)), "residual": worst}
    if a.what == "cond":
        from .gnp import conditioning_identity_check

        lhs, rhs, res = conditioning_identity_check(a.n, a.p, H, a.threshold)
        return {"check": "conditioning", "pattern": H.spec(), "n": a.n, "p": a.p,
                "threshold": a.threshold, "lhs": lhs, "rhs": rhs, "residual": res}
    raise GdevError(f"unknown check {a.what}")


def cmd_covariance(a):
    from .covariance import covariance_rows
    from .graph_process import new_process

    st = new_process(a.n, a.seed, codegrees=True)
    m = math.floor(a.t * st.N)
    idx = np.unique(np.linspace(1, m, a.steps).astype(int))
    states = []
    for i in idx:
        st.run_to(int(i) - 1)
        states.append(st.replay())
    rows = covariance_rows(states)
    return {"n": a.n, "t": a.t, "rows": rows}


def _parse_kv(text: str) -> dict:
    out = {}
    for tok in filter(None, (text or "").split(",")):
        if "=" not in tok:
            raise GdevError(f"bad parameter token {tok!r}; expected key=value")
        k, v = tok.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def cmd_bounds(a):
    from .bounds import BoundQuery

    params = _parse_kv(a.params)
    r = BoundQuery(a.kind, params).evaluate()
    out = {"kind": a.kind, "params": params, "bound": r.bound,
           "log_bound": r.log_bound if math.isfinite(r.log_bound) else None}
    out.update(r.extra)
    return out


def cmd_gnp(a):
    from .gnp import BinomialSpec, bahadur_tail, rate_auto, rate_larger_delta, rate_small_delta
    from .gnp import binom_exact, log_binom_exact

    if a.what == "rate":
        H = _pattern(a.pattern)
        fn = {"auto": rate_auto, "small": rate_small_delta, "large": rate_larger_delta}[a.regime]
        r = fn(a.n, a.p, H, a.delta)
        return {"n": a.n, "p": a.p, "pattern": H.spec(), "delta": a.delta, "regime": r.regime,
                "components": r.components, "prediction_log_prob": r.log_prob,
                "regime_diagnostics": r.diagnostics, "unmodeled": r.unmodeled}
    spec = BinomialSpec(a.N, a.p)
    b = bahadur_tail(spec, a.x, a.J if a.J == "converged" else int(a.J))
    k = a.p * a.N + a.x * spec.sigma
    return {"N": a.N, "p": a.p, "x": a.x, "E": b.E, "log_pmf_asymptotic": b.log_pmf,
            "log_tail_asymptotic": b.log_tail, "log_tail_exact": log_binom_exact(spec, k, "upper_tail"),
            "tail_ratio": b.tail / binom_exact(spec, k, "upper_tail")}


def cmd_mc(a):
    from .montecarlo import empirical_distribution, estimate_tail

    H = _pattern(a.pattern)
    if a.what == "tail":
        e = estimate_tail(a.n, a.t, H, a.alpha, a.direction, a.samples, a.seed, a.threads,
                          a.ci, method=a.method)
        a._runtime = e.runtime
        return e.as_dict()
    d = empirical_distribution(a.n, a.t, H, a.samples, a.seed, a.threads, a.method)
    rows = [
        {"sample": k, "D_wedge": float(d["samples_D_wedge"][k]),
         "D_tri": float(d["samples_D_tri"][k]) if d["samples_D_tri"] is not None else 0.0,
         "Lambda": float(d["samples_Lambda"][k]), "D_H": float(d["samples_D_H"][k])}
        for k in range(a.samples)
    ]
    summary = {k: v for k, v in d.items() if not k.startswith("samples_")}
    summary["samples"] = a.samples
    return {"summary": summary, "rows": rows}


def cmd_rates(a):
    from .montecarlo import gamma_rate, gamma_rate_terms, predict_rate

    H = _pattern(a.pattern)
    out = {"pattern": H.spec(), "t": a.t, "gamma": gamma_rate(H, a.t),
           "terms": gamma_rate_terms(H, a.t)}
    if a.alpha is not None:
        r = predict_rate(H, a.t, a.alpha, a.n or 10**6)
        out.update({"alpha": a.alpha, "log_prob_pred": r.log_prob_pred, "regime_ok": r.regime_ok,
                    "notes": r.notes})
    return out


# --- parser -------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, seed: bool = True, threads: bool = False) -> None:
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--config", help="JSON file with default flag values")
    p.add_argument("--manifest", help="write an experiment manifest (with timestamps) here")
    if seed:
        p.add_argument("--seed", type=int)
    if threads:
        p.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gdev", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one process trajectory")
    p.add_argument("--n", type=int, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--m", type=int)
    g.add_argument("--t", type=float)
    p.add_argument("--pattern")
    p.add_argument("--codegrees", action="store_true")
    p.add_argument("--trace", help="CSV path for per-step increments")
    _common(p)
    p.set_defaults(func=cmd_simulate, _defaults={"seed": 0, "t": 0.5}, _types={"seed": int})

    p = sub.add_parser("verify", help="exact identity checks")
    vs = p.add_subparsers(dest="what", required=True)
    for name in ("mart", "comp", "lident", "cond"):
        q = vs.add_parser(name)
        q.add_argument("--n", type=int, required=True)
        q.add_argument("--pattern", required=True)
        if name in ("mart", "lident"):
            q.add_argument("--m", default="all")
        if name == "comp":
            q.add_argument("--hosts", type=int, default=10)
        if name == "cond":
            q.add_argument("--p", type=float, required=True)
            q.add_argument("--threshold", type=float, default=0.0)
        _common(q)
        q.set_defaults(func=cmd_verify, _defaults={"seed": 0}, _types={"seed": int})

    p = sub.add_parser("covariance", help="exact conditional covariances along a trajectory")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--steps", type=int, default=20)
    _common(p)
    p.set_defaults(func=cmd_covariance, _defaults={"seed": 0}, _types={"seed": int})

    p = sub.add_parser("bounds", help="concentration inequality evaluators")
    bs = p.add_subparsers(dest="what", required=True)
    q = bs.add_parser("eval")
    q.add_argument("--kind", required=True)
    q.add_argument("--params", default="")
    _common(q, seed=False)
    q.set_defaults(func=cmd_bounds)

    p = sub.add_parser("gnp", help="G(n, p) rates and binomial asymptotics")
    gs = p.add_subparsers(dest="what", required=True)
    q = gs.add_parser("rate")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--p", type=float, required=True)
    q.add_argument("--pattern", required=True)
    q.add_argument("--delta", type=float, required=True)
    q.add_argument("--regime", choices=("auto", "small", "large"), default="auto")
    _common(q, seed=False)
    q.set_defaults(func=cmd_gnp)
    q = gs.add_parser("bahadur")
    q.add_argument("--N", type=int, required=True)
    q.add_argument("--p", type=float, required=True)
    q.add_argument("--x", type=float, required=True)
    q.add_argument("--J", default="converged")
    _common(q, seed=False)
    q.set_defaults(func=cmd_gnp)

    p = sub.add_parser("mc", help="Monte Carlo tail and distribution estimates")
    ms = p.add_subparsers(dest="what", required=True)
    for name in ("tail", "dist"):
        q = ms.add_parser(name)
        q.add_argument("--n", type=int, required=True)
        q.add_argument("--t", type=float, required=True)
        q.add_argument("--pattern", required=True)
        q.add_argument("--samples", type=int)
        q.add_argument("--method", choices=("auto", "exact", "lambda"), default="auto")
        if name == "tail":
            q.add_argument("--alpha", type=float, required=True)
            q.add_argument("--direction", choices=("upper", "lower"), default="upper")
            q.add_argument("--ci", choices=("clopper-pearson", "wilson"), default="clopper-pearson")
        _common(q, threads=True)
        q.set_defaults(
            func=cmd_mc,
            _defaults={"seed": 0, "samples": 10_000 if name == "tail" else 1000,
                       "threads": os.cpu_count() or 1},
            _types={"seed": int, "samples": int, "threads": int},
        )

    p = sub.add_parser("rates", help="G(n, m) rate constant and predicted log-probability")
    p.add_argument("--pattern", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int)
    _common(p, seed=False)
    p.set_defaults(func=cmd_rates)
    return ap


def _command_name(a) -> str:
    what = getattr(a, "what", None)
    return f"{a.command} {what}" if what else a.command


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    try:
        _resolve(a)
        params = _params(a)
        cmd = _command_name(a)
        a._hash = manifest_hash(cmd, params)
        result = a.func(a)
        if a.format == "csv":
            rows = result.get("rows") if isinstance(result, dict) else None
            if rows is None:
                raise GdevError("this command has no tabular output; use --format json")
            text = rows_csv(rows, a._hash)
        else:
            doc = {"schema": SCHEMA, "version": __version__, "command": cmd, "parameters": params,
                   "manifest_hash": a._hash, "result": result}
            if "seed" in params:
                doc["seed"] = params["seed"]
            text = dumps(doc) + "\n"
    except ResourceLimitError as exc:
        print(f"gdev: resource limit: {exc}", file=sys.stderr)
        return 3
    except InternalInconsistencyError as exc:
        print(f"gdev: internal inconsistency: {exc}", file=sys.stderr)
        return 1
    except (GdevError, ValueError, KeyError, OSError) as exc:
        print(f"gdev: error: {exc}", file=sys.stderr)
        return 2
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    if a.manifest:
        man = {
            "command": cmd, "parameters": params, "seed": params.get("seed"),
            "artifact_version": __version__, "manifest_hash": a._hash,
            "outputs": [x for x in (a.out, getattr(a, "trace", None)) if x],
            "started": started, "finished": datetime.now(timezone.utc).isoformat(),
            "runtime_seconds": time.perf_counter() - t0,
        }
        with open(a.manifest, "w") as fh:
            json.dump(man, fh, indent=2, sort_keys=True)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
