"""Command-line interface: ``traffics eval | moment | verify``.

Exit codes: 0 success, 1 acceptance failure (some ``|z|`` above threshold),
2 usage or parse error, 3 computation or guard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

import numpy as np

from .algebra import tau_from_tau0, star_moment
from .dsl import load_graph
from .ensembles import EnsembleSpec, default_jobs, linear_combination, hadamard_compose, mc_estimate
from .errors import ContractError, DomainError, GuardError, ParseError, TrafficError
from .evaluation import eval_monomial, injective_density, injective_trace, load_family, trace_test_graph
from .graph import GraphMonomial, NGraphMonomial, StarTestGraph, close, parse_word
from .laws import parse_law

SCHEMA_VERSION = 1
CSV_COLUMNS = ["graph_id", "N", "samples", "mean_re", "mean_im", "stderr", "prediction", "z"]
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_COMPUTE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, complex):
        if abs(x.imag) < 1e-15:
            return repr(x.real)
        return f"{x.real!r}{x.imag:+.17g}j"
    return repr(x) if isinstance(x, float) else str(x)


# ------------------------------------------------------------- eval


def cmd_eval(args) -> int:
    g = _graph_arg(args)
    F = load_family(args.family)
    if isinstance(g, NGraphMonomial):
        raise UsageError("eval takes a test graph or an in/out monomial")
    stat = "trace" if args.trace else "injective" if args.injective else "density" if args.density else None
    if isinstance(g, GraphMonomial) and stat is None:
        m = eval_monomial(g, F)
        for row in np.asarray(m, dtype=complex):
            print(" ".join(_fmt(complex(z)) for z in row))
        return EXIT_OK
    T = close(g) if isinstance(g, GraphMonomial) else g
    if stat in (None, "trace"):
        val = trace_test_graph(T, F).value
    elif stat == "injective":
        val = injective_trace(T, F).value
    else:
        val = injective_density(T, F).value
    print(_fmt(complex(val)))
    return EXIT_OK


def _graph_arg(args):
    if args.graph is None:
        raise UsageError("--graph is required")
    return load_graph(args.graph)


# ------------------------------------------------------------- moment


def cmd_moment(args) -> int:
    law = parse_law(args.law)
    if (args.word is None) == (args.graph is None):
        raise UsageError("give exactly one of --word or --graph")
    if args.word is not None:
        val = star_moment(law, parse_word(args.word))
    else:
        g = load_graph(args.graph)
        if isinstance(g, GraphMonomial):
            g = close(g)
        if not isinstance(g, StarTestGraph):
            raise UsageError("--graph must be a test graph or monomial")
        val = law(g) if args.injective else tau_from_tau0(law, g)
    print(_fmt(val))
    return EXIT_OK


# ------------------------------------------------------------- verify


def _spec_from_json(obj, N: int) -> EnsembleSpec:
    if isinstance(obj, str):
        obj = {"kind": obj}
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ParseError(f"ensemble entry must be a kind name or an object with 'kind': {obj!r}")
    kind = obj["kind"]
    params = dict(obj.get("params", {}))
    try:
        if kind == "hadamard":
            specs = [_spec_from_json(f, N) for f in params["factors"]]
            out = specs[0]
            for s in specs[1:]:
                out = hadamard_compose(out, s)
            return out
        if kind == "linear":
            return linear_combination([(_coef(c), _spec_from_json(s, N)) for c, s in params["terms"]])
        if kind == "deterministic":
            params["matrix"] = np.asarray(params["matrix"], dtype=complex)
            N = params["matrix"].shape[0]
        return EnsembleSpec(kind, N, params)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad parameters for ensemble {kind!r}: {exc}") from None
    except ContractError as exc:
        raise ParseError(str(exc)) from None


def _coef(c) -> float:
    if isinstance(c, str) and c.startswith("sqrt(") and c.endswith(")"):
        return math.sqrt(float(Fraction(c[5:-1])))
    return float(Fraction(c)) if isinstance(c, str) else float(c)


def _load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"config is not valid JSON: {exc.msg}", exc.lineno, exc.colno) from None
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if not isinstance(cfg, dict):
            raise ParseError("config must be a JSON object")
    if args.graph:
        cfg["graphs"] = list(args.graph)
    if args.graphs_file:
        with open(args.graphs_file) as fh:
            cfg["graphs"] = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if args.ensemble:
        ens = {}
        for item in args.ensemble:
            var, _, kind = item.partition("=")
            if not kind:
                raise UsageError(f"--ensemble expects var=kind, got {item!r}")
            ens[var] = kind
        cfg["ensembles"] = ens
    for key in ("law", "seed", "samples", "format", "out", "threshold", "statistic"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if args.N:
        cfg["N"] = list(args.N)
    allowed = {"graphs", "ensembles", "groups", "law", "N", "samples", "seed", "out", "format", "threshold", "statistic", "jobs"}
    unknown = set(cfg) - allowed
    if unknown:
        raise ParseError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    for key in ("graphs", "ensembles", "N", "samples", "seed"):
        if key not in cfg:
            raise ParseError(f"config is missing required key {key!r}")
    if not isinstance(cfg["seed"], int):
        raise ParseError("seed must be an integer")
    if cfg.get("format", "csv") not in ("csv", "json"):
        raise ParseError("format must be 'csv' or 'json'")
    if cfg.get("statistic", "injective") not in ("injective", "trace"):
        raise ParseError("statistic must be 'injective' or 'trace'")
    if not isinstance(cfg["N"], list) or not all(isinstance(n, int) and n > 0 for n in cfg["N"]):
        raise ParseError("N must be a list of positive integers")
    return cfg


def _graphs(cfg) -> list[tuple[str, StarTestGraph]]:
    raw = cfg["graphs"]
    items = list(raw.items()) if isinstance(raw, dict) else [(f"g{i}", s) for i, s in enumerate(raw)]
    out = []
    for gid, spec in items:
        g = load_graph(spec)
        if isinstance(g, GraphMonomial):
            g = close(g)
        if not isinstance(g, StarTestGraph):
            raise ParseError(f"graph {gid} must be a test graph or monomial")
        out.append((str(gid), g))
    return out


def run_verify(cfg: dict, jobs: int | None = None) -> tuple[list[dict], bool]:
    graphs = _graphs(cfg)
    statistic = cfg.get("statistic", "injective")
    threshold = float(cfg.get("threshold", 4.0))
    law_name = cfg.get("law")
    rows = []
    ok = True
    for N in cfg["N"]:
        specs = {v: _spec_from_json(s, N) for v, s in cfg["ensembles"].items()}
        law = parse_law(law_name.replace("{N}", str(N))) if law_name else None
        exact = all(s.kind in ("all_ones_J", "deterministic") for s in specs.values())
        if exact:
            means = [_exact_stat(g, specs, statistic) for _, g in graphs]
            errs = [0.0] * len(graphs)
            samples = 1
        else:
            rep = mc_estimate([g for _, g in graphs], specs, cfg.get("groups"), int(cfg["samples"]), int(cfg["seed"]), statistic, jobs=jobs)
            means, errs, samples = list(rep.mean), list(rep.stderr), rep.n
        for (gid, g), mean, err in zip(graphs, means, errs):
            pred = None
            z = None
            if law is not None:
                pred = law(g) if statistic == "injective" else tau_from_tau0(law, g)
                if exact:
                    z = 0.0 if mean == pred else math.inf
                else:
                    diff = abs(complex(mean) - complex(pred))
                    z = diff / err if err > 0 else (0.0 if diff < 1e-12 else math.inf)
                if z > threshold:
                    ok = False
            cm = complex(mean)
            rows.append(
                {
                    "graph_id": gid,
                    "N": N,
                    "samples": samples,
                    "mean_re": cm.real,
                    "mean_im": cm.imag,
                    "stderr": err,
                    "prediction": None if pred is None else float(complex(pred).real),
                    "z": z,
                }
            )
    return rows, ok


def _exact_stat(g, specs, statistic):
    from .evaluation import MatrixFamily

    mats = {}
    for v, s in specs.items():
        if s.kind == "all_ones_J":
            one = Fraction(1, s.N) if s.params.get("normalized", True) else Fraction(1)
            mats[v] = np.array([[one] * s.N] * s.N, dtype=object)
        else:
            m = np.asarray(s.params["matrix"])
            if np.all(m.imag == 0) and np.all(m.real == np.round(m.real)):
                mats[v] = np.vectorize(lambda z: Fraction(int(round(z.real))), otypes=[object])(m)
            else:
                mats[v] = m
    F = MatrixFamily(mats)
    return trace_test_graph(g, F).value if statistic == "trace" else injective_trace(g, F).value


def render(rows: list[dict], fmt: str, cfg: dict | None = None) -> str:
    if fmt == "json":
        return json.dumps({"schema_version": SCHEMA_VERSION, "columns": CSV_COLUMNS, "rows": rows}, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    jobs = args.jobs if args.jobs is not None else cfg.get("jobs", default_jobs())
    rows, ok = run_verify(cfg, jobs)
    text = render(rows, cfg.get("format", "csv"), cfg)
    out = cfg.get("out")
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    bad = [r for r in rows if r["z"] is not None and r["z"] > float(cfg.get("threshold", 4.0))]
    for r in bad:
        print(f"FAIL {r['graph_id']} N={r['N']} z={r['z']:.3g}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


# ------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="traffics", description="Traffic distributions of random matrices.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", help="evaluate a graph on a matrix family file")
    e.add_argument("--graph", help="graph in DSL or JSON form")
    e.add_argument("--family", required=True, help="matrix family (.bin or .csv)")
    g = e.add_mutually_exclusive_group()
    g.add_argument("--trace", action="store_true", help="normalized trace (closes monomials)")
    g.add_argument("--injective", action="store_true", help="injective trace")
    g.add_argument("--density", action="store_true", help="injective density")
    e.set_defaults(func=cmd_eval)

    m = sub.add_parser("moment", help="evaluate a law on a word or graph")
    m.add_argument("--law", required=True)
    m.add_argument("--word", help="e.g. xxxx or x,x*,y")
    m.add_argument("--graph", help="graph in DSL or JSON form")
    m.add_argument("--injective", action="store_true", help="print tau0 instead of tau for --graph")
    m.set_defaults(func=cmd_moment)

    v = sub.add_parser("verify", help="Monte Carlo vs analytic prediction table")
    v.add_argument("--config", help="experiment JSON")
    v.add_argument("--graph", action="append", help="graph (repeatable)")
    v.add_argument("--graphs-file", dest="graphs_file")
    v.add_argument("--law")
    v.add_argument("--ensemble", action="append", help="var=kind (repeatable)")
    v.add_argument("--N", type=int, nargs="+")
    v.add_argument("--samples", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--jobs", type=int, help="worker processes (default $TRAFFICS_JOBS or 1)")
    v.add_argument("--out")
    v.add_argument("--format", choices=["csv", "json"])
    v.add_argument("--threshold", type=float)
    v.add_argument("--statistic", choices=["injective", "trace"])
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ParseError, UsageError) as exc:
        print(f"error[parse]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GuardError, DomainError, ContractError, TrafficError) as exc:
        print(f"error[compute]: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
