"""Command-line interface: ``phicoherent entail|gen|export|bench``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .encodings import VARIANTS, export_encoding
from .generators import (
    NetSpec, RandomParams, gen_maxsat_even, gen_mlp_kb, gen_random_kb, mlp_text, parse_clauses, random_query,
)
from .kb import ANONYMOUS, KBError, KnowledgeBase, Query, Verdict
from .kbio import ParseError, build_kb, parse_facts, serialize_kb
from .oracle import DEFAULT_BUDGET, OracleBudgetExceeded, oracle_entails
from .solver import MODES, available_backends, entails

EXIT_ENTAILED, EXIT_NOT_ENTAILED, EXIT_UNKNOWN, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3, 4
TIMEOUT_ENV = "PHICOHERENT_TIMEOUT"
BENCH_TIMEOUT = 1800.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2, which is reserved for "unknown"
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def default_timeout() -> Optional[float]:
    raw = os.environ.get(TIMEOUT_ENV)
    if not raw:
        return None
    try:
        value = float(raw)
    except ValueError:
        raise UsageError(f"{TIMEOUT_ENV} must be a number of seconds, got {raw!r}") from None
    return value if value > 0 else None


def _mode(name: str) -> str:
    return "descending" if name == "sequential" else name


# --------------------------------------------------------------------------
# entail


def load_with_query(path: str, query_args: Optional[str]) -> tuple[KnowledgeBase, Query]:
    text = Path(path).read_text(encoding="utf-8")
    facts = parse_facts(text)
    if query_args is not None:
        override = parse_facts(f"query({query_args}).")
        facts = [f for f in facts if f.predicate != "query"] + override
    kb, query = build_kb(facts)
    if query is None:
        raise UsageError(f"{path}: no query fact; pass --query C,D,THETA,ALPHA")
    return kb, query


def verdict_report(kb: KnowledgeBase, query: Query, v: Verdict, engine: str, wall: float) -> dict:
    report = {
        "entailed": v.entailed,
        "typical_degree": None if v.typical_degree is None else str(v.typical_degree),
        "kb_satisfiable": v.kb_satisfiable,
        "query": str(query),
        "engine": engine,
        "wall_time_ms": round(wall * 1000, 3),
    }
    if v.witness is not None:
        report["witness"] = {c: str(d) for c, d in
                             ((c, v.witness[(ANONYMOUS, c)]) for c in kb.concepts
                              if (ANONYMOUS, c) in v.witness.degrees)}
    for key in ("mode", "backend", "reason", "lower_bound", "probes", "decisions", "conflicts"):
        if key in v.info:
            report[key] = v.info[key]
    if report.get("lower_bound") is not None:
        report["lower_bound"] = f"{report['lower_bound']}/{kb.n}"
    return report


def cmd_entail(args) -> int:
    timeout = args.timeout if args.timeout is not None else default_timeout()
    kb, query = load_with_query(args.kb, args.query)
    start = time.monotonic()
    if args.engine == "oracle":
        v = oracle_entails(kb, query, budget=args.budget, workers=args.workers)
    else:
        v = entails(kb, query, mode=_mode(args.mode), timeout=timeout, backend=args.backend)
    report = verdict_report(kb, query, v, args.engine, time.monotonic() - start)
    print(json.dumps(report, indent=2 if args.pretty else None))
    if v.entailed is None:
        return EXIT_UNKNOWN
    return EXIT_ENTAILED if v.entailed else EXIT_NOT_ENTAILED


# --------------------------------------------------------------------------
# gen


def _seed(args) -> int:
    if args.seed is None:
        args.seed = random.SystemRandom().randrange(2**31)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _write(text: str, out: Optional[str]) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _layers(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in raw.split(","))
    except ValueError:
        raise UsageError(f"--layers expects comma separated integers, got {raw!r}") from None


def cmd_gen(args) -> int:
    if args.family == "maxsat":
        src = sys.stdin.read() if args.clauses == "-" else Path(args.clauses).read_text(encoding="utf-8")
        gamma = parse_clauses(src)
        kb, q = gen_maxsat_even(gamma)
        clauses = " ".join("[" + ",".join(map(str, sorted(c, key=abs))) + "]" for c in gamma.clauses)
        text = serialize_kb(kb, q, [f"maxsat-even reduction of {len(gamma)} clause(s): {clauses}"])
    elif args.family == "mlp":
        spec = NetSpec(_layers(args.layers), seed=_seed(args), n=args.n, weight_den=args.weight_den,
                       w_min=Fraction(args.w_min), w_max=Fraction(args.w_max),
                       crisp_inputs=not args.no_crisp_inputs)
        text = mlp_text(spec)
    else:
        seed = _seed(args)
        params = RandomParams(names=args.names, n=args.n, wtis=args.wtis, inclusions=args.inclusions,
                              assertions=args.assertions, individuals=args.individuals, seed=seed)
        if args.oracle_sized and params.oracle_cost() > DEFAULT_BUDGET:
            raise UsageError(f"(n+1)^names = {params.oracle_cost()} exceeds the oracle budget {DEFAULT_BUDGET}")
        kb = gen_random_kb(params)
        q = random_query(random.Random(seed ^ 0x5EED), kb)
        text = serialize_kb(kb, q, [f"random kb seed={seed} names={args.names} n={args.n} wtis={args.wtis} "
                                    f"inclusions={args.inclusions} assertions={args.assertions}"])
    _write(text, args.output)
    return 0


# --------------------------------------------------------------------------
# export


def cmd_export(args) -> int:
    kb, query = load_with_query(args.kb, args.query) if args.query else _load_any(args.kb)
    _write(export_encoding(kb, query, args.variant), args.output)
    return 0


def _load_any(path: str):
    return build_kb(parse_facts(Path(path).read_text(encoding="utf-8")))


# --------------------------------------------------------------------------
# bench


def _bench_instances(spec: dict) -> list[dict]:
    out = []
    for inst in spec.get("instances", []):
        family = inst.get("family", "mlp")
        seeds = inst.get("seeds", [0])
        if isinstance(seeds, int):
            seeds = list(range(seeds))
        for seed in seeds:
            if family == "mlp":
                out.append({"family": "mlp", "layers": list(inst["layers"]), "n": inst.get("n", 4),
                            "seed": seed, "crisp_inputs": inst.get("crisp_inputs", True),
                            "w_min": str(inst.get("w_min", -1)), "w_max": str(inst.get("w_max", 1))})
            elif family == "kb":
                out.append({"family": "kb", "path": inst["path"], "seed": seed})
            else:
                raise UsageError(f"unknown bench family {family!r}")
    return out


def _instance_kb(inst: dict) -> tuple[KnowledgeBase, Query, dict]:
    if inst["family"] == "mlp":
        spec = NetSpec(tuple(inst["layers"]), seed=inst["seed"], n=inst["n"],
                       w_min=Fraction(inst["w_min"]), w_max=Fraction(inst["w_max"]),
                       crisp_inputs=inst["crisp_inputs"])
        kb, q = gen_mlp_kb(spec)
        return kb, q, {"instance": ",".join(map(str, spec.layers)), "size": spec.nodes, "edges": spec.edges}
    kb, q = _load_any(inst["path"])
    return kb, q, {"instance": inst["path"], "size": len(kb.concepts), "edges": len(kb.dbox)}


def run_cell(cell: dict) -> dict:
    """Run one (instance, engine, mode) cell; never raises."""
    row = {"engine": cell["engine"], "mode": cell["mode"], "seed": cell["instance"]["seed"]}
    try:
        kb, q, meta = _instance_kb(cell["instance"])
        row.update(meta, n=kb.n)
        start = time.monotonic()
        if cell["engine"] == "oracle":
            v = oracle_entails(kb, q)
        else:
            v = entails(kb, q, mode=cell["mode"], timeout=cell["timeout"], backend=cell.get("backend"))
        row["seconds"] = round(time.monotonic() - start, 6)
        row["solved"] = v.entailed is not None
        row["entailed"] = v.entailed
        row["typical_degree"] = None if v.typical_degree is None else str(v.typical_degree)
    except OracleBudgetExceeded as exc:
        row.update(solved=False, seconds=None, entailed=None, typical_degree=None, error=str(exc))
    return row


def aggregate(rows: Sequence[dict]) -> list[dict]:
    """Per (instance, n, engine, mode): share solved and min/avg/max seconds of solved cells."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r.get("instance"), r.get("size"), r.get("edges"), r.get("n"), r["engine"], r["mode"]),
                          []).append(r)
    table = []
    for (inst, size, edges, n, engine, mode), rs in groups.items():
        times = [r["seconds"] for r in rs if r["solved"]]
        table.append({
            "instance": inst, "size": size, "edges": edges, "n": n, "engine": engine, "mode": mode,
            "runs": len(rs), "solved": len(times), "solved_pct": round(100 * len(times) / len(rs), 1),
            "min": round(min(times), 6) if times else None,
            "avg": round(sum(times) / len(times), 6) if times else None,
            "max": round(max(times), 6) if times else None,
        })
    return table


ROW_FIELDS = ["instance", "size", "edges", "n", "seed", "engine", "mode", "solved", "seconds", "entailed",
              "typical_degree", "error"]
TABLE_FIELDS = ["instance", "size", "edges", "n", "engine", "mode", "runs", "solved", "solved_pct",
                "min", "avg", "max"]


def _write_csv(path: Optional[str], fields: list[str], rows: list[dict]) -> None:
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="", encoding="utf-8")
    try:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_bench(args) -> int:
    spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    timeout = args.timeout or spec.get("timeout") or default_timeout() or BENCH_TIMEOUT
    engines = spec.get("engines", ["solver"])
    modes = [_mode(m) for m in spec.get("modes", ["descending"])]
    cells = [
        {"instance": inst, "engine": e, "mode": m if e == "solver" else "-", "timeout": timeout,
         "backend": args.backend or spec.get("backend")}
        for inst in _bench_instances(spec) for e in engines for m in (modes if e == "solver" else ["-"])
    ]
    workers = args.workers or spec.get("workers", 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(c) for c in cells]
    _write_csv(args.rows, ROW_FIELDS, rows)
    table = aggregate(rows)
    if args.table:
        _write_csv(args.table, TABLE_FIELDS, table)
    else:
        print(file=sys.stderr)
        print(f"{'instance':>16} {'n':>3} {'engine':>7} {'mode':>10} {'solved':>8} {'min':>9} {'avg':>9} {'max':>9}",
              file=sys.stderr)
        for t in table:
            fmt = lambda x: f"{x:9.3f}" if x is not None else f"{'-':>9}"
            print(f"{t['instance']:>16} {t['n']:>3} {t['engine']:>7} {t['mode']:>10} {t['solved_pct']:>7}% "
                  f"{fmt(t['min'])} {fmt(t['avg'])} {fmt(t['max'])}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="phicoherent", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("entail", help="decide the query of a KB file")
    e.add_argument("kb")
    e.add_argument("--query", help="query arguments C,D,THETA,ALPHA in fact syntax (replaces the file's query)")
    e.add_argument("--engine", choices=("solver", "oracle"), default="solver")
    e.add_argument("--mode", choices=MODES + ("sequential",), default="descending")
    e.add_argument("--timeout", type=float, help=f"seconds (default: ${TIMEOUT_ENV} or none)")
    e.add_argument("--backend", choices=("cython", "python"))
    e.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="oracle enumeration budget")
    e.add_argument("--workers", type=int, default=1, help="oracle enumeration processes")
    e.add_argument("--pretty", action="store_true")
    e.set_defaults(func=cmd_entail)

    g = sub.add_parser("gen", help="generate a KB file")
    gs = g.add_subparsers(dest="family", required=True, parser_class=_Parser)
    m = gs.add_parser("maxsat", help="parity reduction of a DIMACS-like clause file")
    m.add_argument("clauses", help="clause file ('-' for stdin)")
    m.add_argument("-o", "--output")
    m.set_defaults(func=cmd_gen)
    n = gs.add_parser("mlp", help="fully connected network KB")
    n.add_argument("--layers", required=True, help="comma separated layer sizes, e.g. 10,20,19,1")
    n.add_argument("--seed", type=int)
    n.add_argument("--n", type=int, default=4)
    n.add_argument("--weight-den", type=int, default=100)
    n.add_argument("--w-min", default="-1")
    n.add_argument("--w-max", default="1")
    n.add_argument("--no-crisp-inputs", action="store_true")
    n.add_argument("-o", "--output")
    n.set_defaults(func=cmd_gen)
    r = gs.add_parser("random", help="random KB with a random query")
    r.add_argument("--seed", type=int)
    r.add_argument("--names", type=int, default=3)
    r.add_argument("--n", type=int, default=2)
    r.add_argument("--wtis", type=int, default=2)
    r.add_argument("--inclusions", type=int, default=1)
    r.add_argument("--assertions", type=int, default=0)
    r.add_argument("--individuals", type=int, default=0)
    r.add_argument("--oracle-sized", action="store_true", help="refuse sizes beyond the oracle budget")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_gen)

    x = sub.add_parser("export", help="write a logic-program encoding")
    x.add_argument("kb")
    x.add_argument("--variant", choices=VARIANTS, default="order-wc")
    x.add_argument("--query", help="query arguments C,D,THETA,ALPHA (replaces the file's query)")
    x.add_argument("-o", "--output")
    x.set_defaults(func=cmd_export)

    b = sub.add_parser("bench", help="run a benchmark spec (JSON)")
    b.add_argument("spec")
    b.add_argument("--rows", help="per-cell CSV (default stdout)")
    b.add_argument("--table", help="aggregate CSV (default: printed to stderr)")
    b.add_argument("--timeout", type=float)
    b.add_argument("--workers", type=int)
    b.add_argument("--backend", choices=("cython", "python"))
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "backend", None) and args.backend not in available_backends():
        print(f"phicoherent: backend {args.backend!r} is not available", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"phicoherent: parse error: {exc}", file=sys.stderr)
    except OracleBudgetExceeded as exc:
        print(f"phicoherent: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (KBError, UsageError, OSError, ValueError) as exc:
        print(f"phicoherent: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
