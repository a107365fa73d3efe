"""Experiment driver: generate graphs, run algorithms against the oracle,
sweep parameter grids, and emit CSV/JSON records.

Exit codes: 0 success, 2 verification mismatch, 3 engine error, 4 bad input.
The environment variable SLEEPMST_MAX_ROUNDS overrides the engine round cap.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
import warnings
from dataclasses import dataclass

from . import engine, graph, metrics as metrics_mod
from .graph import GraphError, WeightedGraph, mst_oracle
from .mst_deterministic import run_deterministic_mst
from .mst_randomized import run_randomized_mst
from .mst_tradeoff import run_tradeoff_mst

EXIT_OK = 0
EXIT_MISMATCH = 2
EXIT_ENGINE = 3
EXIT_BAD_INPUT = 4


@dataclass
class ExperimentRecord:
    """One run: generator parameters, measured metrics, and the oracle verdict
    (recomputed here from the run's edge set, never trusted from the run)."""

    run_id: str
    algo: str
    g: WeightedGraph
    D: int | None
    k: int | None
    seed: object
    metrics: object
    edge_set: frozenset
    wall_seconds: float

    @property
    def oracle_match(self) -> bool:
        return self.edge_set == mst_oracle(self.g)

    def as_mapping(self) -> dict:
        rec = metrics_mod.record_from(
            self.metrics, run_id=self.run_id, algo=self.algo, n=self.g.n,
            m=self.g.m, N=self.g.N, D=self.D, k=self.k, seed=self.seed,
            oracle_match=self.oracle_match)
        rec["wall_seconds"] = round(self.wall_seconds, 3)
        return rec


def env_max_rounds() -> int | None:
    raw = os.environ.get("SLEEPMST_MAX_ROUNDS")
    return int(raw) if raw else None


def make_graph(args) -> WeightedGraph:
    if getattr(args, "graph", None):
        return graph.read_graph(args.graph)
    family = args.family
    if family == "random":
        return graph.gen_random_connected(args.n, args.avg_degree, args.seed)
    if family == "ring":
        return graph.gen_ring(args.n, args.seed)
    if family == "path":
        return graph.gen_path(args.n, args.seed)
    if family == "grc":
        return graph.gen_grc(args.rows, args.cols, args.seed)
    raise GraphError(f"unknown family {family!r}")


def run_algo(g: WeightedGraph, algo: str, *, seed, k=None, le_mode="oracle",
             budget=None, trace=None, max_rounds=None):
    if algo == "rand":
        run = run_randomized_mst(g, seed, trace=trace, max_rounds=max_rounds)
    elif algo == "det":
        run = run_deterministic_mst(g, trace=trace, max_rounds=max_rounds)
    elif algo == "tradeoff":
        if k is None:
            raise GraphError("tradeoff requires --k")
        run = run_tradeoff_mst(g, k, mode=le_mode, seed=seed, budget=budget,
                               trace=trace, max_rounds=max_rounds)
    else:
        raise GraphError(f"unknown algorithm {algo!r}")
    return run


def cmd_gen(args) -> int:
    g = make_graph(args)
    graph.write_graph(g, args.out)
    print(f"wrote {args.out}: n={g.n} m={g.m} N={g.N}")
    return EXIT_OK


def cmd_run(args) -> int:
    g = make_graph(args)
    trace_fh = open(args.trace, "w") if args.trace else None
    try:
        t0 = time.time()
        run = run_algo(g, args.algo, seed=args.seed, k=args.k,
                       le_mode=args.le_mode, budget=args.budget,
                       trace=trace_fh, max_rounds=env_max_rounds())
        wall = time.time() - t0
    finally:
        if trace_fh:
            trace_fh.close()
    rec = ExperimentRecord(
        run_id=f"{args.algo}-{args.seed}", algo=args.algo, g=g,
        D=graph.diameter(g), k=args.k, seed=args.seed, metrics=run.metrics,
        edge_set=run.edge_set, wall_seconds=wall)
    out = rec.as_mapping()
    if args.format == "csv":
        print(metrics_mod.csv_header())
        print(metrics_mod.export(out, "csv"))
    else:
        print(metrics_mod.export(out, "json"))
    return EXIT_OK if rec.oracle_match else EXIT_MISMATCH


def parse_sweep_spec(path) -> dict:
    """Flat key-value sweep file: `key = value` lines, '#' comments."""
    spec: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise GraphError(f"bad sweep line: {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            spec[key] = value
    return spec


def _int_list(raw: str) -> list[int]:
    return [int(tok) for tok in raw.split(",") if tok.strip()]


def cmd_sweep(args) -> int:
    spec = parse_sweep_spec(args.spec)
    algo = spec.get("algo", "rand")
    family = spec.get("family", "random")
    ns = _int_list(spec.get("n", "16"))
    ks = _int_list(spec["k"]) if algo == "tradeoff" else [None]
    trials = int(spec.get("trials", "1"))
    base_seed = spec.get("seed", "0")
    avg_degree = float(spec.get("avg_degree", "4"))
    le_mode = spec.get("le_mode", "oracle")

    out = open(args.out, "w") if args.out else sys.stdout
    failures = 0
    try:
        print(metrics_mod.csv_header(), file=out, flush=True)
        run_id = 0
        for n in ns:
            for k in ks:
                for t in range(trials):
                    seed = f"{base_seed}:{n}:{k}:{t}"
                    gen_args = argparse.Namespace(
                        graph=None, family=family, n=n, seed=seed,
                        avg_degree=avg_degree, rows=4, cols=max(4, n // 4))
                    row_id = f"{run_id:05d}"
                    run_id += 1
                    try:
                        g = make_graph(gen_args)
                        t0 = time.time()
                        run = run_algo(g, algo, seed=seed, k=k,
                                       le_mode=le_mode,
                                       max_rounds=env_max_rounds())
                        rec = ExperimentRecord(
                            run_id=row_id, algo=algo, g=g,
                            D=graph.diameter(g), k=k, seed=seed,
                            metrics=run.metrics, edge_set=run.edge_set,
                            wall_seconds=time.time() - t0)
                        print(metrics_mod.export(rec.as_mapping(), "csv"),
                              file=out, flush=True)
                        if not rec.oracle_match:
                            failures += 1
                    except engine.EngineError as exc:
                        failures += 1
                        # failure marker row: partial results stay usable
                        print(f"{row_id},{algo},{n},,,,{k},{seed},,,,,,,error",
                              file=out, flush=True)
                        print(f"run {row_id} failed: {exc}", file=sys.stderr)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK if failures == 0 else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sleepmst",
        description="Sleeping-model distributed MST experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_generator_flags(p):
        p.add_argument("--graph", help="read a graph file instead of generating")
        p.add_argument("--family", default="random",
                       choices=["random", "ring", "path", "grc"])
        p.add_argument("--n", type=int, default=16)
        p.add_argument("--avg-degree", dest="avg_degree", type=float, default=4)
        p.add_argument("--rows", type=int, default=4, help="grc rows")
        p.add_argument("--cols", type=int, default=32, help="grc columns")
        p.add_argument("--seed", default="0")

    g = sub.add_parser("gen", help="generate a graph file")
    add_generator_flags(g)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen)

    r = sub.add_parser("run", help="run one algorithm and verify it")
    add_generator_flags(r)
    r.add_argument("--algo", required=True, choices=["rand", "det", "tradeoff"])
    r.add_argument("--k", type=int)
    r.add_argument("--le-mode", dest="le_mode", default="oracle",
                   choices=["oracle", "flood"])
    r.add_argument("--budget", type=int)
    r.add_argument("--format", default="json", choices=["json", "csv"])
    r.add_argument("--trace", help="write a JSON-lines awake trace here")
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("sweep", help="run a parameter sweep from a spec file")
    s.add_argument("spec")
    s.add_argument("--out", help="CSV output path (default: stdout)")
    s.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            return args.fn(args)
    except (GraphError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except engine.EngineError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    raise SystemExit(main())
