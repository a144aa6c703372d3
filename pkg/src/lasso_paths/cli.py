"""Command-line entry point: ``lasso-paths <subcommand> ...``.

Exit status is 0 on success, 1 when a solver fails and 2 for usage or
input errors. Results go to files and a one-line summary to stdout;
diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path as FsPath

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .admm import SCISSORS_CONFIG, AdmmConfig, admm_lasso, extract_path, inadmm_lasso
from .dijkstra import shortest_path
from .errors import LassoPathsError
from .experiments import ExperimentSpec, gen_random_graph, run_experiment
from .graph import indicator_vector, load_graph, weighted_incidence
from .lars import lars_path


class UsageError(Exception):
    pass


def _pixel(text: str) -> tuple[int, int]:
    try:
        r, c = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROW,COL, got {text!r}") from None
    return r, c


def _add_query(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True, help="edge list (u v w per line) or JSON")
    p.add_argument("--source", type=int, required=True)
    p.add_argument("--target", type=int, required=True)


def _add_admm(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with AdmmConfig fields")
    p.add_argument("--rho", type=float)
    p.add_argument("--relax", type=float)
    p.add_argument("--lambda-rel", type=float)
    p.add_argument("--tol-primal", type=float)
    p.add_argument("--tol-dual", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--cg-tol", type=float)
    p.add_argument("--cg-max-iter", type=int)
    p.add_argument("--timings", action="store_true",
                   help="record wall-clock times (outputs are then not reproducible byte for byte)")


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", default=".")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lasso-paths",
        description="Shortest paths by Dijkstra, LARS lasso paths, ADMM and inexact ADMM.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("dijkstra", help="exact shortest path")
    _add_query(p)

    p = sub.add_parser("lars", help="lasso solution path by LARS")
    _add_query(p)
    p.add_argument("--trace", help="write the breakpoint CSV here")

    for name in ("admm", "inadmm"):
        p = sub.add_parser(name, help=f"lasso by {'inexact ' if name == 'inadmm' else ''}ADMM")
        _add_query(p)
        _add_admm(p)
        p.add_argument("--trace", help="write the per-iteration CSV here")
        p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("gen-random", help="write a random connected graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--w-min", type=float, default=10.0)
    p.add_argument("--w-max", type=float, default=20.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", required=True, help="edge list file (.json for JSON)")

    p = sub.add_parser("scissors", help="boundary tracing on a PGM image")
    p.add_argument("--image", required=True)
    p.add_argument("--source", type=_pixel, required=True, help="ROW,COL (1-based)")
    p.add_argument("--target", type=_pixel, required=True, help="ROW,COL (1-based)")
    p.add_argument("--solver", choices=("admm", "inadmm", "lars", "dijkstra"), default="inadmm")
    p.add_argument("--threshold", type=float, default=0.5)
    _add_admm(p)
    _add_out(p)

    p = sub.add_parser("bench", help="one solver run on a seeded random graph")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--m", type=int, default=2688)
    p.add_argument("--w-min", type=float, default=10.0)
    p.add_argument("--w-max", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--source", type=int)
    p.add_argument("--target", type=int)
    p.add_argument("--solver", choices=("admm", "inadmm", "lars", "dijkstra"), default="admm")
    p.add_argument("--threshold", type=float, default=0.5)
    _add_admm(p)
    _add_out(p)
    return parser


def _config(args, base: AdmmConfig = AdmmConfig()) -> AdmmConfig:
    overrides = {k: getattr(args, k) for k in
                 ("rho", "relax", "lambda_rel", "tol_primal", "tol_dual", "max_iter",
                  "cg_tol", "cg_max_iter")}
    if args.config:
        try:
            text = FsPath(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        return AdmmConfig.from_json(text, **overrides)
    return base.replace(**{k: v for k, v in overrides.items() if v is not None})


def _query(args):
    g = load_graph(args.graph)
    g.check_vertex(args.source)
    g.check_vertex(args.target)
    if args.source == args.target:
        raise UsageError("source and target must differ")
    return g


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _print_path(length: float, vertices) -> None:
    print(f"length {_fmt(length)}")
    print("path " + " ".join(str(v) for v in vertices))


def _cmd_dijkstra(args) -> int:
    g = _query(args)
    res = shortest_path(g, args.source, args.target)
    _print_path(res.length, res.vertices)
    return 0


def _cmd_lars(args) -> int:
    g = _query(args)
    trace = lars_path(g, args.source, args.target)
    if args.trace:
        FsPath(args.trace).write_text(trace.to_csv())
    _print_path(trace.length, trace.result.vertices)
    print("lambda " + " ".join(f"{lam:.4f}" for lam in trace.lambdas))
    return 0


def _cmd_admm(args) -> int:
    if not 0 < args.threshold < 1:
        raise UsageError("--threshold must lie in (0, 1)")
    cfg = _config(args)
    g = _query(args)
    Q = weighted_incidence(g)
    y = indicator_vector(g.n, args.source, args.target)
    solve = admm_lasso if args.command == "admm" else inadmm_lasso
    state, trace = solve(Q, y, cfg)
    if args.trace:
        FsPath(args.trace).write_text(trace.to_csv(timings=args.timings))
    length = float(np.abs(state.beta).sum())
    print(f"iterations {trace.iterations} ({trace.reason})")
    if not trace.converged:
        print(f"warning: stopped after max_iter={cfg.max_iter} iterations", file=sys.stderr)
    res = extract_path(state.beta, g, args.source, args.target, args.threshold)
    _print_path(length, res.vertices)
    return 0


def _cmd_gen_random(args) -> int:
    g = gen_random_graph(args.n, args.m, args.w_min, args.w_max, seed=args.seed)
    out = FsPath(args.output)
    out.write_text(g.to_json() + "\n" if out.suffix.lower() == ".json" else g.to_text())
    print(f"wrote {g.n} vertices, {g.m} edges to {out}")
    return 0


def _summary_line(summary: dict) -> None:
    print(f"{summary['solver']} length {_fmt(summary['length'])} oracle {_fmt(summary['oracle_length'])} "
          f"gap {summary['rel_gap']:.3e} iterations {summary['iterations']}")


def _cmd_scissors(args) -> int:
    cfg = _config(args, SCISSORS_CONFIG)
    if not FsPath(args.image).is_file():
        raise UsageError(f"no such image: {args.image}")
    spec = ExperimentSpec("image", {"path": args.image}, s=args.source, t=args.target,
                          solver=args.solver, config=cfg, out_dir=args.out_dir,
                          threshold=args.threshold, timings=args.timings)
    _summary_line(run_experiment(spec))
    return 0


def _cmd_bench(args) -> int:
    cfg = _config(args)
    if (args.source is None) != (args.target is None):
        raise UsageError("give both --source and --target or neither")
    spec = ExperimentSpec("random", {"n": args.n, "m": args.m, "w_min": args.w_min,
                                     "w_max": args.w_max},
                          s=args.source, t=args.target, solver=args.solver, config=cfg,
                          out_dir=args.out_dir, seed=args.seed, threshold=args.threshold,
                          timings=args.timings)
    _summary_line(run_experiment(spec))
    return 0


COMMANDS = {
    "dijkstra": _cmd_dijkstra,
    "lars": _cmd_lars,
    "admm": _cmd_admm,
    "inadmm": _cmd_admm,
    "gen-random": _cmd_gen_random,
    "scissors": _cmd_scissors,
    "bench": _cmd_bench,
}


def _threads() -> int:
    raw = os.environ.get("LASSO_PATHS_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"LASSO_PATHS_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"LASSO_PATHS_THREADS must be a positive integer, got {raw!r}")
    return n


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with threadpool_limits(limits=_threads()):
            return COMMANDS[args.command](args)
    except (UsageError, OSError, ValueError) as exc:
        # invalid graphs, configs and generator parameters all derive from ValueError
        print(f"lasso-paths: error: {exc}", file=sys.stderr)
        return 2
    except LassoPathsError as exc:
        print(f"lasso-paths: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

if __name__ == "__main__":
    sys.exit(main())
