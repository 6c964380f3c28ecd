"""``corrclust`` command line.

Exit codes: 0 success, 1 usage/input error, 2 LP infeasibility or budget
error, 3 certification violation found.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import algorithms as alg
from .bench import ALGORITHMS, ConfigError, certify, gap_demo, load_config, run, run_algorithm, scan_report_text
from .instances import (GraphError, disagreement_cost, gen_gap_star, gen_planted,
                        gen_single_negative_edge, read_graph, write_clustering, write_graph)
from .lp import FEAS_TOL, OPT_TOL, LpBudgetError, read_metric, solve_relaxation, write_metric

EXIT_USAGE, EXIT_INFEASIBLE, EXIT_VIOLATION = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _tolerances(p):
    p.add_argument("--feas-tol", type=float, default=FEAS_TOL)
    p.add_argument("--opt-tol", type=float, default=OPT_TOL)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="corrclust", description="Correlation clustering solvers and benchmarks")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate an instance file")
    p.add_argument("generator", choices=["planted", "gap-star", "single-negative-edge"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--flip-prob", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="graph file to write")
    p.add_argument("--truth", help="also write the planted clustering here")

    p = sub.add_parser("solve-lp", help="solve the LP relaxation of a graph file")
    p.add_argument("graph")
    p.add_argument("--out", help="metric file to write")
    p.add_argument("--backend", choices=["highs", "simplex"], default="highs")
    _tolerances(p)

    p = sub.add_parser("cluster", help="run one algorithm on a graph file")
    p.add_argument("algorithm", choices=sorted(ALGORITHMS))
    p.add_argument("graph")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metric", help="LP metric file (solved on the fly if omitted)")
    p.add_argument("--out", help="clustering file to write")
    _tolerances(p)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides [run] out_dir)")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--feas-tol", type=float)
    p.add_argument("--opt-tol", type=float)

    p = sub.add_parser("certify", help="grid-certify the per-triangle ratio condition")
    p.add_argument("--fns", choices=["quadratic", "identity"], default="quadratic")
    p.add_argument("--a", type=float, default=0.19)
    p.add_argument("--b", type=float, default=0.5095)
    p.add_argument("--rho", type=float, default=2.06)
    p.add_argument("--grid-step", type=float, default=0.005)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--out", help="directory for scan-report.txt / scan-report.json")

    p = sub.add_parser("gap-demo", help="integrality gap on the star instance")
    p.add_argument("n", type=int)
    p.add_argument("--out", help="directory for gap-demo.txt")
    _tolerances(p)

    p = sub.add_parser("exact", help="brute-force optimum of a small graph file")
    p.add_argument("graph")
    p.add_argument("--max-n", type=int, default=alg.MAX_EXACT_N)
    p.add_argument("--out", help="clustering file to write")
    return parser


def _cmd_gen(args):
    if args.generator == "planted":
        g, truth = gen_planted(args.n, args.k, args.flip_prob, args.seed)
        if args.truth:
            write_clustering(truth, args.truth)
    elif args.generator == "gap-star":
        g = gen_gap_star(args.n)
    else:
        g = gen_single_negative_edge(args.n)
    write_graph(g, args.out)
    print(f"wrote {args.out}: n={g.n}, positive={g.num_positive}, negative={g.num_negative}")
    return 0


def _cmd_solve_lp(args):
    g = read_graph(args.graph)
    sol = solve_relaxation(g, args.feas_tol, args.opt_tol, backend=args.backend)
    if args.out:
        write_metric(sol.metric, args.out)
    print(f"lp_value {sol.value!r}")
    print(f"rounds {sol.iterations}")
    print(f"constraints {sol.constraints_used}")
    return 0


def _cmd_cluster(args):
    g = read_graph(args.graph)
    metric = None
    if ALGORITHMS[args.algorithm][1]:
        if args.metric:
            metric = read_metric(args.metric)
        else:
            metric = solve_relaxation(g, args.feas_tol, args.opt_tol).metric
    c = run_algorithm(args.algorithm, g, metric, args.seed)
    cost = disagreement_cost(g, c)
    if args.out:
        write_clustering(c, args.out)
    print(f"{args.algorithm}: k={c.k} cost={cost.total} "
          f"(positive {cost.positive_mistakes}, negative {cost.negative_mistakes})")
    return 0


def _cmd_run(args):
    cfg = load_config(args.config)
    overrides = {k: v for k, v in (("seed", args.seed), ("trials", args.trials), ("workers", args.workers),
                                   ("feas_tol", args.feas_tol), ("opt_tol", args.opt_tol)) if v is not None}
    if overrides:
        cfg = replace(cfg, **overrides)
    report = run(cfg)
    out = args.out or cfg.out_dir
    paths = report.write(out)
    sys.stdout.write(report.to_csv())
    print(f"# wrote {paths['csv']} and {paths['json']}", file=sys.stderr)
    return 0


def _cmd_certify(args):
    if args.fns == "identity":
        fns = alg.RoundingFunctions.identity()
    else:
        fns = alg.RoundingFunctions(args.a, args.b)
    report = certify(fns, args.rho, args.grid_step, args.out, refine=not args.no_refine)
    sys.stdout.write(scan_report_text(report))
    return 0 if report.passes() else EXIT_VIOLATION


def _cmd_gap_demo(args):
    demo = gap_demo(args.n, args.feas_tol, args.opt_tol)
    text = demo.text()
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "gap-demo.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def _cmd_exact(args):
    g = read_graph(args.graph)
    c, cost = alg.exact_opt(g, args.max_n)
    if args.out:
        write_clustering(c, args.out)
    print(f"opt {cost.total} (positive {cost.positive_mistakes}, negative {cost.negative_mistakes})")
    print("assignment " + " ".join(map(str, c.assignment)))
    return 0


COMMANDS = {
    "gen": _cmd_gen, "solve-lp": _cmd_solve_lp, "cluster": _cmd_cluster, "run": _cmd_run,
    "certify": _cmd_certify, "gap-demo": _cmd_gap_demo, "exact": _cmd_exact,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.verb](args)
    except (LpBudgetError, alg.InfeasibleMetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (GraphError, ConfigError, alg.InstanceTooLargeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
