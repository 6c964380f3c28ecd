"""Experiment harness: config parsing, trial execution, CSV/JSON reports, certification."""
from __future__ import annotations

import configparser
import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import algorithms as alg
from .instances import (Clustering, SignedCompleteGraph, disagreement_cost, gen_gap_star,
                        gen_planted, gen_single_negative_edge, read_graph)
from .lp import FEAS_TOL, OPT_TOL, FractionalMetric, LpSolution, objective_value, solve_relaxation
from .rng import derive_seed
from .triangles import ScanReport, packing_lower_bound, scan_ratio

REPORT_VERSION = "# cc-report v1"


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------ algorithms

def _run_kwik(g, metric, seed):
    return alg.kwik_cluster(g, seed)


def _run_cgw(g, metric, seed):
    return alg.cgw_round(g, metric, seed)


def _run_cmsy(g, metric, seed):
    return alg.cmsy_round(g, metric, alg.QUADRATIC_FUNCTIONS, seed)


def _run_cmsy_identity(g, metric, seed):
    return alg.cmsy_round(g, metric, alg.RoundingFunctions.identity(), seed)


def _run_bbc(g, metric, seed):
    return alg.bbc_cautious(g, alg.BbcParams(), seed)


def _run_exact(g, metric, seed):
    return alg.exact_opt(g)[0]


# name -> (runner, needs LP metric, randomized)
ALGORITHMS: dict[str, tuple[Callable, bool, bool]] = {
    "kwik": (_run_kwik, False, True),
    "cgw": (_run_cgw, True, True),
    "cmsy": (_run_cmsy, True, True),
    "cmsy-identity": (_run_cmsy_identity, True, True),
    "bbc": (_run_bbc, False, True),
    "exact": (_run_exact, False, False),
}


def run_algorithm(name: str, g: SignedCompleteGraph, metric: FractionalMetric | None, seed) -> Clustering:
    try:
        runner, needs_lp, _ = ALGORITHMS[name]
    except KeyError:
        raise ConfigError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}") from None
    if needs_lp and metric is None:
        metric = solve_relaxation(g).metric
    return runner(g, metric, seed)


# ------------------------------------------------------------ config

GENERATORS = ("planted", "gap_star", "single_negative_edge", "file")


@dataclass(frozen=True)
class InstanceSpec:
    name: str
    generator: str
    params: dict = field(default_factory=dict)

    def build(self) -> tuple[SignedCompleteGraph, Clustering | None]:
        p = self.params
        if self.generator == "planted":
            return gen_planted(int(p["n"]), int(p["k"]), float(p["flip_prob"]), int(p["seed"]))
        if self.generator == "gap_star":
            return gen_gap_star(int(p["n"])), None
        if self.generator == "single_negative_edge":
            return gen_single_negative_edge(int(p["n"])), None
        if self.generator == "file":
            return read_graph(p["path"]), None
        raise ConfigError(f"unknown generator {self.generator!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    instances: tuple[InstanceSpec, ...]
    algorithms: tuple[str, ...]
    trials: int = 1
    seed: int = 0
    feas_tol: float = FEAS_TOL
    opt_tol: float = OPT_TOL
    exact_max_n: int = alg.MAX_EXACT_N
    workers: int = 1
    out_dir: str = "report"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("[run] trials must be >= 1")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ConfigError(f"[run] algorithms: unknown algorithm {name!r}")
        if not self.instances:
            raise ConfigError("config defines no [instance ...] sections")


_REQUIRED = {
    "planted": ("n", "k", "flip_prob", "seed"),
    "gap_star": ("n",),
    "single_negative_edge": ("n",),
    "file": ("path",),
}


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse the INI-style experiment config (see README for the grammar)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    run = cp["run"] if cp.has_section("run") else {}

    def num(section, key, cast, default):
        raw = section.get(key) if section else None
        if raw is None:
            return default
        try:
            return cast(raw)
        except ValueError:
            raise ConfigError(f"[{getattr(section, 'name', 'run')}] {key}: bad value {raw!r}") from None

    algos = tuple(a.strip() for a in run.get("algorithms", "").split(",") if a.strip())
    specs = []
    for sec in cp.sections():
        if not sec.startswith("instance"):
            if sec != "run":
                raise ConfigError(f"unknown section [{sec}]")
            continue
        name = sec[len("instance"):].strip() or f"i{len(specs)}"
        s = cp[sec]
        gen = s.get("generator", "").strip()
        if gen not in GENERATORS:
            raise ConfigError(f"[{sec}] generator: unknown generator {gen!r}")
        params = {k: v.strip() for k, v in s.items() if k not in ("generator", "repeat")}
        missing = [k for k in _REQUIRED[gen] if k not in params]
        if missing:
            raise ConfigError(f"[{sec}] missing keys {missing}")
        if gen == "file" and base_dir is not None and not Path(params["path"]).is_absolute():
            params["path"] = str(base_dir / params["path"])
        repeat = num(s, "repeat", int, 1)
        if repeat < 1:
            raise ConfigError(f"[{sec}] repeat must be >= 1")
        if repeat == 1:
            specs.append(InstanceSpec(name, gen, params))
        else:
            if gen != "planted":
                raise ConfigError(f"[{sec}] repeat is only meaningful for planted instances")
            for r in range(repeat):
                specs.append(InstanceSpec(f"{name}#{r}", gen, {**params, "seed": str(int(params["seed"]) + r)}))
    return ExperimentConfig(
        instances=tuple(specs),
        algorithms=algos,
        trials=num(run, "trials", int, 1),
        seed=num(run, "seed", int, 0),
        feas_tol=num(run, "feas_tol", float, FEAS_TOL),
        opt_tol=num(run, "opt_tol", float, OPT_TOL),
        exact_max_n=num(run, "exact_max_n", int, alg.MAX_EXACT_N),
        workers=num(run, "workers", int, 1),
        out_dir=run.get("out_dir", "report") if run else "report",
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        return parse_config(text, base_dir=path.parent)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ------------------------------------------------------------ running

COLUMNS = ("instance_index", "instance", "n", "lp_value", "packing_bound", "opt", "algorithm",
           "trials", "mean_cost", "std_error", "min_cost", "max_cost", "ratio_vs_lp",
           "ratio_vs_opt", "base_seed")


@dataclass(frozen=True)
class InstanceResult:
    index: int
    name: str
    graph: SignedCompleteGraph = field(repr=False)
    lp: LpSolution = field(repr=False)
    packing: float
    opt: int | None
    truth: Clustering | None = None


@dataclass(frozen=True)
class CellResult:
    instance_index: int
    algorithm: str
    costs: tuple[int, ...]
    clusterings: tuple[Clustering, ...] = field(repr=False, default=())
    seconds: float = 0.0

    @property
    def mean(self) -> float:
        return float(np.mean(self.costs))

    @property
    def std_error(self) -> float:
        if len(self.costs) < 2:
            return 0.0
        return float(np.std(self.costs, ddof=1) / math.sqrt(len(self.costs)))


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    instances: list[InstanceResult]
    cells: list[CellResult]
    timings: dict = field(default_factory=dict)

    def cell(self, instance_index: int, algorithm: str) -> CellResult:
        for c in self.cells:
            if c.instance_index == instance_index and c.algorithm == algorithm:
                return c
        raise KeyError((instance_index, algorithm))

    def rows(self) -> list[dict]:
        out = []
        for c in self.cells:
            inst = self.instances[c.instance_index]
            mean = c.mean
            out.append({
                "instance_index": inst.index,
                "instance": inst.name,
                "n": inst.graph.n,
                "lp_value": inst.lp.value,
                "packing_bound": inst.packing,
                "opt": inst.opt,
                "algorithm": c.algorithm,
                "trials": len(c.costs),
                "mean_cost": mean,
                "std_error": c.std_error,
                "min_cost": min(c.costs),
                "max_cost": max(c.costs),
                "ratio_vs_lp": mean / inst.lp.value if inst.lp.value > 1e-9 else None,
                "ratio_vs_opt": mean / inst.opt if inst.opt else None,
                "base_seed": self.config.seed,
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(REPORT_VERSION + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in self.rows():
            w.writerow(["" if row[k] is None else repr(row[k]) if isinstance(row[k], float) else row[k]
                        for k in COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"version": 1, "columns": list(COLUMNS), "rows": self.rows()},
                          indent=1, sort_keys=False) + "\n"

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / "report.csv", "json": out / "report.json", "timings": out / "timings.json"}
        paths["csv"].write_text(self.to_csv(), encoding="utf-8")
        paths["json"].write_text(self.to_json(), encoding="utf-8")
        paths["timings"].write_text(json.dumps(self.timings, indent=1) + "\n", encoding="utf-8")
        return paths


def parse_csv_report(text: str) -> list[dict]:
    """Read a report CSV back into typed rows (inverse of ``to_csv``)."""
    lines = text.splitlines()
    if not lines or lines[0] != REPORT_VERSION:
        raise ValueError("not a cc-report v1 file")
    ints = {"instance_index", "n", "opt", "trials", "min_cost", "max_cost", "base_seed"}
    floats = {"lp_value", "packing_bound", "mean_cost", "std_error", "ratio_vs_lp", "ratio_vs_opt"}
    rows = []
    for rec in csv.DictReader(lines[1:]):
        row = {}
        for k in COLUMNS:
            v = rec[k]
            if v == "":
                row[k] = None
            elif k in ints:
                row[k] = int(v)
            elif k in floats:
                row[k] = float(v)
            else:
                row[k] = v
        rows.append(row)
    return rows


def _run_cell(args) -> CellResult:
    index, name, g, metric, base_seed, trials, keep = args
    randomized = ALGORITHMS[name][2]
    n_trials = trials if randomized else 1
    costs, kept = [], []
    t0 = time.perf_counter()
    for t in range(n_trials):
        c = run_algorithm(name, g, metric, derive_seed(base_seed, index, name, t))
        costs.append(disagreement_cost(g, c).total)
        if keep:
            kept.append(c)
    return CellResult(index, name, tuple(costs), tuple(kept), time.perf_counter() - t0)


def prepare_instance(index: int, spec: InstanceSpec, config: ExperimentConfig) -> InstanceResult:
    g, truth = spec.build()
    lp = solve_relaxation(g, config.feas_tol, config.opt_tol)
    packing = packing_lower_bound(g).value
    opt = alg.exact_opt(g)[1].total if g.n <= config.exact_max_n else None
    return InstanceResult(index, spec.name, g, lp, packing, opt, truth)


def run(config: ExperimentConfig, keep_clusterings: bool = False) -> ExperimentReport:
    """Execute every (instance, algorithm, trial) cell; results fold in index order."""
    timings: dict = {"instances": {}, "cells": {}}
    instances = []
    for i, spec in enumerate(config.instances):
        t0 = time.perf_counter()
        instances.append(prepare_instance(i, spec, config))
        timings["instances"][spec.name] = time.perf_counter() - t0
    jobs = [(inst.index, name, inst.graph, inst.lp.metric, config.seed, config.trials, keep_clusterings)
            for inst in instances for name in config.algorithms]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            cells = list(pool.map(_run_cell, jobs))
    else:
        cells = [_run_cell(j) for j in jobs]
    cells.sort(key=lambda c: (c.instance_index, config.algorithms.index(c.algorithm)))
    for c in cells:
        timings["cells"][f"{instances[c.instance_index].name}/{c.algorithm}"] = c.seconds
    return ExperimentReport(config, instances, cells, timings)


# ------------------------------------------------------------ certification

def scan_report_text(report: ScanReport) -> str:
    fns = report.fns
    lines = [f"# scan-report rho={report.rho!r} grid_step={report.grid_step!r} "
             f"f_plus={fns.plus_shape} a={fns.a!r} b={fns.b!r}",
             "signature max_difference max_ratio argmax_x argmax_y argmax_z"]
    for s in report.signatures:
        ratio = s.worst_ratio.ratio if s.worst_ratio is not None else float("nan")
        x, y, z = s.worst.lengths
        lines.append(f"{s.signature} {s.worst.difference:.6e} {ratio:.10f} {x:.6f} {y:.6f} {z:.6f}")
    verdict = "PASS" if report.passes() else "FAIL"
    w = report.worst
    lines.append(f"# {verdict}: max difference {report.max_difference:.6e} at {w.signature} "
                 f"(x={w.lengths.x:.6f}, y={w.lengths.y:.6f}, z={w.lengths.z:.6f}); "
                 f"max ratio {report.max_ratio:.10f}")
    return "\n".join(lines) + "\n"


def scan_report_json(report: ScanReport) -> dict:
    def point(p):
        if p is None:
            return None
        return {"signature": str(p.signature), "x": p.lengths.x, "y": p.lengths.y, "z": p.lengths.z,
                "alg": p.alg, "lp": p.lp, "difference": p.difference,
                "ratio": None if math.isnan(p.ratio) else p.ratio}

    return {
        "rho": report.rho, "grid_step": report.grid_step,
        "functions": {"f_plus": report.fns.plus_shape, "a": report.fns.a, "b": report.fns.b},
        "passes": report.passes(), "max_difference": report.max_difference,
        "max_ratio": report.max_ratio,
        "signatures": [{"signature": str(s.signature), "points": s.points,
                        "worst": point(s.worst), "worst_ratio": point(s.worst_ratio)}
                       for s in report.signatures],
    }


def certify(fns: alg.RoundingFunctions, rho: float, grid_step: float = 0.005,
            out_dir=None, refine: bool = True) -> ScanReport:
    report = scan_ratio(fns, rho, grid_step, refine)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "scan-report.txt").write_text(scan_report_text(report), encoding="utf-8")
        (out / "scan-report.json").write_text(json.dumps(scan_report_json(report), indent=1) + "\n",
                                             encoding="utf-8")
    return report


# ------------------------------------------------------------ integrality gap

@dataclass(frozen=True)
class GapDemo:
    n: int
    lp_value: float
    witness_value: float
    opt: int
    opt_source: str  # "exact" or "formula"
    ratio: float
    bound: float

    def text(self) -> str:
        return (f"gap-star n={self.n} ({self.n + 1} vertices)\n"
                f"LP value        {self.lp_value:.10f}\n"
                f"witness value   {self.witness_value:.10f}  (1/2 on positive, 1 on negative edges)\n"
                f"OPT             {self.opt}  ({self.opt_source})\n"
                f"OPT / LP        {self.ratio:.10f}\n"
                f"2 - 2/n         {self.bound:.10f}\n")


def gap_demo(n: int, feas_tol: float = FEAS_TOL, opt_tol: float = OPT_TOL,
             exact_max_n: int = alg.MAX_EXACT_N) -> GapDemo:
    g = gen_gap_star(n)
    lp = solve_relaxation(g, feas_tol, opt_tol)
    witness = np.where(g.positive, 0.5, 1.0)
    np.fill_diagonal(witness, 0.0)
    witness_value = objective_value(g, FractionalMetric(g.n, witness))
    if g.n <= exact_max_n:
        opt, source = alg.exact_opt(g, exact_max_n)[1].total, "exact"
    else:
        # center plus r leaves costs n - r + r(r-1)/2; minimum n - 1 at r in {1, 2}
        opt, source = min(n - r + r * (r - 1) // 2 for r in range(n + 1)), "formula"
    return GapDemo(n, lp.value, witness_value, opt, source, opt / lp.value, 2.0 - 2.0 / n)
