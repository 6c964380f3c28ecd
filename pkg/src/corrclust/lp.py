"""Standard LP relaxation over pairwise lengths, solved by lazy triangle separation.

The master problem starts with the box ``0 <= x_uv <= 1`` only.  Each round
scans every triangle constraint ``x_uw <= x_uv + x_vw``, adds the ``10 n``
most violated ones that are not yet active, and re-solves.  The loop stops
once the worst violation is at most ``feas_tol``.

Master LPs are solved by HiGHS (``backend="highs"``) or by the in-house
dense simplex in :mod:`corrclust.simplex` (``backend="simplex"``, small n).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .instances import Clustering, GraphError, SignedCompleteGraph
from .simplex import bounded_simplex

FEAS_TOL = 1e-7
OPT_TOL = 1e-6


class LpBudgetError(RuntimeError):
    """Separation did not converge within the round/constraint budget."""

    def __init__(self, message: str, primal_value: float, max_violation: float):
        super().__init__(f"{message} (restricted LP value {primal_value:.10g}, "
                         f"max triangle violation {max_violation:.3g})")
        self.primal_value = primal_value
        self.max_violation = max_violation


@dataclass(frozen=True, eq=False)
class FractionalMetric:
    """Symmetric n x n matrix of pairwise lengths; ``x[u, u] = 0`` expected."""

    n: int
    x: np.ndarray = field(repr=False)

    def __post_init__(self):
        x = np.array(self.x, dtype=float, copy=True)
        if x.shape != (self.n, self.n):
            raise ValueError(f"metric has shape {x.shape}, expected ({self.n}, {self.n})")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    def __eq__(self, other):
        if not isinstance(other, FractionalMetric):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.x, other.x))

    __hash__ = None

    @classmethod
    def from_pairs(cls, n: int, values) -> "FractionalMetric":
        """Build from the upper-triangle values in ``combinations(range(n), 2)`` order."""
        x = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        x[iu] = values
        x[iu[1], iu[0]] = values
        return cls(n, x)

    def pair_values(self) -> np.ndarray:
        return self.x[np.triu_indices(self.n, 1)]


@dataclass(frozen=True)
class LpSolution:
    metric: FractionalMetric
    value: float
    iterations: int
    constraints_used: int


@dataclass(frozen=True)
class Violation:
    kind: str  # bounds | symmetry | diagonal | triangle
    magnitude: float
    where: tuple[int, ...]


@dataclass(frozen=True)
class MetricReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "metric valid"
        return "; ".join(f"{v.kind}: {v.magnitude:.3g} at {v.where}" for v in self.violations)


def _worst_triangle(x: np.ndarray) -> tuple[float, tuple[int, int, int]]:
    """Largest x[u,w] - x[u,v] - x[v,w] over distinct u, v, w."""
    n = x.shape[0]
    best, arg = -math.inf, (0, 0, 0)
    if n < 3:
        return 0.0, arg
    for u in range(n):
        viol = x[u][None, :] - x[u][:, None] - x  # [v, w]
        viol[u, :] = -math.inf
        viol[:, u] = -math.inf
        np.fill_diagonal(viol, -math.inf)
        k = int(np.argmax(viol))
        if viol.flat[k] > best:
            best, arg = float(viol.flat[k]), (u, k // n, k % n)
    return best, arg


def verify_metric(m: FractionalMetric, feas_tol: float = FEAS_TOL) -> MetricReport:
    """Report each violated constraint class with its worst magnitude."""
    x = m.x
    out = []
    if m.n == 0:
        return MetricReport(())
    low = -x.min()
    high = x.max() - 1.0
    if max(low, high) > feas_tol:
        k = int(np.argmin(x)) if low >= high else int(np.argmax(x))
        out.append(Violation("bounds", float(max(low, high)), (k // m.n, k % m.n)))
    asym = np.abs(x - x.T)
    if asym.max() > feas_tol:
        k = int(np.argmax(asym))
        out.append(Violation("symmetry", float(asym.max()), (k // m.n, k % m.n)))
    diag = np.abs(np.diag(x))
    if diag.max() > feas_tol:
        out.append(Violation("diagonal", float(diag.max()), (int(np.argmax(diag)),)))
    worst, (u, v, w) = _worst_triangle(x)
    if worst > feas_tol:
        out.append(Violation("triangle", worst, (u, v, w)))
    return MetricReport(tuple(out))


def metric_from_clustering(c: Clustering) -> FractionalMetric:
    lab = np.asarray(c.assignment)
    return FractionalMetric(c.n, (lab[:, None] != lab[None, :]).astype(float))


def objective_value(g: SignedCompleteGraph, m: FractionalMetric) -> float:
    if g.n != m.n:
        raise GraphError(f"graph has {g.n} vertices, metric has {m.n}")
    iu = np.triu_indices(g.n, 1)
    pos = g.positive[iu]
    x = m.x[iu]
    return float(x[pos].sum() + (1.0 - x[~pos]).sum())


# ------------------------------------------------------------ master solver

def solve_bounded_lp(c, rows, b, hi, backend: str = "highs", tol: float = 1e-9) -> np.ndarray:
    """Minimise ``c @ x`` over ``rows @ x <= b``, ``0 <= x <= hi`` (``b >= 0``).

    ``rows`` may be dense or scipy-sparse.  Shared by the relaxation and the
    bad-triangle packing LP.
    """
    c = np.asarray(c, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if backend == "simplex":
        dense = rows.toarray() if sp.issparse(rows) else np.asarray(rows, dtype=float)
        if dense.size == 0:
            dense = np.zeros((0, len(c)))
        return bounded_simplex(c, dense, b, hi).x
    if backend != "highs":
        raise ValueError(f"unknown LP backend {backend!r}")
    has_rows = rows is not None and rows.shape[0] > 0
    res = linprog(
        c,
        A_ub=rows if has_rows else None,
        b_ub=b if has_rows else None,
        bounds=np.column_stack([np.zeros_like(hi), hi]),
        method="highs-ds",
        options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol},
    )
    if res.status != 0:
        raise RuntimeError(f"HiGHS failed: {res.message}")
    return np.clip(res.x, 0.0, hi)


class _Separator:
    """Finds violated triangle constraints, keyed ``(u*n + w)*n + v`` for long edge u < w."""

    def __init__(self, n: int):
        self.n = n
        self.pidx = np.full((n, n), -1, dtype=np.int64)
        iu = np.triu_indices(n, 1)
        self.pidx[iu] = np.arange(len(iu[0]))
        self.pidx[iu[1], iu[0]] = np.arange(len(iu[0]))

    def scan(self, x: np.ndarray, feas_tol: float):
        """Return (keys, violations) of all constraints violated by more than feas_tol."""
        n = self.n
        keys, viols = [], []
        for u in range(n - 1):
            viol = x[u][None, :] - x[u][:, None] - x  # [v, w]
            viol[:, : u + 1] = -math.inf  # keep w > u
            viol[u, :] = -math.inf
            np.fill_diagonal(viol, -math.inf)
            vs, ws = np.nonzero(viol > feas_tol)
            if len(vs):
                keys.append((u * n + ws) * n + vs)
                viols.append(viol[vs, ws])
        if not keys:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        return np.concatenate(keys), np.concatenate(viols)

    def rows(self, keys: np.ndarray) -> sp.csr_matrix:
        n = self.n
        v = keys % n
        uw = keys // n
        u, w = uw // n, uw % n
        m = len(keys)
        r = np.repeat(np.arange(m), 3)
        cols = np.column_stack([self.pidx[u, w], self.pidx[u, v], self.pidx[v, w]]).ravel()
        data = np.tile([1.0, -1.0, -1.0], m)
        return sp.csr_matrix((data, (r, cols)), shape=(m, n * (n - 1) // 2))


def solve_relaxation(
    g: SignedCompleteGraph,
    feas_tol: float = FEAS_TOL,
    opt_tol: float = OPT_TOL,
    *,
    backend: str = "highs",
    batch: int | None = None,
    max_rounds: int = 500,
    max_constraints: int = 5_000_000,
    on_round=None,
) -> LpSolution:
    """Solve the standard relaxation of ``g`` to optimality by cutting planes.

    ``on_round(round, active_rows, max_violation)`` is called after every
    master solve, if given.
    """
    if feas_tol <= 0 or opt_tol <= 0:
        raise ValueError("tolerances must be positive")
    n = g.n
    npairs = n * (n - 1) // 2
    iu = np.triu_indices(n, 1)
    pos = g.positive[iu]
    c = np.where(pos, 1.0, -1.0)
    const = float(np.count_nonzero(~pos))
    if npairs == 0:
        return LpSolution(FractionalMetric(n, np.zeros((n, n))), 0.0, 0, 0)

    sep = _Separator(n)
    batch = batch or 10 * n
    solver_tol = min(opt_tol, feas_tol) * 1e-2
    active_keys: set[int] = set()
    A = sp.csr_matrix((0, npairs))
    hi = np.ones(npairs)
    rounds = 0
    while True:
        xs = solve_bounded_lp(c, A, np.zeros(A.shape[0]), hi, backend, tol=solver_tol)
        rounds += 1
        metric = FractionalMetric.from_pairs(n, xs)
        keys, viols = sep.scan(metric.x, feas_tol)
        if on_round is not None:
            on_round(rounds, len(active_keys), float(viols.max()) if len(viols) else 0.0)
        if len(keys) == 0:
            break
        fresh = np.fromiter((k not in active_keys for k in keys.tolist()), bool, len(keys))
        keys, viols = keys[fresh], viols[fresh]
        value = float(c @ xs) + const
        if len(keys) == 0:
            raise LpBudgetError("separation stalled on already-active constraints",
                                value, _worst_triangle(metric.x)[0])
        if rounds >= max_rounds or len(active_keys) + min(batch, len(keys)) > max_constraints:
            raise LpBudgetError(f"budget exhausted after {rounds} rounds, {len(active_keys)} rows",
                                value, float(viols.max()))
        order = np.lexsort((keys, -viols))[:batch]
        chosen = keys[order]
        active_keys.update(chosen.tolist())
        A = sp.vstack([A, sep.rows(chosen)], format="csr")

    value = float(c @ xs) + const
    return LpSolution(metric, value, rounds, len(active_keys))


# ------------------------------------------------------------ metric files

def write_metric(m: FractionalMetric, path) -> None:
    rows = [f"cc-metric {m.n}"]
    for u in range(m.n):
        for v in range(u + 1, m.n):
            rows.append(f"{u} {v} {format(float(m.x[u, v]), '.17g')}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_metric(path) -> FractionalMetric:
    lines = [(i, ln.strip()) for i, ln in
             enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1) if ln.strip()]
    if not lines or lines[0][1].split()[0] != "cc-metric":
        raise GraphError(f"{path}: expected header 'cc-metric <n>'")
    n = int(lines[0][1].split()[1])
    x = np.zeros((n, n))
    seen = set()
    for lineno, line in lines[1:]:
        parts = line.split()
        if len(parts) != 3:
            raise GraphError(f"{path}:{lineno}: expected '<u> <v> <x_uv>'")
        u, v, val = int(parts[0]), int(parts[1]), float(parts[2])
        if not 0 <= u < v < n:
            raise GraphError(f"{path}:{lineno}: pair {u} {v} must satisfy 0 <= u < v < {n}")
        if (u, v) in seen:
            raise GraphError(f"{path}:{lineno}: duplicate pair {{{u},{v}}}")
        seen.add((u, v))
        x[u, v] = x[v, u] = val
    if len(seen) != n * (n - 1) // 2:
        raise GraphError(f"{path}: metric is missing {n * (n - 1) // 2 - len(seen)} pairs")
    return FractionalMetric(n, x)
