"""Per-triangle analysis of the LP rounder and bad-triangle lower bounds.

A triangle (u, v, w) carries signs ``(s_vw, s_uw, s_uv)`` and lengths
``x = x_vw, y = x_uw, z = x_uv``.  For a pivot, ``pivot_cost`` is the
probability that the opposite edge ends in disagreement after one rounding
step and ``pivot_lp`` the LP weight that step removes.  Summing over the three
pivots gives ``alg_sigma`` / ``lp_sigma``; if ``alg_sigma <= rho * lp_sigma``
holds for every signature and every metric triple, the rounder is a
rho-approximation in expectation.  ``scan_ratio`` checks that on a grid.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .algorithms import RoundingFunctions
from .instances import SignedCompleteGraph, enumerate_bad_triangles
from .lp import FEAS_TOL, FractionalMetric, solve_bounded_lp


class TriangleSignature(NamedTuple):
    sigma_vw: str
    sigma_uw: str
    sigma_uv: str

    def __str__(self):
        return f"({self.sigma_vw}{self.sigma_uw}{self.sigma_uv})"

    @classmethod
    def parse(cls, text: str) -> "TriangleSignature":
        signs = [ch for ch in text if ch in "+-"]
        if len(signs) != 3:
            raise ValueError(f"signature needs three signs, got {text!r}")
        return cls(*signs)


ALL_SIGNATURES = tuple(TriangleSignature(*s) for s in itertools.product("+-", repeat=3))


class TriangleLengths(NamedTuple):
    x: float  # x_vw
    y: float  # x_uw
    z: float  # x_uv

    def is_metric(self, tol: float = 1e-12) -> bool:
        x, y, z = self
        in_box = all(-tol <= t <= 1 + tol for t in self)
        return in_box and x <= y + z + tol and y <= x + z + tol and z <= x + y + tol


def _f(sign: str, value, fns: RoundingFunctions):
    return fns.plus(value) if sign == "+" else fns.minus(value)


def _pivot_view(sig: TriangleSignature, lengths, pivot: str):
    """(sign, length) of the opposite edge and of the two pivot edges."""
    x, y, z = lengths
    s_vw, s_uw, s_uv = sig
    if pivot == "w":
        return (s_uv, z), (s_uw, y), (s_vw, x)
    if pivot == "v":
        return (s_uw, y), (s_uv, z), (s_vw, x)
    if pivot == "u":
        return (s_vw, x), (s_uv, z), (s_uw, y)
    raise ValueError(f"pivot must be 'u', 'v' or 'w', got {pivot!r}")


def pivot_cost(sig: TriangleSignature, lengths, pivot: str, fns: RoundingFunctions):
    """Probability the edge opposite ``pivot`` is a mistake after one step.

    Works elementwise when the lengths are numpy arrays.
    """
    (s_e, _), (s1, l1), (s2, l2) = _pivot_view(sig, lengths, pivot)
    f1, f2 = _f(s1, l1, fns), _f(s2, l2, fns)
    if s_e == "+":
        return f1 + f2 - 2.0 * f1 * f2
    return (1.0 - f1) * (1.0 - f2)


def pivot_lp(sig: TriangleSignature, lengths, pivot: str, fns: RoundingFunctions):
    """LP weight of the edge opposite ``pivot`` times P(an endpoint joins)."""
    (s_e, le), (s1, l1), (s2, l2) = _pivot_view(sig, lengths, pivot)
    touched = 1.0 - _f(s1, l1, fns) * _f(s2, l2, fns)
    weight = le if s_e == "+" else 1.0 - np.asarray(le, dtype=float)
    return weight * touched


def alg_sigma(sig, lengths, fns):
    return sum(pivot_cost(sig, lengths, p, fns) for p in "wvu")


def lp_sigma(sig, lengths, fns):
    return sum(pivot_lp(sig, lengths, p, fns) for p in "wvu")


# ------------------------------------------------------------- grid scan

@dataclass(frozen=True)
class ScanPoint:
    signature: TriangleSignature
    lengths: TriangleLengths
    alg: float
    lp: float
    difference: float  # alg - rho * lp

    @property
    def ratio(self) -> float:
        return self.alg / self.lp if self.lp > RATIO_LP_FLOOR else float("nan")


RATIO_LP_FLOOR = 1e-9


@dataclass(frozen=True)
class SignatureScan:
    signature: TriangleSignature
    worst: ScanPoint  # max difference, after refinement
    worst_ratio: ScanPoint | None  # max ratio among points with lp > RATIO_LP_FLOOR
    points: int


@dataclass(frozen=True)
class ScanReport:
    rho: float
    grid_step: float
    fns: RoundingFunctions
    signatures: tuple[SignatureScan, ...] = field(repr=False)

    @property
    def worst(self) -> ScanPoint:
        return max((s.worst for s in self.signatures), key=_order_key)

    @property
    def max_difference(self) -> float:
        return self.worst.difference

    @property
    def max_ratio(self) -> float:
        vals = [s.worst_ratio.ratio for s in self.signatures if s.worst_ratio is not None]
        return max(vals) if vals else float("nan")

    def passes(self, tol: float = 1e-9) -> bool:
        return self.max_difference <= tol


def _order_key(p: ScanPoint):
    # larger difference wins; ties go to the lexicographically least (sigma, x, y, z)
    return (p.difference, tuple(-ord(ch) for ch in p.signature), tuple(-t for t in p.lengths))


def _metric_triples(xs: np.ndarray, ys: np.ndarray, zs: np.ndarray, tol: float = 1e-12):
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    X, Y, Z = X.ravel(), Y.ravel(), Z.ravel()
    ok = (X <= Y + Z + tol) & (Y <= X + Z + tol) & (Z <= X + Y + tol)
    return X[ok], Y[ok], Z[ok]


def _best(sig, X, Y, Z, fns, rho):
    alg = alg_sigma(sig, (X, Y, Z), fns)
    lp = lp_sigma(sig, (X, Y, Z), fns)
    diff = alg - rho * lp
    # deterministic argmax: first index in lexicographic (x, y, z) order
    order = np.lexsort((Z, Y, X))
    i = order[np.argmax(diff[order])]
    worst = ScanPoint(sig, TriangleLengths(float(X[i]), float(Y[i]), float(Z[i])),
                      float(alg[i]), float(lp[i]), float(diff[i]))
    ratio_pt = None
    keep = lp > RATIO_LP_FLOOR
    if keep.any():
        ratio = np.full(len(lp), -np.inf)
        ratio[keep] = alg[keep] / lp[keep]
        j = order[np.argmax(ratio[order])]
        ratio_pt = ScanPoint(sig, TriangleLengths(float(X[j]), float(Y[j]), float(Z[j])),
                             float(alg[j]), float(lp[j]), float(diff[j]))
    return worst, ratio_pt, len(X)


def _better_ratio(a: ScanPoint | None, b: ScanPoint | None):
    if a is None:
        return b
    if b is None:
        return a
    return b if b.ratio > a.ratio else a


def scan_signature(sig: TriangleSignature, fns: RoundingFunctions, rho: float,
                   grid_step: float = 0.005, refine: bool = True) -> SignatureScan:
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    k = int(round(1.0 / grid_step))
    if abs(k * grid_step - 1.0) < 1e-12:
        axis = np.round(np.arange(k + 1) * grid_step, 12)
    else:
        axis = np.append(np.round(np.arange(int(1.0 / grid_step) + 1) * grid_step, 12), 1.0)
        axis = np.unique(axis[axis <= 1.0])
    worst, ratio_pt, count = None, None, 0
    for xv in axis:  # chunk over x to bound memory
        X, Y, Z = _metric_triples(np.array([xv]), axis, axis)
        if not len(X):
            continue
        w, r, c = _best(sig, X, Y, Z, fns, rho)
        count += c
        if worst is None or _order_key(w) > _order_key(worst):
            worst = w
        ratio_pt = _better_ratio(ratio_pt, r)
    if refine:
        fine = grid_step / 10.0
        offsets = fine * np.arange(-10, 11)
        local = [np.clip(np.round(t + offsets, 12), 0.0, 1.0) for t in worst.lengths]
        X, Y, Z = _metric_triples(*(np.unique(a) for a in local))
        if len(X):
            w, r, c = _best(sig, X, Y, Z, fns, rho)
            count += c
            if _order_key(w) > _order_key(worst):
                worst = w
            ratio_pt = _better_ratio(ratio_pt, r)
    return SignatureScan(sig, worst, ratio_pt, count)


def scan_ratio(fns: RoundingFunctions, rho: float, grid_step: float = 0.005,
               refine: bool = True) -> ScanReport:
    """Exhaustive grid check of ``alg_sigma <= rho * lp_sigma`` over all 8 signatures."""
    scans = tuple(scan_signature(s, fns, rho, grid_step, refine) for s in ALL_SIGNATURES)
    return ScanReport(rho, grid_step, fns, scans)


# ------------------------------------------------------------- packing bound

@dataclass(frozen=True)
class PackingBound:
    value: float
    triangle_weights: dict = field(repr=False)


def packing_lower_bound(g: SignedCompleteGraph, backend: str = "highs") -> PackingBound:
    """Maximum fractional packing of bad triangles (a lower bound on OPT)."""
    tris = enumerate_bad_triangles(g)
    if not tris:
        return PackingBound(0.0, {})
    n = g.n
    pidx = {}
    for e, (u, v) in enumerate(itertools.combinations(range(n), 2)):
        pidx[(u, v)] = e
    rows, cols = [], []
    for t, (a, b, c) in enumerate(tris):
        for e in ((a, b), (a, c), (b, c)):
            rows.append(pidx[e])
            cols.append(t)
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(pidx), len(tris)))
    used = np.flatnonzero(np.diff(A.indptr) > 0)
    A = A[used]
    r = solve_bounded_lp(-np.ones(len(tris)), A, np.ones(A.shape[0]), np.ones(len(tris)), backend)
    return PackingBound(float(r.sum()), {t: float(w) for t, w in zip(tris, r) if w > 0})


def packing_is_valid(pb: PackingBound, n: int, feas_tol: float = FEAS_TOL) -> bool:
    load: dict = {}
    for (a, b, c), w in pb.triangle_weights.items():
        if not -feas_tol <= w <= 1 + feas_tol:
            return False
        for e in ((a, b), (a, c), (b, c)):
            load[e] = load.get(e, 0.0) + w
    return all(v <= 1 + feas_tol for v in load.values())


# ------------------------------------------------------------- exact expectations

KWIK_ORACLE_MAX_N = 6
CMSY_ORACLE_MAX_N = 4


def _step_cost(pos, active: frozenset, cluster: frozenset) -> int:
    """Mistakes fixed when ``cluster`` is cut out of ``active``."""
    cost = 0
    for a in cluster:
        for b in active:
            if b == a:
                continue
            if b in cluster:
                if a < b and not pos[a][b]:
                    cost += 1
            elif pos[a][b]:
                cost += 1
    return cost


def kwik_expected_cost(g: SignedCompleteGraph, max_n: int = KWIK_ORACLE_MAX_N) -> Fraction:
    """Exact expected cost of the random-pivot algorithm by enumerating pivot sequences."""
    if g.n > max_n:
        raise ValueError(f"kwik oracle refused for n={g.n} > {max_n}")
    pos = g.pos_rows

    @lru_cache(maxsize=None)
    def expect(active: frozenset) -> Fraction:
        if not active:
            return Fraction(0)
        total = Fraction(0)
        for p in active:
            cluster = frozenset(v for v in active if pos[p][v])
            total += _step_cost(pos, active, cluster) + expect(active - cluster)
        return total / len(active)

    return expect(frozenset(range(g.n)))


def cmsy_expected_cost(g: SignedCompleteGraph, m: FractionalMetric, fns: RoundingFunctions,
                       max_n: int = CMSY_ORACLE_MAX_N) -> float:
    """Exact expected cost of the LP rounder over pivots and all join outcomes."""
    if g.n > max_n:
        raise ValueError(f"cmsy oracle refused for n={g.n} > {max_n}")
    pos = g.pos_rows
    x = np.clip(m.x, 0.0, 1.0)
    stay_out = np.where(g.positive, fns.plus(x), fns.minus(x))

    @lru_cache(maxsize=None)
    def expect(active: frozenset) -> float:
        if not active:
            return 0.0
        total = 0.0
        for p in sorted(active):
            others = sorted(active - {p})
            for outcome in itertools.product((False, True), repeat=len(others)):
                prob = 1.0
                for v, joins in zip(others, outcome):
                    q = stay_out[p, v]
                    prob *= (1.0 - q) if joins else q
                if prob == 0.0:
                    continue
                cluster = frozenset([p] + [v for v, j in zip(others, outcome) if j])
                total += prob * (_step_cost(pos, active, cluster) + expect(active - cluster))
        return total / len(active)

    return expect(frozenset(range(g.n)))


def expectation_oracle_small(g: SignedCompleteGraph, algorithm: str,
                             metric: FractionalMetric | None = None,
                             fns: RoundingFunctions | None = None) -> float:
    """Exact expected cost for ``"kwik"`` (n <= 6) or ``"cmsy"`` (n <= 4)."""
    if algorithm == "kwik":
        return float(kwik_expected_cost(g))
    if algorithm == "cmsy":
        if metric is None:
            raise ValueError("the cmsy oracle needs an LP metric")
        return cmsy_expected_cost(g, metric, fns or RoundingFunctions())
    raise ValueError(f"no expectation oracle for algorithm {algorithm!r}")
