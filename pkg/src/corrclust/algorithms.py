"""Pivot-based clustering algorithms, the BBC cleaning procedures and an exact oracle.

All algorithms take the instance (and an LP metric where they round one)
plus a seed; the seed fixes every pivot choice and join coin, so equal
inputs give equal clusterings.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .instances import Clustering, CostBreakdown, GraphError, SignedCompleteGraph, disagreement_cost
from .lp import FEAS_TOL, FractionalMetric, verify_metric
from .rng import make_rng


class InfeasibleMetricError(ValueError):
    pass


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class RoundingFunctions:
    """Non-join probabilities for the LP rounder.

    ``f_plus`` is 0 below ``a``, ``((x - a) / (b - a))**2`` on ``[a, b]`` and 1
    above ``b``; ``plus_shape="identity"`` replaces it by ``f_plus(x) = x``.
    ``f_minus`` is always the identity.
    """

    a: float = 0.19
    b: float = 0.5095
    plus_shape: str = "quadratic"
    f_minus_identity: bool = True

    def __post_init__(self):
        if not 0.0 <= self.a < self.b <= 1.0:
            raise ValueError(f"need 0 <= a < b <= 1, got a={self.a}, b={self.b}")
        if self.plus_shape not in ("quadratic", "identity"):
            raise ValueError(f"unknown f+ shape {self.plus_shape!r}")
        if not self.f_minus_identity:
            raise ValueError("only the identity f- is supported")

    @classmethod
    def identity(cls) -> "RoundingFunctions":
        return cls(0.0, 1.0, "identity")

    def plus(self, x):
        """Vectorised f+ without range checks."""
        x = np.asarray(x, dtype=float)
        if self.plus_shape == "identity":
            return x
        t = np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)
        return t * t

    def minus(self, x):
        return np.asarray(x, dtype=float)


QUADRATIC_FUNCTIONS = RoundingFunctions()


def _check_unit(x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"rounding functions are defined on [0, 1], got {x}")


def eval_f_plus(x: float, fns: RoundingFunctions = QUADRATIC_FUNCTIONS) -> float:
    _check_unit(x)
    return float(fns.plus(x))


def eval_f_minus(x: float, fns: RoundingFunctions = QUADRATIC_FUNCTIONS) -> float:
    _check_unit(x)
    return float(fns.minus(x))


@dataclass(frozen=True)
class BbcParams:
    delta: Fraction = Fraction(1, 44)

    def __post_init__(self):
        d = Fraction(self.delta)
        object.__setattr__(self, "delta", d)
        if not 0 < d <= Fraction(1, 44):
            raise ValueError(f"delta must lie in (0, 1/44], got {d}")


# ----------------------------------------------------------- pivot algorithms

def _trivial(g: SignedCompleteGraph) -> Clustering | None:
    return Clustering.singletons(1) if g.n == 1 else None


def kwik_cluster(g: SignedCompleteGraph, seed, pivots: list | None = None) -> Clustering:
    """Random pivot; cluster = pivot plus its active positive neighbours.

    If ``pivots`` is a list, the chosen pivots are appended to it in order.
    """
    if g.n == 1:
        if pivots is not None:
            pivots.append(0)
        return Clustering.singletons(1)
    rng = make_rng(seed)
    pos = g.pos_rows
    labels = [-1] * g.n
    active = list(range(g.n))
    cid = 0
    while active:
        p = active[int(rng.integers(len(active)))]
        if pivots is not None:
            pivots.append(p)
        row = pos[p]
        rest = []
        for v in active:
            if row[v]:  # includes p itself
                labels[v] = cid
            else:
                rest.append(v)
        active = rest
        cid += 1
    return Clustering.from_labels(labels)


def _require_feasible(g: SignedCompleteGraph, m: FractionalMetric, feas_tol: float) -> None:
    if m.n != g.n:
        raise GraphError(f"metric has {m.n} vertices, graph has {g.n}")
    report = verify_metric(m, feas_tol)
    if not report.ok:
        raise InfeasibleMetricError(f"metric is not feasible: {report}")


def cgw_round(g: SignedCompleteGraph, m: FractionalMetric, pivot_seed, *,
              feas_tol: float = FEAS_TOL) -> Clustering:
    """Ball of radius 1/2 around the pivot, kept only if its mean length is at most 1/4."""
    _require_feasible(g, m, feas_tol)
    if (c := _trivial(g)) is not None:
        return c
    rng = make_rng(pivot_seed)
    x = m.x
    labels = np.full(g.n, -1)
    active = np.arange(g.n)
    cid = 0
    while len(active):
        p = active[int(rng.integers(len(active)))]
        d = x[p, active]
        in_ball = (d <= 0.5) & (active != p)
        labels[p] = cid
        if in_ball.any() and d[in_ball].mean() <= 0.25:
            labels[active[in_ball]] = cid
        active = active[labels[active] == -1]
        cid += 1
    return Clustering.from_labels(labels.tolist())


def cmsy_round(g: SignedCompleteGraph, m: FractionalMetric, fns: RoundingFunctions, seed, *,
               feas_tol: float = FEAS_TOL) -> Clustering:
    """Random pivot; every other active vertex joins independently w.p. 1 - f^sign(x)."""
    _require_feasible(g, m, feas_tol)
    if (c := _trivial(g)) is not None:
        return c
    rng = make_rng(seed)
    x = np.clip(m.x, 0.0, 1.0)
    # non-join probability for every ordered pair, precomputed once
    stay_out = np.where(g.positive, fns.plus(x), fns.minus(x))
    labels = np.full(g.n, -1)
    active = np.arange(g.n)
    cid = 0
    while len(active):
        p = active[int(rng.integers(len(active)))]
        others = active[active != p]
        joins = rng.random(len(others)) >= stay_out[p, others]
        labels[p] = cid
        labels[others[joins]] = cid
        active = active[labels[active] == -1]
        cid += 1
    return Clustering.from_labels(labels.tolist())


# ----------------------------------------------------------- goodness & BBC

def _as_fraction(delta) -> Fraction:
    return delta if isinstance(delta, Fraction) else Fraction(delta)


def _good_mask(g: SignedCompleteGraph, members: np.ndarray, delta: Fraction) -> np.ndarray:
    """delta-goodness of every vertex w.r.t. the set given by bool mask ``members``.

    Counts are compared in integers: with delta = p/q, good iff
    q*|N+(v) & C| >= (q - p)*|C| and q*|N+(v) - C| <= p*|C|.
    """
    size = int(members.sum())
    inside = g.positive[:, members].sum(axis=1)
    outside = g.positive.sum(axis=1) - inside
    p, q = delta.numerator, delta.denominator
    if q > 2**31:  # exact float-derived fractions; avoid int64 overflow
        inside, outside = inside.astype(object), outside.astype(object)
    return (q * inside >= (q - p) * size) & (q * outside <= p * size)


def _mask(n: int, vertices: Iterable[int]) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    idx = list(vertices)
    if idx:
        mask[idx] = True
    return mask


def is_delta_good(v: int, C, g: SignedCompleteGraph, delta) -> bool:
    members = _mask(g.n, C)
    if not members.any():
        raise ValueError("goodness is undefined for an empty set")
    return bool(_good_mask(g, members, _as_fraction(delta))[v])


def is_delta_clean(C, g: SignedCompleteGraph, delta) -> bool:
    members = _mask(g.n, C)
    if not members.any():
        raise ValueError("cleanliness is undefined for an empty set")
    return bool(_good_mask(g, members, _as_fraction(delta))[members].all())


def clean_up(g: SignedCompleteGraph, c: Clustering, delta) -> Clustering:
    """Dissolve clusters with many delta/3-bad members; strip the bad ones from the rest."""
    if c.n != g.n:
        raise GraphError(f"clustering covers {c.n} vertices, graph has {g.n}")
    delta = _as_fraction(delta)
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    third = delta / 3
    cores: list[list[int]] = []
    singles: list[int] = []
    for members in c.clusters():
        mask = _mask(g.n, members)
        good = _good_mask(g, mask, third)
        bad = [v for v in members if not good[v]]
        if len(bad) >= third * len(members):
            singles.extend(members)
        else:
            singles.extend(bad)
            cores.append([v for v in members if good[v]])
    return Clustering.from_clusters(cores + [[v] for v in sorted(singles)], g.n)


def bbc_cautious(g: SignedCompleteGraph, params: BbcParams = BbcParams(), seed=0) -> Clustering:
    """Cautious clustering: prune 3δ-bad vertices one at a time, then add all 7δ-good ones."""
    if (c := _trivial(g)) is not None:
        return c
    rng = make_rng(seed)
    n = g.n
    d = params.delta
    active = np.ones(n, dtype=bool)
    in_z = np.zeros(n, dtype=bool)
    clusters: list[np.ndarray] = []
    while (active & ~in_z).any():
        eligible = np.flatnonzero(active & ~in_z)
        v = int(eligible[int(rng.integers(len(eligible)))])
        A = g.positive[v] & active
        while A.any():
            bad = np.flatnonzero(A & ~_good_mask(g, A, 3 * d))
            if not len(bad):
                break
            A[bad[0]] = False
        if A.any():
            A |= active & _good_mask(g, A, 7 * d)
        if not A.any():
            in_z[v] = True  # stays active; may still be absorbed later
        else:
            clusters.append(A.copy())
            active &= ~A
            in_z &= active
    labels = np.full(n, -1)
    for cid, A in enumerate(clusters):
        labels[A] = cid
    for z in np.flatnonzero(labels == -1):
        labels[z] = len(clusters) + int(z)
    return Clustering.from_labels(labels.tolist())


# ----------------------------------------------------------- exact oracle

MAX_EXACT_N = 12


def exact_opt(g: SignedCompleteGraph, max_n: int = MAX_EXACT_N) -> tuple[Clustering, CostBreakdown]:
    """Minimum-disagreement partition by depth-first restricted-growth-string search.

    Branches are pruned once their partial cost reaches the incumbent, so the
    first optimum found (the lexicographically least string) is kept.
    """
    n = g.n
    if n > max_n:
        raise InstanceTooLargeError(f"exact search refused for n={n} > max_n={max_n}")
    pos = g.pos_rows
    labels = [0] * n
    best_cost = n * n
    best: list[int] = list(range(n))

    def dfs(i: int, k: int, partial: int) -> None:
        nonlocal best_cost, best
        if i == n:
            if partial < best_cost:
                best_cost, best = partial, labels.copy()
            return
        row = pos[i]
        # cost of placing i in cluster c w.r.t. vertices 0..i-1
        pos_in = [0] * (k + 1)
        neg_in = [0] * (k + 1)
        total_pos = 0
        for j in range(i):
            if row[j]:
                pos_in[labels[j]] += 1
                total_pos += 1
            else:
                neg_in[labels[j]] += 1
        for cl in range(k + 1):
            add = (total_pos - pos_in[cl]) + neg_in[cl]
            if partial + add >= best_cost:
                continue
            labels[i] = cl
            dfs(i + 1, max(k, cl + 1), partial + add)

    dfs(0, 0, 0)
    c = Clustering(tuple(best))
    return c, disagreement_cost(g, c)
