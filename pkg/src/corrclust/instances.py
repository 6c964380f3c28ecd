"""Signed complete graphs, clusterings, disagreement cost, generators and file I/O."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .rng import make_rng


class GraphError(ValueError):
    """Invalid graph construction or malformed graph/clustering file."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SignedCompleteGraph:
    """Complete graph on vertices ``0..n-1`` with a +/- label on every pair.

    ``positive[u, v]`` is True iff {u, v} is a positive edge.  The diagonal is
    True so that ``N+(u)`` contains ``u`` itself.
    """

    n: int
    positive: np.ndarray = field(repr=False)

    def __post_init__(self):
        pos = np.array(self.positive, dtype=bool, copy=True)
        if pos.shape != (self.n, self.n):
            raise GraphError(f"label matrix has shape {pos.shape}, expected ({self.n}, {self.n})")
        if not np.array_equal(pos, pos.T):
            raise GraphError("label matrix is not symmetric")
        np.fill_diagonal(pos, True)
        object.__setattr__(self, "positive", _frozen(pos))

    def __eq__(self, other):
        if not isinstance(other, SignedCompleteGraph):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.positive, other.positive))

    __hash__ = None

    def is_positive(self, u: int, v: int) -> bool:
        return bool(self.positive[u, v])

    def sign(self, u: int, v: int) -> str:
        return "+" if self.positive[u, v] else "-"

    def pos_neighbors(self, u: int) -> frozenset[int]:
        """N+(u), including u."""
        return frozenset(np.flatnonzero(self.positive[u]).tolist())

    def neg_neighbors(self, u: int) -> frozenset[int]:
        return frozenset(np.flatnonzero(~self.positive[u]).tolist())

    def pairs(self) -> Iterable[tuple[int, int]]:
        return itertools.combinations(range(self.n), 2)

    def positive_pairs(self) -> list[tuple[int, int]]:
        return [(u, v) for u, v in self.pairs() if self.positive[u, v]]

    def negative_pairs(self) -> list[tuple[int, int]]:
        return [(u, v) for u, v in self.pairs() if not self.positive[u, v]]

    @property
    def num_positive(self) -> int:
        return int((self.positive.sum() - self.n) // 2)

    @property
    def num_negative(self) -> int:
        return self.n * (self.n - 1) // 2 - self.num_positive

    @cached_property
    def pos_rows(self) -> tuple[tuple[bool, ...], ...]:
        # plain-Python rows; the pivot loops index these per vertex
        return tuple(tuple(row) for row in self.positive.tolist())


@dataclass(frozen=True)
class Clustering:
    """Partition of ``0..n-1`` given as dense cluster ids ``0..k-1``."""

    assignment: tuple[int, ...]

    def __post_init__(self):
        a = tuple(int(c) for c in self.assignment)
        object.__setattr__(self, "assignment", a)
        if not a:
            raise GraphError("clustering must cover at least one vertex")
        used = set(a)
        if used != set(range(len(used))):
            raise GraphError(f"cluster ids must be dense 0..k-1, got {sorted(used)}")

    @property
    def n(self) -> int:
        return len(self.assignment)

    @property
    def k(self) -> int:
        return max(self.assignment) + 1

    def clusters(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.k)]
        for v, c in enumerate(self.assignment):
            out[c].append(v)
        return out

    def canonical(self) -> "Clustering":
        """Relabel ids in order of first appearance (restricted growth string)."""
        return Clustering.from_labels(self.assignment)

    def same_partition(self, other: "Clustering") -> bool:
        return self.canonical().assignment == other.canonical().assignment

    @classmethod
    def from_labels(cls, labels: Sequence) -> "Clustering":
        remap: dict = {}
        return cls(tuple(remap.setdefault(lab, len(remap)) for lab in labels))

    @classmethod
    def from_clusters(cls, clusters: Iterable[Iterable[int]], n: int) -> "Clustering":
        labels = [-1] * n
        for cid, members in enumerate(clusters):
            for v in members:
                if not 0 <= v < n:
                    raise GraphError(f"vertex {v} out of range for n={n}")
                if labels[v] != -1:
                    raise GraphError(f"vertex {v} appears in two clusters")
                labels[v] = cid
        missing = [v for v, lab in enumerate(labels) if lab == -1]
        if missing:
            raise GraphError(f"vertices {missing} are not covered")
        return cls.from_labels(labels)

    @classmethod
    def singletons(cls, n: int) -> "Clustering":
        return cls(tuple(range(n)))

    @classmethod
    def single(cls, n: int) -> "Clustering":
        return cls((0,) * n)


@dataclass(frozen=True)
class CostBreakdown:
    positive_mistakes: int
    negative_mistakes: int

    @property
    def total(self) -> int:
        return self.positive_mistakes + self.negative_mistakes


def new_graph(n: int, negative_pairs: Iterable[Sequence[int]] = ()) -> SignedCompleteGraph:
    """Complete graph on ``n`` vertices with the listed pairs negative."""
    if n < 1:
        raise GraphError(f"n must be >= 1, got {n}")
    pos = np.ones((n, n), dtype=bool)
    seen = set()
    for pair in negative_pairs:
        u, v = (int(t) for t in pair)
        if u == v:
            raise GraphError(f"self-loop pair {{{u},{v}}}")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"pair {{{u},{v}}} out of range for n={n}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphError(f"duplicate pair {{{key[0]},{key[1]}}}")
        seen.add(key)
        pos[u, v] = pos[v, u] = False
    return SignedCompleteGraph(n, pos)


def disagreement_cost(g: SignedCompleteGraph, c: Clustering) -> CostBreakdown:
    if c.n != g.n:
        raise GraphError(f"clustering covers {c.n} vertices, graph has {g.n}")
    lab = np.asarray(c.assignment)
    same = lab[:, None] == lab[None, :]
    iu = np.triu_indices(g.n, 1)
    pos = g.positive[iu]
    same = same[iu]
    return CostBreakdown(int(np.count_nonzero(pos & ~same)), int(np.count_nonzero(~pos & same)))


def planted_sizes(n: int, k: int) -> list[int]:
    return [n // k + (1 if i < n % k else 0) for i in range(k)]


def gen_planted(n: int, k: int, flip_prob: float, seed) -> tuple[SignedCompleteGraph, Clustering]:
    """Planted partition with independent label flips.

    Clusters are contiguous blocks of sizes ceil(n/k) then floor(n/k).  Pairs
    are visited in (u, v), u < v lexicographic order, one uniform draw each.
    """
    if n < 1 or not 1 <= k <= n:
        raise GraphError(f"need 1 <= k <= n, got n={n}, k={k}")
    if not 0.0 <= flip_prob <= 1.0:
        raise GraphError(f"flip_prob must lie in [0, 1], got {flip_prob}")
    labels = np.repeat(np.arange(k), planted_sizes(n, k))
    truth = Clustering(tuple(labels.tolist()))
    agree = labels[:, None] == labels[None, :]
    iu = np.triu_indices(n, 1)
    flips = make_rng(seed).random(len(iu[0])) < flip_prob
    upper = agree[iu] ^ flips
    pos = np.ones((n, n), dtype=bool)
    pos[iu] = upper
    pos[iu[1], iu[0]] = upper
    return SignedCompleteGraph(n, pos), truth


def gen_gap_star(n: int) -> SignedCompleteGraph:
    """Star instance: center 0 joined positively to ``n`` leaves, leaves pairwise negative."""
    if n < 2:
        raise GraphError(f"gap star needs n >= 2 leaves, got {n}")
    pos = np.zeros((n + 1, n + 1), dtype=bool)
    pos[0, :] = pos[:, 0] = True
    return SignedCompleteGraph(n + 1, pos)


def gen_single_negative_edge(n: int) -> SignedCompleteGraph:
    if n < 3:
        raise GraphError(f"single-negative-edge instance needs n >= 3, got {n}")
    return new_graph(n, [(0, 1)])


def enumerate_bad_triangles(g: SignedCompleteGraph) -> list[tuple[int, int, int]]:
    """All triples (u < v < w) with exactly two positive edges."""
    pos = g.positive
    out = []
    for u, v, w in itertools.combinations(range(g.n), 3):
        if int(pos[u, v]) + int(pos[u, w]) + int(pos[v, w]) == 2:
            out.append((u, v, w))
    return out


# ---------------------------------------------------------------- file I/O

def _lines(path) -> list[tuple[int, str]]:
    text = Path(path).read_text(encoding="utf-8")
    return [(i, ln.strip()) for i, ln in enumerate(text.splitlines(), start=1)
            if ln.strip() and not ln.lstrip().startswith("#")]


def write_graph(g: SignedCompleteGraph, path) -> None:
    rows = [f"cc-graph {g.n}"]
    rows += [f"{u} {v} {g.sign(u, v)}" for u, v in g.pairs()]
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_graph(path) -> SignedCompleteGraph:
    lines = _lines(path)
    if not lines:
        raise GraphError(f"{path}: empty file")
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 2 or parts[0] != "cc-graph":
        raise GraphError(f"{path}:{lineno}: expected header 'cc-graph <n>'")
    try:
        n = int(parts[1])
    except ValueError:
        raise GraphError(f"{path}:{lineno}: bad vertex count {parts[1]!r}") from None
    if n < 1:
        raise GraphError(f"{path}:{lineno}: vertex count must be >= 1")
    pos = np.ones((n, n), dtype=bool)
    seen: set[tuple[int, int]] = set()
    for lineno, line in lines[1:]:
        parts = line.split()
        if len(parts) != 3:
            raise GraphError(f"{path}:{lineno}: expected '<u> <v> <+|->'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"{path}:{lineno}: non-integer vertex id") from None
        if parts[2] not in ("+", "-"):
            raise GraphError(f"{path}:{lineno}: unknown sign token {parts[2]!r}")
        if not (0 <= u < v < n):
            raise GraphError(f"{path}:{lineno}: pair {u} {v} must satisfy 0 <= u < v < {n}")
        if (u, v) in seen:
            raise GraphError(f"{path}:{lineno}: duplicate pair {{{u},{v}}}")
        seen.add((u, v))
        if parts[2] == "-":
            pos[u, v] = pos[v, u] = False
    if len(seen) != n * (n - 1) // 2:
        for u, v in itertools.combinations(range(n), 2):
            if (u, v) not in seen:
                raise GraphError(f"{path}: incomplete graph: missing {{{u},{v}}}")
    return SignedCompleteGraph(n, pos)


def write_clustering(c: Clustering, path) -> None:
    rows = [f"cc-clustering {c.n} {c.k}"]
    rows += [f"{v} {cid}" for v, cid in enumerate(c.assignment)]
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_clustering(path) -> Clustering:
    lines = _lines(path)
    if not lines:
        raise GraphError(f"{path}: empty file")
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 3 or parts[0] != "cc-clustering":
        raise GraphError(f"{path}:{lineno}: expected header 'cc-clustering <n> <k>'")
    n, k = int(parts[1]), int(parts[2])
    labels: list[int | None] = [None] * n
    for lineno, line in lines[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"{path}:{lineno}: expected '<vertex> <cluster-id>'")
        v, cid = int(parts[0]), int(parts[1])
        if not 0 <= v < n:
            raise GraphError(f"{path}:{lineno}: vertex {v} out of range")
        if not 0 <= cid < k:
            raise GraphError(f"{path}:{lineno}: cluster id {cid} out of range 0..{k - 1}")
        if labels[v] is not None:
            raise GraphError(f"{path}:{lineno}: vertex {v} listed twice")
        labels[v] = cid
    missing = [v for v, lab in enumerate(labels) if lab is None]
    if missing:
        raise GraphError(f"{path}: vertices {missing} have no cluster")
    c = Clustering(tuple(labels))
    if c.k != k:
        raise GraphError(f"{path}: header declares k={k} but {c.k} ids are used")
    return c
