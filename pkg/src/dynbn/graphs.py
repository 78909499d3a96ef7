"""Directed acyclic graphs and network statistics.

Nodes are integers 0..n-1. A :class:`Dag` is immutable: edits return new
instances, so graphs can be shared freely across time steps and Monte Carlo
paths. Edge direction matters everywhere (density, distance, AUROC all count
directed pairs); only the clustering coefficient works on the undirected
skeleton.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class CycleError(ValueError):
    """Raised when an edge set or edit would create a directed cycle."""


def _toposort(n: int, parents: Sequence[Sequence[int]]) -> list[int] | None:
    """Kahn's algorithm; returns one topological order or None if cyclic."""
    indeg = [len(p) for p in parents]
    children: list[list[int]] = [[] for _ in range(n)]
    for j in range(n):
        for i in parents[j]:
            children[i].append(j)
    stack = [v for v in range(n) if indeg[v] == 0]
    order = []
    while stack:
        v = stack.pop()
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                stack.append(c)
    return order if len(order) == n else None


class Dag:
    """Immutable directed acyclic graph over nodes 0..n-1.

    Construction validates acyclicity (and rejects self-loops/duplicates);
    pass ``_checked=True`` only from code paths that already guarantee the
    invariant, e.g. single-edge edits that ran a cycle check.
    """

    __slots__ = ("n", "edges", "_parents", "_children")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = (), *, _checked: bool = False):
        edge_set = frozenset((int(u), int(v)) for u, v in edges)
        for u, v in edge_set:
            if u == v:
                raise ValueError(f"self-loop {u}->{v}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge {u}->{v} outside 0..{n - 1}")
        parents: list[tuple[int, ...]] = []
        children: list[tuple[int, ...]] = []
        for w in range(n):
            parents.append(tuple(sorted(u for u, v in edge_set if v == w)))
            children.append(tuple(sorted(v for u, v in edge_set if u == w)))
        self.n = n
        self.edges = edge_set
        self._parents = tuple(parents)
        self._children = tuple(children)
        if not _checked and _toposort(n, parents) is None:
            raise CycleError(f"edge set contains a directed cycle: {sorted(edge_set)}")

    # -- queries ------------------------------------------------------------

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._children[u]

    def parents(self, v: int) -> tuple[int, ...]:
        return self._parents[v]

    def children(self, u: int) -> tuple[int, ...]:
        return self._children[u]

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix, a[u, v] = 1 iff u -> v."""
        a = np.zeros((self.n, self.n), dtype=np.int8)
        for u, v in self.edges:
            a[u, v] = 1
        return a

    def reaches(self, src: int, dst: int) -> bool:
        """True iff a directed path src -> ... -> dst exists (src == dst counts)."""
        if src == dst:
            return True
        seen = {src}
        stack = [src]
        while stack:
            for c in self._children[stack.pop()]:
                if c == dst:
                    return True
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return False

    def creates_cycle(self, u: int, v: int) -> bool:
        """Would adding u -> v close a directed cycle?"""
        return self.reaches(v, u)

    # -- edits (return new graphs) -------------------------------------------

    def add(self, u: int, v: int) -> "Dag":
        if self.has_edge(u, v):
            raise ValueError(f"edge {u}->{v} already present")
        if u == v or self.creates_cycle(u, v):
            raise CycleError(f"adding {u}->{v} creates a cycle")
        return Dag(self.n, self.edges | {(u, v)}, _checked=True)

    def remove(self, u: int, v: int) -> "Dag":
        if not self.has_edge(u, v):
            raise ValueError(f"edge {u}->{v} not present")
        return Dag(self.n, self.edges - {(u, v)}, _checked=True)

    def reverse(self, u: int, v: int) -> "Dag":
        stripped = self.remove(u, v)
        return stripped.add(v, u)

    # -- dunder ---------------------------------------------------------------

    def __eq__(self, other) -> bool:
        return isinstance(other, Dag) and self.n == other.n and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    def __repr__(self) -> str:
        return f"Dag(n={self.n}, edges={sorted(self.edges)})"


def is_dag(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    """True iff the edge set over n nodes admits a topological order."""
    try:
        Dag(n, edges)
    except (CycleError, ValueError):
        return False
    return True


def topological_order(dag: Dag, volatilities: Sequence[float]) -> tuple[int, ...]:
    """Topological order with exchangeable nodes resolved by volatility.

    Whenever several nodes are simultaneously available (no unprocessed
    parents), the most volatile one is placed first; exact volatility ties
    fall back to ascending node index so the order is always deterministic.
    """
    vol = np.asarray(volatilities, dtype=float)
    if vol.shape != (dag.n,):
        raise ValueError(f"need {dag.n} volatilities, got shape {vol.shape}")
    if np.any(vol <= 0):
        raise ValueError("volatilities must be strictly positive")
    indeg = [len(dag.parents(v)) for v in range(dag.n)]
    avail = [v for v in range(dag.n) if indeg[v] == 0]
    order: list[int] = []
    while avail:
        v = min(avail, key=lambda k: (-vol[k], k))
        avail.remove(v)
        order.append(v)
        for c in dag.children(v):
            indeg[c] -= 1
            if indeg[c] == 0:
                avail.append(c)
    if len(order) != dag.n:
        raise CycleError("graph contains a directed cycle")
    return tuple(order)


def max_changes(dag: Dag) -> tuple[int, int]:
    """Caps on one evolution step: (addable pair count, deletable edge count).

    Every unconnected unordered pair admits at least one acyclicity-preserving
    orientation, so ``a_max`` counts unconnected pairs; ``d_max`` is the edge
    count. Callers evolving a network additionally exclude pairs deleted in
    the same step, which restores exactly this value of ``a_max``.
    """
    d_max = dag.edge_count
    a_max = dag.n * (dag.n - 1) // 2 - d_max
    return a_max, d_max


def network_distance(g1: Dag, g2: Dag) -> int:
    """L1 distance between 0/1 adjacency matrices (count of differing cells)."""
    if g1.n != g2.n:
        raise ValueError(f"node counts differ: {g1.n} vs {g2.n}")
    return len(g1.edges.symmetric_difference(g2.edges))


@dataclass(frozen=True)
class NetworkStats:
    density: float
    clustering: float
    edge_count: int


def network_stats(dag: Dag) -> NetworkStats:
    """Directed density and global transitivity of the undirected skeleton."""
    n = dag.n
    density = dag.edge_count / (n * (n - 1)) if n > 1 else 0.0
    skel = dag.adjacency().astype(np.int64)
    skel = np.clip(skel + skel.T, 0, 1)
    deg = skel.sum(axis=1)
    triples2 = int((deg * (deg - 1)).sum())  # 2x connected triples
    if triples2 == 0:
        clustering = 0.0
    else:
        closed = int(np.trace(skel @ skel @ skel))  # 6x triangles
        clustering = closed / triples2
    return NetworkStats(density=density, clustering=clustering, edge_count=dag.edge_count)


def auroc(edge_scores: np.ndarray, truth: Dag) -> float:
    """Area under the ROC curve for ranking directed pairs against ``truth``.

    ``edge_scores[i, j]`` scores the pair i -> j (diagonal ignored). Ties are
    handled with mid-ranks, which matches the trapezoidal ROC area. Degenerate
    truths (no edges, or all pairs present) have no ranking to evaluate and
    return 0.5 with a warning.
    """
    scores = np.asarray(edge_scores, dtype=float)
    n = truth.n
    if scores.shape != (n, n):
        raise ValueError(f"scores must be {n}x{n}, got {scores.shape}")
    if n < 2:
        raise ValueError("no ordered pairs to rank")
    off = ~np.eye(n, dtype=bool)
    s = scores[off]
    labels = truth.adjacency().astype(bool)[off]
    pos = int(labels.sum())
    neg = labels.size - pos
    if pos == 0 or neg == 0:
        warnings.warn("AUROC undefined for empty/complete truth; returning 0.5", stacklevel=2)
        return 0.5
    # Mann-Whitney with average ranks for ties
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size, dtype=float)
    sorted_s = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = ranks[labels].sum()
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)
