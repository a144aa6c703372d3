"""Exact shortest paths: Dijkstra with a binary heap, the bidirectional
settle order that mirrors the LARS active-set growth, and the uniqueness
check for shortest paths from both endpoints."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .graph import Graph, Path, PathResult, make_result

UNIQUENESS_RTOL = 1e-12


@dataclass(frozen=True)
class DistanceMap:
    """Result of a Dijkstra run.

    ``dist`` and ``parent_edge`` are 0-based arrays; unreached vertices have
    ``inf`` distance and parent ``-1``. ``order`` lists settled vertices
    (1-based) in settle order.
    """

    source: int
    dist: np.ndarray
    parent_edge: np.ndarray
    order: tuple[int, ...]

    def distance(self, v: int) -> float:
        return float(self.dist[v - 1])

    def settled(self, v: int) -> bool:
        return v in set(self.order)

    def path_to(self, g: Graph, v: int) -> Path:
        g.check_vertex(v)
        if not np.isfinite(self.dist[v - 1]):
            raise ValueError(f"vertex {v} was not reached")
        verts = [v - 1]
        while verts[-1] != self.source - 1:
            j = self.parent_edge[verts[-1]]
            u = verts[-1]
            verts.append(int(g.tails[j]) if g.heads[j] == u else int(g.heads[j]))
        return Path.from_vertices(g, [u + 1 for u in reversed(verts)])


def dijkstra(g: Graph, source: int, target: int | None = None) -> DistanceMap:
    """Single-source shortest paths.

    With ``target`` given the search stops as soon as the target is settled.
    Equal-distance pops are broken by the smaller vertex id (the heap orders
    ``(dist, vertex)`` pairs), and stale heap entries are skipped.
    """
    s = g.check_vertex(source)
    tgt = None if target is None else g.check_vertex(target)
    dist = np.full(g.n, np.inf)
    parent = np.full(g.n, -1, dtype=np.int64)
    done = np.zeros(g.n, dtype=bool)
    dist[s] = 0.0
    heap = [(0.0, s)]
    order = []
    w = g.weights
    adjacency = g.adjacency
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        order.append(u + 1)
        if u == tgt:
            break
        for v, j in adjacency[u]:
            if done[v]:
                continue
            nd = d + w[j]
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = j
                heapq.heappush(heap, (nd, v))
    return DistanceMap(source, dist, parent, tuple(order))


def shortest_path(g: Graph, s: int, t: int) -> PathResult:
    dm = dijkstra(g, s, t)
    return make_result(g, dm.path_to(g, t))


class SettleEvent(NamedTuple):
    vertex: int
    root: int
    distance: float
    key: float


class _Side:
    """One direction of the bidirectional search.

    Relaxation only starts from vertices this side has settled, so the
    tentative distance of a frontier vertex is its distance through this
    side's tree, exactly the quantity the LARS joining time depends on.
    """

    def __init__(self, g: Graph, root: int):
        self.g = g
        self.root = root
        self.dist = {root: 0.0}
        self.tree = {root}
        self.total = 0.0
        self.heap: list[tuple[float, int]] = []
        self.tentative: dict[int, float] = {}
        self._relax(root)

    def _relax(self, u: int):
        du = self.dist[u]
        for v, j in self.g.adjacency[u]:
            nd = du + self.g.weights[j]
            if v not in self.tree and nd < self.tentative.get(v, math.inf):
                self.tentative[v] = nd
                heapq.heappush(self.heap, (nd, v))

    def candidate(self, blocked: set) -> tuple[float, int] | None:
        """Closest frontier vertex outside both trees, as ``(dist, v)``."""
        while self.heap:
            d, v = self.heap[0]
            if v in self.tree or v in blocked or d > self.tentative.get(v, math.inf):
                heapq.heappop(self.heap)
                continue
            return d, v
        return None

    def key(self, d: float) -> float:
        denom = len(self.tree) * d - self.total
        return 1.0 / denom if denom > 0 else math.inf

    def settle(self, v: int, d: float):
        self.tree.add(v)
        self.dist[v] = d
        self.total += d
        self._relax(v)


def bidirectional_settle_order(g: Graph, s: int, t: int, rtol: float = 1e-9) -> list[SettleEvent]:
    """Interleave Dijkstra searches from ``s`` and ``t`` by joining-time key.

    Each step compares the next vertex of either search, keyed by
    ``1 / (|T| l_v - sum_{u in T} l_u)`` for its tree ``T``, against the key
    ``(|Ts| + |Tt|) / gamma`` of the cheapest edge joining the two trees.
    The largest key wins; keys equal within ``rtol`` are settled in the same
    step. The sequence ends when the connecting edge wins. Returned events
    are 1-based and ordered by decreasing key.
    """
    s0, t0 = g.check_vertex(s), g.check_vertex(t)
    if s0 == t0:
        raise ValueError("source and target must differ")
    sides = (_Side(g, s0), _Side(g, t0))
    events: list[SettleEvent] = []
    while True:
        blocked = sides[0].tree | sides[1].tree
        keys = []
        for side in sides:
            cand = side.candidate(blocked)
            if cand is not None:
                keys.append((side.key(cand[0]), cand[1], cand[0], side))
        conn = _connection_key(g, *sides)
        best = max([k[0] for k in keys] + [conn])
        if conn >= best * (1 - rtol) or not keys:
            return events
        winners = [k for k in keys if k[0] >= best * (1 - rtol)]
        for key, v, d, side in winners:
            side.settle(v, d)
            events.append(SettleEvent(v + 1, side.root + 1, float(d), float(key)))


def _connection_key(g: Graph, ss: _Side, ts: _Side) -> float:
    best_len = math.inf
    for u in ss.tree:
        for v, j in g.adjacency[u]:
            if v in ts.tree:
                best_len = min(best_len, ss.dist[u] + g.weights[j] + ts.dist[v])
    if not math.isfinite(best_len):
        return -math.inf
    ns, nt = len(ss.tree), len(ts.tree)
    gamma = ns * nt * best_len - nt * ss.total - ns * ts.total
    return (ns + nt) / gamma


class UniquenessReport(NamedTuple):
    holds: bool
    violations: tuple[int, ...]


def _tight_predecessors(g: Graph, dm: DistanceMap) -> list[int]:
    """Vertices reachable through two or more tight incoming edges."""
    bad = []
    dist = dm.dist
    for v in range(g.n):
        dv = dist[v]
        if v == dm.source - 1 or not np.isfinite(dv):
            continue
        tol = UNIQUENESS_RTOL * max(1.0, dv)
        tight = 0
        for u, j in g.adjacency[v]:
            if abs(dist[u] + g.weights[j] - dv) <= tol:
                tight += 1
        if tight >= 2:
            bad.append(v + 1)
    return bad


def check_assumption_a1(g: Graph, s: int, t: int) -> UniquenessReport:
    """Whether every vertex has a unique shortest path from ``s`` and from ``t``.

    With positive weights a vertex has several shortest paths from the
    root exactly when some vertex on them has two neighbours whose
    distance plus edge weight ties its own distance.
    """
    bad = set()
    for root in (s, t):
        bad.update(_tight_predecessors(g, dijkstra(g, root)))
    return UniquenessReport(not bad, tuple(sorted(bad)))
