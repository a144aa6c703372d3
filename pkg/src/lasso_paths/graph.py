"""Weighted undirected graphs, incidence algebra, paths and rooted trees.

Vertices are numbered ``1..n`` in every public function and container;
arrays indexed by vertex (``tails``, ``heads``, distance arrays) are
0-based. Every edge is stored with ``tail < head``, which fixes the
orientation used by the incidence matrix.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    Disconnected,
    DuplicateEdge,
    InvalidPath,
    NonPositiveWeight,
    NotATree,
    SelfLoop,
    VertexOutOfRange,
)
from .linalg import SparseMatrix


@dataclass(frozen=True, eq=False)
class Graph:
    """Connected simple graph with positive weights.

    Use :func:`build_graph` rather than the constructor; it validates
    the invariants and builds the adjacency index.
    """

    n: int
    tails: np.ndarray
    heads: np.ndarray
    weights: np.ndarray
    # adjacency[v] -> tuple of (neighbor, edge index), 0-based
    adjacency: tuple = field(repr=False)
    _edge_index: dict = field(repr=False)

    @property
    def m(self) -> int:
        return int(self.weights.shape[0])

    def edge(self, j: int) -> tuple[int, int, float]:
        """Edge ``j`` (0-based index) as a 1-based ``(tail, head, weight)``."""
        return int(self.tails[j]) + 1, int(self.heads[j]) + 1, float(self.weights[j])

    def edges(self) -> list[tuple[int, int, float]]:
        return [self.edge(j) for j in range(self.m)]

    def edge_index(self, u: int, v: int) -> int:
        """Column index of the edge joining 1-based vertices ``u`` and ``v``."""
        key = (min(u, v) - 1, max(u, v) - 1)
        try:
            return self._edge_index[key]
        except KeyError:
            raise InvalidPath(f"no edge between {u} and {v}") from None

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v) - 1, max(u, v) - 1) in self._edge_index

    def neighbors(self, v: int) -> list[int]:
        return [u + 1 for u, _ in self.adjacency[v - 1]]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v - 1])

    def check_vertex(self, v: int) -> int:
        """Validate a 1-based vertex id and return its 0-based index."""
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or not 1 <= v <= self.n:
            raise VertexOutOfRange(f"vertex {v!r} not in 1..{self.n}")
        return int(v) - 1

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "edges": [list(e) for e in self.edges()]})

    def to_text(self) -> str:
        lines = [f"# n={self.n} m={self.m}"]
        lines += [f"{u} {v} {w!r}" for u, v, w in self.edges()]
        return "\n".join(lines) + "\n"


def build_graph(edge_list: Iterable[Sequence], n: int | None = None) -> Graph:
    """Validate an edge list of 1-based ``(u, v, w)`` triples into a Graph.

    Edge order is preserved and becomes the column order of the incidence
    matrix. ``n`` defaults to the largest vertex id present; passing a
    larger ``n`` adds isolated vertices, which then fail the connectivity
    check.
    """
    triples = [tuple(e) for e in edge_list]
    if n is None:
        n = max((max(int(u), int(v)) for u, v, _ in triples), default=1)
    tails = np.empty(len(triples), dtype=np.int64)
    heads = np.empty(len(triples), dtype=np.int64)
    weights = np.empty(len(triples), dtype=float)
    index: dict[tuple[int, int], int] = {}
    adjacency: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for j, (u, v, w) in enumerate(triples):
        u, v, w = int(u), int(v), float(w)
        if not (1 <= u <= n and 1 <= v <= n):
            raise VertexOutOfRange(f"edge {j}: ({u}, {v}) outside 1..{n}")
        if u == v:
            raise SelfLoop(f"edge {j}: self-loop at vertex {u}")
        if not (w > 0) or not np.isfinite(w):
            raise NonPositiveWeight(f"edge {j}: weight {w} is not a positive finite number")
        a, b = min(u, v) - 1, max(u, v) - 1
        if (a, b) in index:
            raise DuplicateEdge(f"edge {j}: ({u}, {v}) duplicates edge {index[(a, b)]}")
        index[(a, b)] = j
        tails[j], heads[j], weights[j] = a, b, w
        adjacency[a].append((b, j))
        adjacency[b].append((a, j))

    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v, _ in adjacency[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    if not seen.all():
        missing = np.flatnonzero(~seen)[:5] + 1
        raise Disconnected(f"graph is disconnected; unreachable from 1: {missing.tolist()}...")

    for arr in (tails, heads, weights):
        arr.setflags(write=False)
    return Graph(n, tails, heads, weights, tuple(tuple(a) for a in adjacency), index)


def load_graph(path) -> Graph:
    """Read a graph from a text edge list (``u v w`` per line) or JSON."""
    text = FsPath(path).read_text()
    if FsPath(path).suffix.lower() == ".json" or text.lstrip().startswith("{"):
        data = json.loads(text)
        return build_graph(data["edges"], n=data.get("n"))
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'u v w', got {line!r}")
        edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return build_graph(edges)


def incidence_matrix(g: Graph) -> SparseMatrix:
    """``n x m`` matrix with ``+1`` at the tail and ``-1`` at the head of each edge."""
    cols = np.repeat(np.arange(g.m), 2)
    rows = np.column_stack([g.tails, g.heads]).ravel()
    vals = np.tile([1.0, -1.0], g.m)
    return SparseMatrix.from_triplets(rows, cols, vals, (g.n, g.m))


def weighted_incidence(g: Graph) -> SparseMatrix:
    """``Q = D W^{-1}``."""
    cols = np.repeat(np.arange(g.m), 2)
    rows = np.column_stack([g.tails, g.heads]).ravel()
    inv = 1.0 / g.weights
    vals = np.column_stack([inv, -inv]).ravel()
    return SparseMatrix.from_triplets(rows, cols, vals, (g.n, g.m))


def laplacian(g: Graph) -> SparseMatrix:
    """Weighted Laplacian ``D W D^T``."""
    D = incidence_matrix(g).csr
    return SparseMatrix(D @ (D.T.multiply(g.weights[:, None])))


def indicator_vector(n: int, s: int, t: int) -> np.ndarray:
    """``y`` with ``+1`` at ``s``, ``-1`` at ``t`` (1-based), zero elsewhere."""
    if not (1 <= s <= n and 1 <= t <= n):
        raise VertexOutOfRange(f"({s}, {t}) outside 1..{n}")
    y = np.zeros(n)
    y[s - 1] += 1.0
    y[t - 1] -= 1.0
    return y


@dataclass(frozen=True)
class Path:
    """Simple path given by its 1-based vertex sequence.

    ``edges`` holds incidence-matrix column indices and ``signs`` is ``+1``
    where the traversal follows the edge orientation, ``-1`` otherwise.
    """

    vertices: tuple[int, ...]
    edges: tuple[int, ...]
    signs: tuple[int, ...]

    @property
    def source(self) -> int:
        return self.vertices[0]

    @property
    def target(self) -> int:
        return self.vertices[-1]

    def __len__(self):
        return len(self.edges)

    @classmethod
    def from_vertices(cls, g: Graph, vertices: Sequence[int]) -> "Path":
        vertices = tuple(int(v) for v in vertices)
        if not vertices:
            raise InvalidPath("a path needs at least one vertex")
        for v in vertices:
            try:
                g.check_vertex(v)
            except VertexOutOfRange as exc:
                raise InvalidPath(str(exc)) from None
        if len(set(vertices)) != len(vertices):
            raise InvalidPath(f"vertex repeated in {vertices}")
        edges, signs = [], []
        for u, v in zip(vertices, vertices[1:]):
            j = g.edge_index(u, v)
            edges.append(j)
            signs.append(1 if g.tails[j] == u - 1 else -1)
        return cls(vertices, tuple(edges), tuple(signs))


def _validate_path(g: Graph, p: Path) -> None:
    if len(p.vertices) != len(p.edges) + 1 or len(p.signs) != len(p.edges):
        raise InvalidPath("vertex/edge counts are inconsistent")
    if len(set(p.vertices)) != len(p.vertices):
        raise InvalidPath("path repeats a vertex")
    for (u, v), j, sgn in zip(zip(p.vertices, p.vertices[1:]), p.edges, p.signs):
        if not 0 <= j < g.m:
            raise InvalidPath(f"edge index {j} out of range")
        tail, head = int(g.tails[j]) + 1, int(g.heads[j]) + 1
        if (sgn == 1 and (tail, head) != (u, v)) or (sgn == -1 and (head, tail) != (u, v)) \
                or sgn not in (1, -1):
            raise InvalidPath(f"edge {j} does not lead from {u} to {v}")


def path_length(g: Graph, p: Path) -> float:
    _validate_path(g, p)
    return float(sum(g.weights[j] for j in p.edges))


def path_incidence_vector(g: Graph, p: Path) -> np.ndarray:
    """Length-``m`` vector with the traversal sign on each path edge."""
    _validate_path(g, p)
    x = np.zeros(g.m)
    x[list(p.edges)] = p.signs
    return x


@dataclass(frozen=True)
class PathResult:
    path: Path
    length: float
    incidence: np.ndarray

    @property
    def vertices(self) -> tuple[int, ...]:
        return self.path.vertices


def make_result(g: Graph, p: Path) -> PathResult:
    return PathResult(p, path_length(g, p), path_incidence_vector(g, p))


@dataclass(frozen=True)
class RootedTree:
    """Tree over a vertex subset, oriented edges given as 1-based pairs.

    ``vertices`` starts with the root; the remaining order fixes the column
    order of the path matrix. ``edges`` order fixes its row order.
    """

    root: int
    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    parent: dict  # vertex -> (parent vertex, edge position)

    @classmethod
    def from_edges(cls, root: int, edges: Sequence[tuple[int, int]],
                   order: Sequence[int] | None = None) -> "RootedTree":
        edges = tuple((int(u), int(v)) for u, v in edges)
        adj: dict[int, list[tuple[int, int]]] = {root: []}
        for k, (u, v) in enumerate(edges):
            if u == v:
                raise NotATree(f"self-loop at {u}")
            adj.setdefault(u, []).append((v, k))
            adj.setdefault(v, []).append((u, k))
        parent: dict[int, tuple[int, int]] = {}
        seen = {root}
        bfs = [root]
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v, k in adj[u]:
                if v in seen:
                    if parent.get(u, (None, None))[1] != k:
                        raise NotATree(f"edge ({u}, {v}) closes a cycle")
                    continue
                seen.add(v)
                parent[v] = (u, k)
                bfs.append(v)
                queue.append(v)
        if len(seen) != len(adj) or len(edges) != len(seen) - 1:
            raise NotATree("edges do not form a single tree containing the root")
        if order is not None:
            order = tuple(int(v) for v in order)
            if order[0] != root or sorted(order) != sorted(seen):
                raise NotATree("vertex order must list every tree vertex, root first")
            bfs = list(order)
        return cls(root, tuple(bfs), edges, parent)

    @property
    def size(self) -> int:
        return len(self.vertices)

    def path_to_root(self, v: int) -> list[tuple[int, int]]:
        """``(edge position, sign)`` pairs walking from ``v`` up to the root."""
        out = []
        while v != self.root:
            u, k = self.parent[v]
            tail, _ = self.edges[k]
            out.append((k, 1 if tail == v else -1))
            v = u
        return out


def tree_incidence(t: RootedTree) -> np.ndarray:
    """Dense incidence matrix of the tree, rows in ``t.vertices`` order."""
    pos = {v: i for i, v in enumerate(t.vertices)}
    D = np.zeros((t.size, len(t.edges)))
    for k, (u, v) in enumerate(t.edges):
        D[pos[u], k] = 1.0
        D[pos[v], k] = -1.0
    return D


def tree_path_matrix(t: RootedTree) -> np.ndarray:
    """``k x k`` matrix whose column for each non-root vertex is the
    incidence vector of its path to the root."""
    k = len(t.edges)
    P = np.zeros((k, k))
    for col, v in enumerate(t.vertices[1:]):
        for pos, sgn in t.path_to_root(v):
            P[pos, col] = sgn
    return P


def tree_incidence_pseudoinverse(t: RootedTree) -> np.ndarray:
    """Closed-form ``D^+ = [-(1/n) P 1, P J]`` with ``J = I - (1/n) 1 1^T``."""
    P = tree_path_matrix(t)
    n = t.size
    k = n - 1
    ones = np.ones(k)
    J = np.eye(k) - np.outer(ones, ones) / n
    return np.column_stack([-(P @ ones) / n, P @ J]) if k else np.zeros((0, 1))
