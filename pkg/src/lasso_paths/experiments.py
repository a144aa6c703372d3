"""Reproduction harness: random graphs, intelligent-scissors graphs from
grey-scale images, and a runner that writes trace, path, overlay and
summary artifacts for one solver run."""

from __future__ import annotations

import heapq
import json
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np
from scipy import ndimage

from .admm import AdmmConfig, admm_lasso, extract_path, inadmm_lasso
from .dijkstra import shortest_path
from .errors import ImageTooSmall, InfeasibleEdgeCount, NotNeighbors
from .graph import Graph, build_graph, indicator_vector, load_graph, weighted_incidence
from .lars import lars_path

EPSILON = 0.01


def _random_tree_edges(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform random labelled tree on ``0..n-1`` via a random Pruefer sequence."""
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    seq = rng.integers(0, n, size=n - 2)
    degree = np.ones(n, dtype=np.int64)
    np.add.at(degree, seq, 1)
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, int(v)))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, int(v))
    u, w = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((u, w))
    return edges


def gen_random_graph(n: int, m: int, w_min: float = 10.0, w_max: float = 20.0,
                     seed: int = 0) -> Graph:
    """Connected simple graph with exactly ``m`` edges.

    A uniform random spanning tree guarantees connectivity; the remaining
    ``m - (n - 1)`` edges are distinct uniformly drawn non-edges. Weights
    are i.i.d. uniform on ``[w_min, w_max]``.
    """
    if n < 1 or m < n - 1 or m > n * (n - 1) // 2:
        raise InfeasibleEdgeCount(f"cannot build a connected simple graph with n={n}, m={m}")
    if not 0 < w_min <= w_max:
        raise ValueError("need 0 < w_min <= w_max")
    rng = np.random.default_rng(seed)
    pairs = [tuple(sorted(e)) for e in _random_tree_edges(n, rng)]
    present = set(pairs)
    extra = m - len(pairs)
    if extra > 0:
        if extra > n * (n - 1) // 4:
            # dense: sample from the explicit complement
            complement = [(a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in present]
            pick = rng.choice(len(complement), size=extra, replace=False)
            pairs += [complement[i] for i in sorted(pick)]
        else:
            while len(pairs) < m:
                a, b = rng.integers(0, n, size=2)
                key = (int(min(a, b)), int(max(a, b)))
                if a != b and key not in present:
                    present.add(key)
                    pairs.append(key)
    weights = rng.uniform(w_min, w_max, size=m)
    return build_graph([(a + 1, b + 1, w) for (a, b), w in zip(pairs, weights)], n=n)


def jitter_weights(g: Graph, scale: float, seed: int) -> Graph:
    """Copy of ``g`` with each weight perturbed by uniform noise in ``[-scale, scale]``."""
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-scale, scale, size=g.m)
    return build_graph([(u, v, w + dw) for (u, v, w), dw in zip(g.edges(), noise)], n=g.n)


@dataclass(frozen=True)
class GrayImage:
    pixels: np.ndarray  # (height, width) float array in [0, 255]

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2 or px.size == 0:
            raise ValueError("image must be a non-empty 2-D array")
        if px.min() < 0 or px.max() > 255:
            raise ValueError("intensities must lie in [0, 255]")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def read_pgm(path) -> GrayImage:
    """Read an 8-bit PGM (``P2`` ASCII or ``P5`` binary)."""
    data = FsPath(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"{path}: not a PGM file")
    # header: magic, width, height, maxval, separated by whitespace/comments
    tokens = []
    pos = 2
    token_re = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")
    while len(tokens) < 3:
        mt = token_re.match(data, pos)
        if mt is None:
            raise ValueError(f"{path}: truncated header")
        tokens.append(int(mt.group(1)))
        pos = mt.end()
    width, height, maxval = tokens
    if maxval <= 0 or maxval > 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported (maxval={maxval})")
    if magic == b"P5":
        raw = np.frombuffer(data[pos + 1:pos + 1 + width * height], dtype=np.uint8)
    else:
        body = re.sub(rb"#[^\n]*", b"", data[pos:])
        raw = np.array(body.split(), dtype=np.int64)[: width * height]
    if raw.size != width * height:
        raise ValueError(f"{path}: expected {width * height} pixels, found {raw.size}")
    px = raw.reshape(height, width).astype(float) * (255.0 / maxval)
    return GrayImage(px)


def write_pgm(path, img: GrayImage | np.ndarray, binary: bool = True) -> None:
    px = img.pixels if isinstance(img, GrayImage) else np.asarray(img, dtype=float)
    px = np.clip(np.rint(px), 0, 255).astype(np.uint8)
    h, w = px.shape
    if binary:
        FsPath(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + px.tobytes())
    else:
        rows = "\n".join(" ".join(str(v) for v in row) for row in px)
        FsPath(path).write_text(f"P2\n{w} {h}\n255\n{rows}\n")


def gradient_magnitude(img: GrayImage) -> np.ndarray:
    """Sobel gradient magnitude scaled to ``[0, 1]`` over the image."""
    px = img.pixels
    g = np.hypot(ndimage.sobel(px, axis=0, mode="nearest"), ndimage.sobel(px, axis=1, mode="nearest"))
    peak = g.max()
    return g / peak if peak > 0 else g


def edge_weight_from_gradient(img: GrayImage, p: tuple[int, int], q: tuple[int, int],
                              grad: np.ndarray | None = None) -> float:
    """Local cost ``d (eps + 1 - (G(p) + G(q)) / 2)`` between 8-neighbours.

    ``p`` and ``q`` are 1-based ``(row, col)``; ``d`` is 1 for axis
    neighbours and sqrt(2) for diagonal ones, so strong edges are cheap.
    """
    dr, dc = abs(p[0] - q[0]), abs(p[1] - q[1])
    if max(dr, dc) != 1:
        raise NotNeighbors(f"{p} and {q} are not 8-neighbours")
    for r, c in (p, q):
        if not (1 <= r <= img.height and 1 <= c <= img.width):
            raise NotNeighbors(f"pixel {(r, c)} outside the image")
    if grad is None:
        grad = gradient_magnitude(img)
    d = math.sqrt(2.0) if dr and dc else 1.0
    gp, gq = grad[p[0] - 1, p[1] - 1], grad[q[0] - 1, q[1] - 1]
    return d * (EPSILON + 1.0 - 0.5 * (gp + gq))


def pixel_vertex(width: int, pixel: tuple[int, int]) -> int:
    """1-based vertex id of a 1-based ``(row, col)`` pixel."""
    r, c = pixel
    return (r - 1) * width + c


def vertex_pixel(width: int, v: int) -> tuple[int, int]:
    r, c = divmod(v - 1, width)
    return r + 1, c + 1


@dataclass(frozen=True)
class PixelMap:
    """Row-major correspondence between 1-based pixels and vertex ids."""

    height: int
    width: int

    def vertex(self, pixel: tuple[int, int]) -> int:
        r, c = pixel
        if not (1 <= r <= self.height and 1 <= c <= self.width):
            raise ValueError(f"pixel {(r, c)} outside the {self.height}x{self.width} image")
        return pixel_vertex(self.width, pixel)

    def pixel(self, v: int) -> tuple[int, int]:
        if not 1 <= v <= self.height * self.width:
            raise ValueError(f"vertex {v} has no pixel")
        return vertex_pixel(self.width, v)


def scissors_graph(img: GrayImage) -> tuple[Graph, PixelMap]:
    """Pixel graph with 8-neighbour edges weighted by local edge cost.

    Vertex ``(r - 1) * width + c`` is pixel ``(r, c)``.
    """
    if img.height < 2 or img.width < 2:
        raise ImageTooSmall(f"need at least 2x2 pixels, got {img.height}x{img.width}")
    grad = gradient_magnitude(img)
    h, w = img.height, img.width
    idx = np.arange(h * w).reshape(h, w)
    edges = []
    # right, down, down-right, down-left
    for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
        r0, r1 = 0, h - dr
        c0, c1 = max(0, -dc), w - max(0, dc)
        a = idx[r0:r1, c0:c1]
        b = idx[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        ga = grad[r0:r1, c0:c1]
        gb = grad[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        d = math.sqrt(2.0) if dr and dc else 1.0
        wts = d * (EPSILON + 1.0 - 0.5 * (ga + gb))
        edges.append(np.column_stack([a.ravel(), b.ravel(), wts.ravel()]))
    arr = np.vstack(edges)
    order = np.lexsort((arr[:, 1], arr[:, 0]))
    arr = arr[order]
    g = build_graph([(int(u) + 1, int(v) + 1, wt) for u, v, wt in arr], n=h * w)
    return g, PixelMap(h, w)


def eight_neighbor_edge_count(width: int, height: int) -> int:
    return 4 * width * height - 3 * (width + height) + 2


def disk_image(size: int = 64, radius: float = 20.0, center: tuple[float, float] | None = None,
               inside: float = 220.0, outside: float = 30.0, noise: float = 0.0,
               seed: int = 0) -> GrayImage:
    """Bright disk on a dark background, optionally with Gaussian noise.

    A noise-free disk has many equal-cost staircase paths along its rim, so
    shortest paths are not unique; a little noise breaks those ties.
    """
    if center is None:
        center = ((size - 1) / 2, (size - 1) / 2)
    rr, cc = np.mgrid[0:size, 0:size]
    mask = (rr - center[0]) ** 2 + (cc - center[1]) ** 2 <= radius ** 2
    px = np.where(mask, inside, outside)
    if noise > 0:
        px = px + np.random.default_rng(seed).normal(0.0, noise, px.shape)
    return GrayImage(np.clip(px, 0.0, 255.0))


def overlay_path(img: GrayImage, vertices, value: float = 0.0) -> np.ndarray:
    out = img.pixels.copy()
    for v in vertices:
        r, c = vertex_pixel(img.width, v)
        out[r - 1, c - 1] = value
    return out


@dataclass
class ExperimentSpec:
    """One solver run. ``source`` is ``"random"``, ``"image"`` or ``"graph"``.

    ``params`` carries ``n, m, w_min, w_max`` for random graphs, ``path``
    for image and graph files. ``s``/``t`` are vertex ids, or 1-based
    ``(row, col)`` pixels for images; for random graphs they default to a
    seeded random pair.
    """

    source: str
    params: dict = field(default_factory=dict)
    s: object = None
    t: object = None
    solver: str = "admm"
    config: AdmmConfig = field(default_factory=AdmmConfig)
    out_dir: str = "."
    seed: int = 0
    threshold: float = 0.5
    timings: bool = True

    def __post_init__(self):
        if self.source not in ("random", "image", "graph"):
            raise ValueError(f"unknown graph source {self.source!r}")
        if self.solver not in ("admm", "inadmm", "lars", "dijkstra"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.source == "random" and self.seed is None:
            raise ValueError("random graphs need a seed")


def _resolve(spec: ExperimentSpec):
    img = None
    if spec.source == "random":
        p = spec.params
        g = gen_random_graph(int(p["n"]), int(p["m"]), float(p.get("w_min", 10.0)),
                             float(p.get("w_max", 20.0)), seed=spec.seed)
        if spec.s is None or spec.t is None:
            rng = np.random.default_rng([spec.seed, 1])
            s, t = (int(v) + 1 for v in rng.choice(g.n, size=2, replace=False))
        else:
            s, t = int(spec.s), int(spec.t)
    elif spec.source == "image":
        img = read_pgm(spec.params["path"]) if "path" in spec.params else spec.params["image"]
        g, pmap = scissors_graph(img)
        s, t = pmap.vertex(tuple(spec.s)), pmap.vertex(tuple(spec.t))
    else:
        g = load_graph(spec.params["path"])
        s, t = int(spec.s), int(spec.t)
    g.check_vertex(s)
    g.check_vertex(t)
    if s == t:
        raise ValueError("source and target must differ")
    return g, s, t, img


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run one solver and write ``trace.csv``, ``path.txt``, ``summary.json``
    (and ``overlay.pgm`` for image sources) into ``spec.out_dir``.

    Returns the summary dictionary.
    """
    g, s, t, img = _resolve(spec)
    out = FsPath(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    oracle = shortest_path(g, s, t)
    t0 = time.perf_counter()
    trace_csv = None
    if spec.solver == "dijkstra":
        result, length, iterations = oracle, oracle.length, 0
    elif spec.solver == "lars":
        lt = lars_path(g, s, t)
        result, length, iterations = lt.result, lt.length, len(lt.breakpoints)
        trace_csv = lt.to_csv()
    else:
        Q = weighted_incidence(g)
        y = indicator_vector(g.n, s, t)
        solve = admm_lasso if spec.solver == "admm" else inadmm_lasso
        state, tr = solve(Q, y, spec.config)
        length, iterations = float(np.abs(state.beta).sum()), tr.iterations
        trace_csv = tr.to_csv(timings=spec.timings)
        result = extract_path(state.beta, g, s, t, spec.threshold)
    wall_ms = (time.perf_counter() - t0) * 1e3

    if trace_csv is not None:
        (out / "trace.csv").write_text(trace_csv)
    (out / "path.txt").write_text(" ".join(str(v) for v in result.vertices) + "\n")
    if img is not None:
        write_pgm(out / "overlay.pgm", overlay_path(img, result.vertices))

    summary = {
        "solver": spec.solver,
        "length": float(length),
        "path_length": float(result.length),
        "oracle_length": float(oracle.length),
        "rel_gap": float(abs(length - oracle.length) / oracle.length),
        "iterations": int(iterations),
        "wall_ms": round(wall_ms, 3) if spec.timings else None,
        "seed": spec.seed,
        "source": s,
        "target": t,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
