import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lasso_paths import (
    AdmmConfig,
    ExperimentSpec,
    GrayImage,
    edge_weight_from_gradient,
    gen_random_graph,
    read_pgm,
    run_experiment,
    scissors_graph,
    shortest_path,
    write_pgm,
)
from lasso_paths.errors import ImageTooSmall, InfeasibleEdgeCount, NotNeighbors
from lasso_paths.experiments import (
    EPSILON,
    PixelMap,
    disk_image,
    eight_neighbor_edge_count,
    gradient_magnitude,
    jitter_weights,
    overlay_path,
)

from conftest import NICHOLSON_EDGES


def test_random_graph_is_reproducible():
    a = gen_random_graph(50, 120, seed=7)
    b = gen_random_graph(50, 120, seed=7)
    assert a.edges() == b.edges()
    assert gen_random_graph(50, 120, seed=8).edges() != a.edges()


def test_random_graph_benchmark_size():
    g = gen_random_graph(1000, 2688, 10.0, 20.0, seed=42)
    assert (g.n, g.m) == (1000, 2688)
    assert g.weights.min() >= 10 and g.weights.max() <= 20


def test_random_graph_small_cases():
    g = gen_random_graph(2, 1, seed=0)
    assert (g.n, g.m) == (2, 1)
    with pytest.raises(InfeasibleEdgeCount):
        gen_random_graph(3, 1, seed=0)
    with pytest.raises(InfeasibleEdgeCount):
        gen_random_graph(4, 7, seed=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 40), st.data())
def test_random_graph_properties(n, data):
    m = data.draw(st.integers(n - 1, n * (n - 1) // 2))
    g = gen_random_graph(n, m, 2.0, 3.0, seed=data.draw(st.integers(0, 10**6)))
    # build_graph already rejects loops, duplicates and disconnected input
    assert (g.n, g.m) == (n, m)
    assert np.all((g.weights >= 2.0) & (g.weights <= 3.0))


def test_jitter_keeps_topology():
    g = gen_random_graph(20, 40, seed=1)
    h = jitter_weights(g, 1e-3, seed=2)
    assert [e[:2] for e in g.edges()] == [e[:2] for e in h.edges()]
    assert np.abs(g.weights - h.weights).max() <= 1e-3


def test_scissors_2x2():
    g, pmap = scissors_graph(GrayImage(np.zeros((2, 2))))
    assert (g.n, g.m) == (4, 6)
    assert pmap.vertex((2, 1)) == 3 and pmap.pixel(4) == (2, 2)


def test_scissors_edge_count():
    img = GrayImage(np.random.default_rng(0).uniform(0, 255, (57, 60)))
    g, _ = scissors_graph(img)
    assert g.n == 3420
    assert g.m == eight_neighbor_edge_count(60, 57) == 13331


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12))
def test_scissors_degrees(h, w):
    g, pmap = scissors_graph(GrayImage(np.zeros((h, w))))
    assert g.m == eight_neighbor_edge_count(w, h)
    for v in range(1, g.n + 1):
        r, c = pmap.pixel(v)
        rows = min(r + 1, h) - max(r - 1, 1) + 1
        cols = min(c + 1, w) - max(c - 1, 1) + 1
        expected = rows * cols - 1
        assert len(g.neighbors(v)) == expected


def test_uniform_image_weights():
    g, pmap = scissors_graph(GrayImage(np.full((5, 5), 100.0)))
    axis = {round(w, 12) for u, v, w in g.edges() if abs(u - v) in (1, 5)}
    diag = {round(w, 12) for u, v, w in g.edges() if abs(u - v) in (4, 6)}
    assert axis == {round(1 + EPSILON, 12)}
    assert diag == {round((1 + EPSILON) * math.sqrt(2), 12)}


def test_edge_weight_examples():
    flat = GrayImage(np.full((4, 4), 10.0))
    assert edge_weight_from_gradient(flat, (1, 1), (1, 2)) == pytest.approx(1.01)
    assert edge_weight_from_gradient(flat, (1, 1), (2, 2)) == pytest.approx(1.01 * math.sqrt(2))
    # full-strength gradient at both ends leaves only the eps floor
    grad = np.ones((4, 4))
    assert edge_weight_from_gradient(flat, (2, 2), (2, 3), grad=grad) == pytest.approx(EPSILON)
    with pytest.raises(NotNeighbors):
        edge_weight_from_gradient(flat, (1, 1), (1, 3))
    with pytest.raises(NotNeighbors):
        edge_weight_from_gradient(flat, (1, 1), (1, 1))


def test_step_edge_is_cheaper():
    px = np.zeros((8, 8))
    px[:, 4:] = 200.0
    img = GrayImage(px)
    along_edge = edge_weight_from_gradient(img, (3, 4), (4, 4))
    flat_region = edge_weight_from_gradient(img, (3, 1), (4, 1))
    assert along_edge < flat_region
    assert flat_region == pytest.approx(1 + EPSILON)


def test_gradient_matches_manual_sobel():
    rng = np.random.default_rng(3)
    px = rng.uniform(0, 255, (6, 7))
    pad = np.pad(px, 1, mode="edge")
    kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=float)
    gx = np.zeros_like(px)
    gy = np.zeros_like(px)
    for r in range(6):
        for c in range(7):
            win = pad[r:r + 3, c:c + 3]
            gx[r, c] = (win * kx).sum()
            gy[r, c] = (win * kx.T).sum()
    ref = np.hypot(gx, gy)
    assert np.allclose(gradient_magnitude(GrayImage(px)), ref / ref.max(), rtol=0, atol=1e-12)


def test_image_too_small():
    with pytest.raises(ImageTooSmall):
        scissors_graph(GrayImage(np.zeros((1, 5))))


def test_pixel_map_bounds():
    pm = PixelMap(3, 4)
    with pytest.raises(ValueError):
        pm.vertex((4, 1))
    with pytest.raises(ValueError):
        pm.pixel(13)


@pytest.mark.parametrize("binary", [True, False])
def test_pgm_round_trip(tmp_path, binary):
    px = np.random.default_rng(5).integers(0, 256, (9, 13)).astype(float)
    f = tmp_path / "img.pgm"
    write_pgm(f, GrayImage(px), binary=binary)
    assert f.read_bytes()[:2] == (b"P5" if binary else b"P2")
    back = read_pgm(f)
    assert np.array_equal(back.pixels, px)


def test_pgm_with_comment(tmp_path):
    f = tmp_path / "c.pgm"
    f.write_text("P2\n# made by hand\n3 2\n255\n0 1 2\n3 4 5\n")
    assert np.array_equal(read_pgm(f).pixels, [[0, 1, 2], [3, 4, 5]])
    bad = tmp_path / "bad.pgm"
    bad.write_text("P3\n1 1\n255\n0 0 0\n")
    with pytest.raises(ValueError):
        read_pgm(bad)


def test_overlay_marks_only_path():
    img = GrayImage(np.full((4, 4), 100.0))
    out = overlay_path(img, [1, 6, 11])
    changed = np.argwhere(out != img.pixels)
    assert sorted(map(tuple, changed)) == [(0, 0), (1, 1), (2, 2)]


def test_disk_image_noise_breaks_ties():
    clean = disk_image()
    noisy = disk_image(noise=2.0, seed=0)
    assert set(np.unique(clean.pixels)) == {30.0, 220.0}
    assert np.abs(noisy.pixels - clean.pixels).max() > 0
    assert np.array_equal(noisy.pixels, disk_image(noise=2.0, seed=0).pixels)


def test_run_experiment_random(tmp_path):
    spec = ExperimentSpec("random", {"n": 60, "m": 150}, solver="admm", out_dir=str(tmp_path),
                          seed=3, timings=False)
    summary = run_experiment(spec)
    assert summary["rel_gap"] <= 0.01
    assert summary["wall_ms"] is None
    assert json.loads((tmp_path / "summary.json").read_text()) == summary
    assert (tmp_path / "trace.csv").read_text().startswith("iter,")
    path = [int(v) for v in (tmp_path / "path.txt").read_text().split()]
    assert (path[0], path[-1]) == (summary["source"], summary["target"])


def test_run_experiment_is_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        spec = ExperimentSpec("random", {"n": 30, "m": 60}, solver="inadmm",
                              out_dir=str(tmp_path / name), seed=1, timings=False)
        run_experiment(spec)
        outs.append([(tmp_path / name / f).read_bytes()
                     for f in ("trace.csv", "path.txt", "summary.json")])
    assert outs[0] == outs[1]


def test_run_experiment_graph_file_lars(tmp_path, nicholson):
    f = tmp_path / "g.txt"
    f.write_text(nicholson.to_text())
    summary = run_experiment(ExperimentSpec("graph", {"path": str(f)}, s=1, t=9, solver="lars",
                                            out_dir=str(tmp_path / "out")))
    # length is ||beta(0)||_1, a floating-point sum; the path itself is exact
    assert summary["path_length"] == summary["oracle_length"] == 8
    assert summary["rel_gap"] <= 1e-12
    assert (tmp_path / "out" / "path.txt").read_text() == "1 2 3 6 9\n"


def test_run_experiment_image(tmp_path):
    px = np.full((12, 12), 30.0)
    px[3:9, 3:9] = 220.0
    px += np.random.default_rng(0).normal(0, 2.0, px.shape)
    f = tmp_path / "sq.pgm"
    write_pgm(f, np.clip(px, 0, 255))
    spec = ExperimentSpec("image", {"path": str(f)}, s=(3, 3), t=(8, 8), solver="dijkstra",
                          out_dir=str(tmp_path / "out"))
    summary = run_experiment(spec)
    assert summary["rel_gap"] == 0
    overlay = read_pgm(tmp_path / "out" / "overlay.pgm")
    assert (overlay.pixels == 0).sum() == len((tmp_path / "out" / "path.txt").read_text().split())


def test_invalid_spec_writes_nothing(tmp_path):
    out = tmp_path / "never"
    with pytest.raises(ValueError):
        ExperimentSpec("random", {"n": 5, "m": 4}, solver="simplex", out_dir=str(out))
    with pytest.raises(InfeasibleEdgeCount):
        run_experiment(ExperimentSpec("random", {"n": 5, "m": 40}, out_dir=str(out)))
    with pytest.raises(IndexError):
        f = tmp_path / "g.txt"
        f.write_text("".join(f"{u} {v} {w}\n" for u, v, w in NICHOLSON_EDGES))
        run_experiment(ExperimentSpec("graph", {"path": str(f)}, s=1, t=99, out_dir=str(out)))
    assert not out.exists()


def test_experiment_matches_oracle_on_nicholson_file(tmp_path, nicholson):
    f = tmp_path / "g.txt"
    f.write_text(nicholson.to_text())
    for solver in ("admm", "inadmm", "dijkstra"):
        summary = run_experiment(ExperimentSpec("graph", {"path": str(f)}, s=1, t=9,
                                                solver=solver, config=AdmmConfig(),
                                                out_dir=str(tmp_path / solver)))
        assert summary["oracle_length"] == shortest_path(nicholson, 1, 9).length
        assert summary["rel_gap"] <= 0.01
