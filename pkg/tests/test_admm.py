import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lasso_paths import (
    SCISSORS_CONFIG,
    AdmmConfig,
    admm_lasso,
    build_graph,
    extract_path,
    gen_random_graph,
    inadmm_lasso,
    indicator_vector,
    lambda_max,
    lars_path,
    normal_inverse_direct,
    normal_inverse_identity,
    shortest_path,
    soft_threshold,
    weighted_incidence,
)
from lasso_paths.admm import _objective
from lasso_paths.errors import CgStagnation, MaxIterExceeded, NoPathAtThreshold

from conftest import random_instance


def nicholson_problem(g):
    return weighted_incidence(g), indicator_vector(9, 1, 9)


def test_soft_threshold_examples():
    assert np.array_equal(soft_threshold([3.0, -0.5, 0.0], 1.0), [2.0, 0.0, 0.0])
    x = np.array([1.5, -2.0, 0.1])
    assert np.array_equal(soft_threshold(x, 0.0), x)
    assert np.array_equal(soft_threshold([-2.0], 2.0), [0.0])
    with pytest.raises(ValueError):
        soft_threshold([1.0], -1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50), st.floats(0, 20))
def test_soft_threshold_is_l1_prox(x, kappa):
    # minimiser of 1/2 (z - x)^2 + kappa |z| beats nearby points
    z = soft_threshold([x], kappa)[0]
    f = lambda u: 0.5 * (u - x) ** 2 + kappa * abs(u)
    for d in (-1e-3, 1e-3, -0.5, 0.5):
        assert f(z) <= f(z + d) + 1e-12


def test_lambda_max_examples(nicholson):
    g = build_graph([(1, 2, 2.0)])
    assert lambda_max(weighted_incidence(g), indicator_vector(2, 1, 2)) == pytest.approx(1.0)
    assert lambda_max(weighted_incidence(g), np.zeros(2)) == 0
    assert lambda_max(*nicholson_problem(nicholson)) == pytest.approx(0.5)


def test_admm_nicholson(nicholson):
    Q, y = nicholson_problem(nicholson)
    state, trace = admm_lasso(Q, y)
    assert trace.converged
    assert np.abs(state.beta).sum() == pytest.approx(8, rel=0.01)
    assert extract_path(state.beta, nicholson, 1, 9).vertices == (1, 2, 3, 6, 9)
    assert trace.primal_res[-1] <= AdmmConfig().tol_primal
    assert trace.dual_res[-1] <= AdmmConfig().tol_dual


def test_inadmm_nicholson_matches_admm(nicholson):
    Q, y = nicholson_problem(nicholson)
    s1, _ = admm_lasso(Q, y)
    s2, tr = inadmm_lasso(Q, y)
    assert abs(np.abs(s1.beta).sum() - np.abs(s2.beta).sum()) <= 1e-3
    assert tr.solver == "inadmm" and len(tr.cg_iters) == tr.iterations and tr.cg_iters[0] > 0


def test_large_lambda_shrinks_to_zero(nicholson):
    Q, y = nicholson_problem(nicholson)
    state, trace = admm_lasso(Q, y, AdmmConfig(lambda_rel=1.0, rho=1.0))
    assert np.abs(state.beta).sum() <= 1e-4
    assert trace.lam == pytest.approx(0.5)


def test_identity_route_agrees_with_direct():
    for seed in range(20):
        g = gen_random_graph(10, 20, 10.0, 20.0, seed=seed)
        Q = weighted_incidence(g)
        rng = np.random.default_rng(seed)
        for rho in (1e-7, 1.0, 10.0):
            for _ in range(20):
                z = rng.standard_normal(20)
                a = normal_inverse_direct(Q, rho, z)
                b = normal_inverse_identity(Q, rho, z)
                assert np.linalg.norm(a - b) <= 1e-9 * np.linalg.norm(a)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 60), st.data())
def test_inadmm_degenerates_to_admm(n, data):
    m = data.draw(st.integers(n - 1, min(n * (n - 1) // 2, 3 * n)))
    g = gen_random_graph(n, m, 10.0, 20.0, seed=data.draw(st.integers(0, 10**6)))
    s, t = data.draw(st.lists(st.integers(1, n), min_size=2, max_size=2, unique=True))
    Q, y = weighted_incidence(g), indicator_vector(n, s, t)
    cfg = AdmmConfig(cg_tol=1e-14, max_iter=150)
    ref, got = [], []
    admm_lasso(Q, y, cfg, callback=lambda k, b, a, v: ref.append(b.copy()))
    inadmm_lasso(Q, y, cfg, callback=lambda k, b, a, v: got.append(b.copy()))
    assert len(ref) == len(got)
    assert max(np.abs(p - q).max() for p, q in zip(ref, got)) <= 1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_objective_bounded_and_residual_small(seed):
    g, s, t = random_instance(np.random.default_rng(seed), (5, 20), jitter=0)
    Q, y = weighted_incidence(g), indicator_vector(g.n, s, t)
    cfg = AdmmConfig()
    objs = []
    lam = cfg.lambda_rel * lambda_max(Q, y)
    state, trace = admm_lasso(
        Q, y, cfg, callback=lambda k, b, a, v: objs.append(_objective(Q, y, lam, b, a, cfg.rho)))
    assert np.all(np.isfinite(objs))
    assert max(objs) <= objs[0] + 1.0
    if trace.converged:
        assert trace.primal_res[-1] <= cfg.tol_primal


def test_cg_failure_is_reported(nicholson):
    Q, y = nicholson_problem(nicholson)
    with pytest.raises(CgStagnation):
        inadmm_lasso(Q, y, AdmmConfig(cg_tol=1e-12, cg_max_iter=1))


def test_max_iter(nicholson):
    Q, y = nicholson_problem(nicholson)
    state, trace = admm_lasso(Q, y, AdmmConfig(max_iter=5))
    assert trace.reason == "max_iter" and trace.iterations == 5
    with pytest.raises(MaxIterExceeded) as info:
        admm_lasso(Q, y, AdmmConfig(max_iter=5), strict=True)
    assert info.value.trace.iterations == 5
    assert info.value.state.beta.shape == (13,)


def test_direct_cutoff_delegates(nicholson):
    Q, y = nicholson_problem(nicholson)
    _, trace = admm_lasso(Q, y, AdmmConfig(direct_cutoff=5))
    assert trace.solver == "inadmm"


def test_warm_start(nicholson):
    Q, y = nicholson_problem(nicholson)
    state, trace = admm_lasso(Q, y)
    again, tr2 = admm_lasso(Q, y, x0=state)
    assert tr2.iterations < trace.iterations


def test_config_validation_and_json():
    cfg = AdmmConfig()
    assert (cfg.rho, cfg.relax, cfg.lambda_rel, cfg.tol_primal, cfg.tol_dual, cfg.cg_tol) == \
        (1e-7, 1.0, 1e-8, 1e-5, 1e-4, 1e-4)
    assert SCISSORS_CONFIG.cg_tol == 1e-7
    for bad in ({"rho": 0.0}, {"relax": 2.5}, {"max_iter": 0}, {"cg_tol": float("nan")}):
        with pytest.raises(ValueError):
            AdmmConfig(**bad)
    loaded = AdmmConfig.from_json('{"rho": 0.5, "max_iter": 7}', max_iter=9, cg_tol=None)
    assert loaded.rho == 0.5 and loaded.max_iter == 9 and loaded.cg_tol == 1e-4
    with pytest.raises(ValueError):
        AdmmConfig.from_json('{"bogus": 1}')


def test_relaxation_still_converges(nicholson):
    Q, y = nicholson_problem(nicholson)
    state, trace = admm_lasso(Q, y, AdmmConfig(relax=1.6))
    assert trace.converged
    assert np.abs(state.beta).sum() == pytest.approx(8, rel=0.01)


def test_trace_csv(nicholson):
    Q, y = nicholson_problem(nicholson)
    _, trace = admm_lasso(Q, y, AdmmConfig(max_iter=3))
    lines = trace.to_csv(timings=False).strip().splitlines()
    assert lines[0] == "iter,beta_l1,primal_res,dual_res,cg_iters,elapsed_ms"
    assert len(lines) == 4 and lines[1].endswith(",")


def test_extract_path_examples(nicholson):
    beta = lars_path(nicholson, 1, 9).beta_final
    assert extract_path(beta, nicholson, 1, 9).vertices == (1, 2, 3, 6, 9)
    with pytest.raises(NoPathAtThreshold):
        extract_path(np.zeros(13), nicholson, 1, 9)
    with pytest.raises(ValueError):
        extract_path(beta, nicholson, 1, 9, threshold=1.0)


def test_extract_path_random_graphs():
    converged = 0
    for seed in range(12):
        g, s, t = random_instance(np.random.default_rng(seed), (5, 50))
        state, trace = admm_lasso(weighted_incidence(g), indicator_vector(g.n, s, t))
        if not trace.converged:
            continue
        converged += 1
        res = extract_path(state.beta, g, s, t)
        assert res.length <= 1.05 * shortest_path(g, s, t).length
    assert converged >= 8


def _cost_per_unit(m):
    """Seconds per unit of InADMM work (one outer step or one CG step)."""
    n = max(int(m / 2.7), 10)
    g = gen_random_graph(n, m, 10.0, 20.0, seed=m)
    Q, y = weighted_incidence(g), indicator_vector(n, 1, n)
    best = np.inf
    for _ in range(3):
        t0 = time.perf_counter()
        _, trace = inadmm_lasso(Q, y, AdmmConfig(max_iter=20, cg_tol=1e-4))
        elapsed = time.perf_counter() - t0
        best = min(best, elapsed / (trace.iterations + sum(trace.cg_iters)))
    return best


@pytest.mark.slow
def test_per_iteration_cost_is_linear_in_m():
    ms = np.array([1_000, 10_000, 100_000])
    costs = np.array([_cost_per_unit(int(m)) for m in ms])
    slope = np.polyfit(np.log(ms), np.log(costs), 1)[0]
    # linear scaling, within a factor of two on the exponent
    assert 0.5 <= slope <= 2.0, (costs, slope)
