"""ADMM and inexact ADMM for the shortest-path lasso.

The splitting is ``beta = alpha`` with the quadratic term on ``beta`` and
the l1 term on ``alpha``; ``v`` is the scaled dual. The ``beta`` step
needs ``(Q^T Q + rho I)^{-1}``, which the identity

    (Q^T Q + rho I)^{-1} = (1/rho) (I - Q^T (Q Q^T + rho I)^{-1} Q)

reduces to an ``n x n`` system. With ``h = Q^T y + rho z`` and
``z = alpha - v`` the step is ``beta = (h - Q^T eta) / rho`` where
``(Q Q^T + rho I) eta = Q h``. For the tiny ``rho`` used on shortest-path
problems the subtraction ``h - Q^T eta`` cancels almost all digits, so the
solvers use the algebraically identical correction form

    beta = z + Q^T xi,   (Q Q^T + rho I) xi = y - Q z,   eta = y - rho xi,

which involves the same operator but no division by ``rho``.

Iterations stop when ``||beta - alpha||_2 <= tol_primal`` and
``||alpha - alpha_prev||_2 <= tol_dual``; the dual residual is taken in
the scaled variables, i.e. without the factor ``rho``.
"""

from __future__ import annotations

import csv
import dataclasses
import heapq
import io
import json
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import CgStagnation, FactorizationFailure, MaxIterExceeded, NoPathAtThreshold, NotPositiveDefinite
from .graph import Graph, Path, PathResult, make_result
from .linalg import LinearOperator, SparseMatrix, conjugate_gradient, spd_factorize


@dataclass(frozen=True)
class AdmmConfig:
    rho: float = 1e-7
    relax: float = 1.0
    lambda_rel: float = 1e-8
    tol_primal: float = 1e-5
    tol_dual: float = 1e-4
    max_iter: int = 10000
    cg_tol: float = 1e-4
    cg_max_iter: int = 10000
    direct_cutoff: int = 5000

    def __post_init__(self):
        for name in ("rho", "lambda_rel", "tol_primal", "tol_dual", "cg_tol"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and val > 0 and np.isfinite(val)):
                raise ValueError(f"{name} must be a positive number, got {val!r}")
        for name in ("max_iter", "cg_max_iter", "direct_cutoff"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, int) or val <= 0:
                raise ValueError(f"{name} must be a positive integer, got {val!r}")
        if not 1.0 <= self.relax <= 2.0:
            raise ValueError(f"relax must lie in [1, 2], got {self.relax!r}")

    @classmethod
    def from_json(cls, text: str, **overrides) -> "AdmmConfig":
        data = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def replace(self, **changes) -> "AdmmConfig":
        return dataclasses.replace(self, **changes)


# image graphs reach a good path long before the residual tolerances
SCISSORS_CONFIG = AdmmConfig(cg_tol=1e-7, max_iter=1000)


@dataclass
class AdmmState:
    beta: np.ndarray
    alpha: np.ndarray
    v: np.ndarray


@dataclass
class AdmmTrace:
    iters: list[int] = field(default_factory=list)
    beta_l1: list[float] = field(default_factory=list)
    primal_res: list[float] = field(default_factory=list)
    dual_res: list[float] = field(default_factory=list)
    cg_iters: list[int] = field(default_factory=list)
    elapsed_ms: list[float] = field(default_factory=list)
    reason: str = ""
    lam: float = 0.0
    solver: str = "admm"

    @property
    def converged(self) -> bool:
        return self.reason == "converged"

    @property
    def iterations(self) -> int:
        return self.iters[-1] if self.iters else 0

    def record(self, it, beta_l1, primal, dual, cg, elapsed):
        self.iters.append(it)
        self.beta_l1.append(beta_l1)
        self.primal_res.append(primal)
        self.dual_res.append(dual)
        self.cg_iters.append(cg)
        self.elapsed_ms.append(elapsed)

    def first_within(self, reference: float, rel: float) -> int | None:
        """First iteration whose ``||beta||_1`` is within ``rel`` of ``reference``."""
        for it, val in zip(self.iters, self.beta_l1):
            if abs(val - reference) <= rel * abs(reference):
                return it
        return None

    def to_csv(self, timings: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "beta_l1", "primal_res", "dual_res", "cg_iters", "elapsed_ms"])
        for row in zip(self.iters, self.beta_l1, self.primal_res, self.dual_res,
                       self.cg_iters, self.elapsed_ms):
            it, l1, pr, du, cg, ms = row
            w.writerow([it, f"{l1:.12g}", f"{pr:.6e}", f"{du:.6e}", cg,
                        f"{ms:.3f}" if timings else ""])
        return buf.getvalue()


def soft_threshold(x, kappa: float) -> np.ndarray:
    """Componentwise ``sign(x) max(|x| - kappa, 0)``."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - kappa, 0.0)


def lambda_max(Q: SparseMatrix, y) -> float:
    """``||Q^T y||_inf``: the smallest ``lam`` whose lasso solution is zero."""
    return float(np.max(np.abs(Q.rmatvec(y)), initial=0.0))


def normal_inverse_direct(Q: SparseMatrix, rho: float, z) -> np.ndarray:
    """``(Q^T Q + rho I)^{-1} z`` by factorising the ``m x m`` matrix."""
    Qd = Q.toarray()
    M = Qd.T @ Qd + rho * np.eye(Qd.shape[1])
    return spd_factorize(M).solve(np.asarray(z, dtype=float))


def normal_inverse_identity(Q: SparseMatrix, rho: float, z) -> np.ndarray:
    """``(Q^T Q + rho I)^{-1} z`` through the ``n x n`` system of the matrix identity."""
    z = np.asarray(z, dtype=float)
    A = (Q.csr @ Q.csr_t).toarray() + rho * np.eye(Q.shape[0])
    inner = spd_factorize(A).solve(Q.matvec(z))
    return (z - Q.rmatvec(inner)) / rho


def _objective(Q, y, lam, beta, alpha, rho):
    r = y - Q.matvec(beta)
    return 0.5 * r @ r + lam * np.abs(alpha).sum() + 0.5 * rho * np.sum((beta - alpha) ** 2)


def _run(Q: SparseMatrix, y, cfg: AdmmConfig, beta_step, solver: str,
         x0: AdmmState | None, callback: Callable | None, strict: bool):
    y = np.asarray(y, dtype=float)
    m = Q.shape[1]
    lam = cfg.lambda_rel * lambda_max(Q, y)
    kappa = lam / cfg.rho
    if x0 is None:
        alpha = np.zeros(m)
        v = np.zeros(m)
        beta = np.zeros(m)
    else:
        beta, alpha, v = (np.array(x0.beta, dtype=float), np.array(x0.alpha, dtype=float),
                          np.array(x0.v, dtype=float))
    trace = AdmmTrace(lam=lam, solver=solver)
    start = time.perf_counter()
    for k in range(1, cfg.max_iter + 1):
        beta, cg_its = beta_step(alpha - v)
        if cfg.relax != 1.0:
            beta_hat = cfg.relax * beta + (1 - cfg.relax) * alpha
        else:
            beta_hat = beta
        alpha_old = alpha
        alpha = soft_threshold(beta_hat + v, kappa)
        v = v + beta_hat - alpha
        primal = float(np.linalg.norm(beta - alpha))
        # measured in scaled units: rho * ||dalpha|| is below any sensible
        # tolerance when rho is tiny and would stop the solver at once
        dual = float(np.linalg.norm(alpha - alpha_old))
        trace.record(k, float(np.abs(beta).sum()), primal, dual, cg_its,
                     (time.perf_counter() - start) * 1e3)
        if callback is not None:
            callback(k, beta, alpha, v)
        if primal <= cfg.tol_primal and dual <= cfg.tol_dual:
            trace.reason = "converged"
            break
    else:
        trace.reason = "max_iter"
    state = AdmmState(beta, alpha, v)
    if strict and not trace.converged:
        raise MaxIterExceeded(f"{solver} did not converge in {cfg.max_iter} iterations",
                              state, trace)
    return state, trace


def admm_lasso(Q: SparseMatrix, y, cfg: AdmmConfig = AdmmConfig(), x0: AdmmState | None = None,
               callback: Callable | None = None, strict: bool = False):
    """ADMM with a cached Cholesky factor of ``Q Q^T + rho I``.

    Graphs with more than ``cfg.direct_cutoff`` vertices are handed to
    :func:`inadmm_lasso`. Non-convergence is reported by
    ``trace.reason == "max_iter"``; pass ``strict=True`` to raise
    :class:`MaxIterExceeded` instead.
    """
    n = Q.shape[0]
    if n > cfg.direct_cutoff:
        return inadmm_lasso(Q, y, cfg, x0=x0, callback=callback, strict=strict)
    y = np.asarray(y, dtype=float)
    A = (Q.csr @ Q.csr_t).toarray() + cfg.rho * np.eye(n)
    try:
        factor = spd_factorize(A)
    except NotPositiveDefinite as exc:
        raise FactorizationFailure(str(exc)) from exc

    def beta_step(z):
        xi = factor.solve(y - Q.matvec(z))
        return z + Q.rmatvec(xi), 0

    return _run(Q, y, cfg, beta_step, "admm", x0, callback, strict)


def inadmm_lasso(Q: SparseMatrix, y, cfg: AdmmConfig = AdmmConfig(), x0: AdmmState | None = None,
                 callback: Callable | None = None, strict: bool = False):
    """ADMM whose ``n x n`` solve is replaced by warm-started conjugate gradient.

    CG runs on ``Q Q^T + rho I`` to relative residual ``cfg.cg_tol``,
    starting from the previous outer iteration's solution (zero at first).
    A tolerance below what double precision can deliver for the system
    (about ``eps ||A|| ||xi|| / ||b||``) is met as closely as rounding
    allows: a solve that stalls within ten times that floor is accepted.

    Raises
    ------
    CgStagnation
        If an inner solve misses ``cfg.cg_tol`` within ``cfg.cg_max_iter``
        iterations, or stalls above the rounding floor.
    """
    y = np.asarray(y, dtype=float)
    n = Q.shape[0]
    A = (Q.csr @ Q.csr_t + cfg.rho * sp.identity(n, format="csr")).tocsr()
    anorm = float(abs(A).sum(axis=1).max())
    op = LinearOperator(n, A.dot)
    xi = np.zeros(n)
    eps = np.finfo(float).eps

    def beta_step(z):
        nonlocal xi
        rhs = y - Q.matvec(z)
        res = conjugate_gradient(op, rhs, x0=xi, tol=cfg.cg_tol,
                                 max_iter=cfg.cg_max_iter, check=False)
        if not res.converged:
            floor = 10 * eps * anorm * np.linalg.norm(res.x) / np.linalg.norm(rhs)
            if res.iterations >= cfg.cg_max_iter or res.residual > floor:
                raise CgStagnation(
                    f"inner CG reached only {res.residual:.2e} (tol {cfg.cg_tol:.1e}) "
                    f"in {res.iterations} iterations", res)
        xi = res.x
        return z + Q.rmatvec(xi), res.iterations

    return _run(Q, y, cfg, beta_step, "inadmm", x0, callback, strict)


def extract_path(beta, g: Graph, s: int, t: int, threshold: float = 0.5) -> PathResult:
    """Shortest ``s``-``t`` path through edges with ``|beta_j| / w_j >= threshold``.

    Raises :class:`NoPathAtThreshold` when the kept edges do not connect
    ``s`` to ``t``.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    s0, t0 = g.check_vertex(s), g.check_vertex(t)
    if s0 == t0:
        return make_result(g, Path((s,), (), ()))
    x = np.abs(np.asarray(beta, dtype=float)) / g.weights
    keep = np.flatnonzero(x >= threshold)
    adj: dict[int, list[int]] = {}
    for j in keep:
        adj.setdefault(int(g.tails[j]), []).append(int(j))
        adj.setdefault(int(g.heads[j]), []).append(int(j))

    dist = {s0: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, s0)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == t0:
            break
        for j in adj.get(u, ()):
            w = int(g.heads[j]) if int(g.tails[j]) == u else int(g.tails[j])
            nd = d + g.weights[j]
            if nd < dist.get(w, np.inf):
                dist[w] = nd
                prev[w] = u
                heapq.heappush(heap, (nd, w))
    if t0 not in done:
        raise NoPathAtThreshold(f"edges with |x| >= {threshold} do not connect {s} and {t}")
    verts = [t0]
    while verts[-1] != s0:
        verts.append(prev[verts[-1]])
    return make_result(g, Path.from_vertices(g, [v + 1 for v in reversed(verts)]))
