"""Exact lasso solution path for the shortest-path lasso.

The problem is ``min_beta 1/2 ||y - Q beta||^2 + lam ||beta||_1`` with
``Q = D W^{-1}`` and ``y`` the source/target indicator. Along the path the
active coefficients are affine in ``lam``, ``beta_A = a - lam b``, and the
path breaks where an inactive correlation reaches ``+-lam`` (a join) or an
active coefficient reaches zero (a crossing).

Event times are computed from the generic least-squares quantities. When
the active edges form the two trees hanging from ``s`` and ``t`` (or one
tree after they meet) the same times also follow from tree sizes and
root distances alone; :func:`closed_form_times` evaluates those, and
``lars_path(..., cross_check=True)`` records both at every step.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import AssumptionA1Violated, NumericalBreakdown
from .graph import Graph, Path, PathResult, indicator_vector, make_result, weighted_incidence
from .linalg import SparseMatrix, least_squares_solve

EVENT_RTOL = 1e-9  # relative tie window for simultaneous events
LAMBDA_FLOOR = 1e-12  # largest candidate at or below this ends the path
WINDOW_RTOL = 1e-10  # candidates must sit strictly below lam_k by this margin
ZERO_TOL = 1e-12
BREAKDOWN_TOL = 1e-8


class Event(NamedTuple):
    kind: str  # "join" | "cross" | "terminate"
    edge: int | None = None  # 0-based column index
    sign: int = 0


@dataclass(frozen=True)
class Breakpoint:
    """State of the path on ``(lam_{k+1}, lam_k)``.

    ``active``/``signs``/``a``/``b`` describe the segment just below
    ``lam``, i.e. after the events at this breakpoint were applied. For the
    terminal breakpoint (``lam == 0``) they repeat the last segment.
    """

    step: int
    lam: float
    events: tuple[Event, ...]
    active: tuple[int, ...]
    signs: tuple[int, ...]
    a: np.ndarray
    b: np.ndarray

    def beta(self, lam: float, m: int) -> np.ndarray:
        out = np.zeros(m)
        if self.active:
            out[list(self.active)] = self.a - lam * self.b
        return out


class TimesCheck(NamedTuple):
    """General-form vs closed-form event times at one LARS iteration."""

    step: int
    lam: float
    connected: bool
    join_general: np.ndarray
    join_closed: np.ndarray
    cross_general: np.ndarray
    cross_closed: np.ndarray
    ratio_general: np.ndarray
    ratio_closed: np.ndarray

    @property
    def join_gap(self) -> float:
        return float(np.max(np.abs(self.join_general - self.join_closed), initial=0.0))

    @property
    def cross_gap(self) -> float:
        return float(np.max(np.abs(self.cross_general - self.cross_closed), initial=0.0))


@dataclass
class LarsTrace:
    graph: Graph
    source: int
    target: int
    breakpoints: list[Breakpoint]
    beta_final: np.ndarray
    result: PathResult | None
    checks: list[TimesCheck] = field(default_factory=list)

    @property
    def lambdas(self) -> list[float]:
        return [bp.lam for bp in self.breakpoints]

    @property
    def x_final(self) -> np.ndarray:
        return self.beta_final / self.graph.weights

    @property
    def length(self) -> float:
        return float(np.abs(self.beta_final).sum())

    def beta_at(self, lam: float) -> np.ndarray:
        return beta_at(self, lam)

    def active_edges(self, step: int) -> list[tuple[int, int]]:
        """1-based ``(tail, head)`` pairs active just below breakpoint ``step``.

        At the terminal breakpoint this is the support of ``beta(0)``.
        """
        bp = self.breakpoints[step - 1]
        if bp.lam == 0.0:
            idx = np.flatnonzero(np.abs(self.beta_final) > 1e-9 * max(1.0, np.abs(self.beta_final).max()))
        else:
            idx = bp.active
        return sorted(self.graph.edge(j)[:2] for j in idx)

    def settle_events(self) -> list[tuple[int, int, int]]:
        """``(step, vertex, root)`` for each join that attaches a new vertex."""
        g = self.graph
        owner = {self.source: self.source, self.target: self.target}
        out = []
        for bp in self.breakpoints:
            for ev in bp.events:
                if ev.kind != "join":
                    continue
                u, v, _ = g.edge(ev.edge)
                if u in owner and v in owner:
                    continue
                old, new = (u, v) if u in owner else (v, u)
                owner[new] = owner[old]
                out.append((bp.step, new, owner[old]))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "lambda", "event", "edge_u", "edge_v", "sign", "beta_l1"])
        m = self.graph.m
        for bp in self.breakpoints:
            l1 = float(np.abs(bp.beta(bp.lam, m)).sum()) if bp.lam > 0 else self.length
            for ev in bp.events:
                if ev.edge is None:
                    w.writerow([bp.step, _fmt(bp.lam), ev.kind, "", "", "", _fmt(l1)])
                else:
                    u, v, _ = self.graph.edge(ev.edge)
                    w.writerow([bp.step, _fmt(bp.lam), ev.kind, u, v, ev.sign, _fmt(l1)])
        return buf.getvalue()

    def sample_csv(self, lams: Sequence[float]) -> str:
        """``beta(lam)`` on a grid, one column per edge, for path plots."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda"] + [f"beta_{u}_{v}" for u, v, _ in self.graph.edges()])
        for lam in lams:
            w.writerow([_fmt(lam)] + [_fmt(x) for x in beta_at(self, lam)])
        return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def compute_affine_coeffs(QA, signs, y) -> tuple[np.ndarray, np.ndarray]:
    """Segment coefficients ``a = (QA^T QA)^+ QA^T y`` and ``b = (QA^T QA)^+ s``.

    ``a`` is the minimum-norm least-squares solution of ``QA a = y``;
    ``b`` solves the normal matrix against the sign vector. Raises
    :class:`NumericalBreakdown` when the normal equations for ``b`` are
    not met, which happens when the active columns are dependent.
    """
    QA = np.asarray(QA, dtype=float)
    signs = np.asarray(signs, dtype=float)
    if QA.ndim != 2 or QA.shape[1] == 0:
        return np.zeros(0), np.zeros(0)
    a = least_squares_solve(QA, y)
    G = QA.T @ QA
    b = least_squares_solve(G, signs)
    resid = np.max(np.abs(G @ b - signs))
    if not np.isfinite(resid) or resid > BREAKDOWN_TOL:
        raise NumericalBreakdown(f"active columns are dependent (residual {resid:.2e})")
    return a, b


def joining_times(c0: np.ndarray, c1: np.ndarray, inactive: np.ndarray, lam: float):
    """Joining times from the generic form.

    The correlation of an inactive column is affine in ``lam``:
    ``c_j(lam) = c0_j + lam c1_j``. It meets ``+-lam`` at
    ``c0_j / (+-1 - c1_j)``; the largest root inside ``(0, lam)`` is kept,
    along with the sign of the boundary it meets. Columns whose
    ``c0_j`` vanishes cannot leave the interval before ``lam = 0``.
    """
    times = np.zeros(c0.shape[0])
    signs = np.zeros(c0.shape[0], dtype=int)
    upper = lam * (1 - WINDOW_RTOL)
    scale = max(1.0, float(np.max(np.abs(c0), initial=0.0)))
    for sgn in (1, -1):
        denom = sgn - c1
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(np.abs(denom) > ZERO_TOL, c0 / denom, 0.0)
        ok = inactive & (np.abs(c0) > ZERO_TOL * scale) & (t > 0) & (t < upper) & (t > times)
        times[ok] = t[ok]
        signs[ok] = sgn
    return times, signs


def crossing_times(a: np.ndarray, b: np.ndarray, lam: float):
    """``a_j / b_j`` where it lies in ``(0, lam)``, else 0; also the raw ratios."""
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    a_eff = np.where(np.abs(a) > ZERO_TOL * scale, a, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(b != 0, a_eff / b, np.inf)
    ok = (ratio > 0) & (ratio < lam * (1 - WINDOW_RTOL))
    return np.where(ok, ratio, 0.0), ratio


def next_breakpoint(join_times, cross_times, join_signs=None, rtol: float = EVENT_RTOL):
    """Largest candidate time and every event within ``rtol`` of it.

    Returns ``(lam_next, events)``; events refer to positions in the
    ``join_times`` array (edge ids) and ``cross_times`` array (positions
    in the active list, translated by the caller). ``lam_next`` is 0 with
    a single terminate event when nothing exceeds :data:`LAMBDA_FLOOR`.
    """
    join_times = np.asarray(join_times, dtype=float)
    cross_times = np.asarray(cross_times, dtype=float)
    if join_signs is None:
        join_signs = np.ones(join_times.shape[0], dtype=int)
    best = max(float(np.max(join_times, initial=0.0)), float(np.max(cross_times, initial=0.0)))
    if best <= LAMBDA_FLOOR:
        return 0.0, [Event("terminate")]
    cut = best * (1 - rtol)
    events = [Event("join", int(j), int(join_signs[j])) for j in np.flatnonzero(join_times >= cut)]
    events += [Event("cross", int(k)) for k in np.flatnonzero(cross_times >= cut)]
    return best, events


def kkt_residual(Q: SparseMatrix, y, beta, lam: float, active_tol: float = 1e-12) -> float:
    """Largest violation of the lasso optimality conditions.

    Active coordinates need ``Q_j^T r = sign(beta_j) lam``; inactive ones
    need ``|Q_j^T r| <= lam``, with ``r = y - Q beta``.
    """
    beta = np.asarray(beta, dtype=float)
    corr = Q.rmatvec(np.asarray(y, dtype=float) - Q.matvec(beta))
    scale = max(1.0, float(np.max(np.abs(beta), initial=0.0)))
    act = np.abs(beta) > active_tol * scale
    viol = np.where(act, np.abs(corr - np.sign(beta) * lam), np.maximum(0.0, np.abs(corr) - lam))
    return float(np.max(viol, initial=0.0))


def beta_at(trace: LarsTrace, lam: float) -> np.ndarray:
    """Solution ``beta(lam)`` read off the piecewise-affine path."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    m = trace.graph.m
    bps = trace.breakpoints
    if not bps or lam >= bps[0].lam:
        return np.zeros(m)
    if lam == 0.0:
        return trace.beta_final.copy()
    for bp, nxt in zip(bps, bps[1:]):
        if nxt.lam <= lam < bp.lam:
            return bp.beta(lam, m)
    return bps[-1].beta(lam, m)


class _Forest:
    """Active edges viewed as trees hanging from ``s`` and ``t``."""

    def __init__(self, g: Graph, active: Sequence[int], signs: Sequence[int], s0: int, t0: int):
        self.g = g
        adj: dict[int, list[tuple[int, int, int]]] = {}
        for j, sg in zip(active, signs):
            u, v = int(g.tails[j]), int(g.heads[j])
            adj.setdefault(u, []).append((v, j, sg))
            adj.setdefault(v, []).append((u, j, sg))
        self.adj = adj
        self.s_tree = self._grow(s0, by_sign=False)
        self.connected = t0 in self.s_tree[0]
        self.t_tree = None if self.connected else self._grow(t0, by_sign=False)
        covered = set(self.s_tree[0]) | (set(self.t_tree[0]) if self.t_tree else set())
        self.valid = covered >= set(adj)
        if self.connected:
            self.potential = self._grow(s0, by_sign=True)[0]

    def _grow(self, root: int, by_sign: bool):
        """BFS from ``root``: distances (or signed potentials), parent edge, order."""
        dist = {root: 0.0}
        parent = {root: (None, None)}
        order = [root]
        queue = deque([root])
        w = self.g.weights
        while queue:
            u = queue.popleft()
            for v, j, sg in self.adj.get(u, ()):
                if v in dist:
                    continue
                if by_sign:
                    along = 1 if int(self.g.tails[j]) == u else -1
                    dist[v] = dist[u] + along * sg * w[j]
                else:
                    dist[v] = dist[u] + w[j]
                parent[v] = (u, j)
                order.append(v)
                queue.append(v)
        return dist, parent, order

    @staticmethod
    def subtree_sums(tree, values: dict):
        """Per non-root vertex ``v``: size and value-sum of the subtree at ``v``."""
        _, parent, order = tree
        size = {v: 1 for v in order}
        total = {v: values[v] for v in order}
        for v in reversed(order[1:]):
            p = parent[v][0]
            size[p] += size[v]
            total[p] += total[v]
        return size, total


def closed_form_times(g: Graph, s0: int, t0: int, active: Sequence[int], signs: Sequence[int],
                      lam: float):
    """Event times from tree sizes and root distances.

    Returns ``(join, cross, ratio)`` arrays (join over all edges, cross and
    raw ``a/b`` ratio over ``active`` positions), or ``None`` when the
    active edges are not one or two trees rooted at ``s``/``t``.
    Distances are measured inside the active trees.
    """
    forest = _Forest(g, active, signs, s0, t0)
    if not forest.valid:
        return None
    m = g.m
    join = np.zeros(m)
    upper = lam * (1 - WINDOW_RTOL)
    active_set = set(active)
    ls, s_parent, s_order = forest.s_tree
    if not forest.connected:
        lt, t_parent, t_order = forest.t_tree
        ns, nt = len(ls), len(lt)
        sum_s, sum_t = sum(ls.values()), sum(lt.values())
        for j in range(m):
            if j in active_set:
                continue
            u, v, w = int(g.tails[j]), int(g.heads[j]), float(g.weights[j])
            val = 0.0
            if u in ls and v in lt or v in ls and u in lt:
                a_s, b_t = (u, v) if u in ls else (v, u)
                gamma = ns * nt * (ls[a_s] + w + lt[b_t]) - nt * sum_s - ns * sum_t
                val = (ns + nt) / gamma
            elif (u in ls) != (v in ls) and u not in lt and v not in lt:
                inner = u if u in ls else v
                val = 1.0 / (ns * (ls[inner] + w) - sum_s)
            elif (u in lt) != (v in lt) and u not in ls and v not in ls:
                inner = u if u in lt else v
                val = 1.0 / (nt * (lt[inner] + w) - sum_t)
            if 0 < val < upper:
                join[j] = val

    ratio = np.zeros(len(active))
    pos = {j: k for k, j in enumerate(active)}
    if not forest.connected:
        for tree, l in ((forest.s_tree, ls), (forest.t_tree, lt)):
            size, total = _Forest.subtree_sums(tree, l)
            n_tree, sum_tree = len(l), sum(l.values())
            _, parent, order = tree
            for v in order[1:]:
                j = parent[v][1]
                ratio[pos[j]] = 1.0 / (n_tree / size[v] * total[v] - sum_tree)
    else:
        phi = forest.potential
        size, total = _Forest.subtree_sums(forest.s_tree, phi)
        n_tree, sum_tree = len(phi), sum(phi.values())
        on_path = set()
        v = t0
        while v != s0:
            p, j = s_parent[v]
            on_path.add(j)
            v = p
        for v in s_order[1:]:
            j = s_parent[v][1]
            if j in on_path:
                ratio[pos[j]] = 1.0 / (total[v] - size[v] / n_tree * sum_tree)
    cross = np.where((ratio > 0) & (ratio < upper), ratio, 0.0)
    return join, cross, ratio


def _has_cycle(g: Graph, edges: Sequence[int]) -> bool:
    parent = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for j in edges:
        ru, rv = find(int(g.tails[j])), find(int(g.heads[j]))
        if ru == rv:
            return True
        parent[ru] = rv
    return False


def lars_path(g: Graph, s: int, t: int, cross_check: bool = False,
              max_steps: int | None = None) -> LarsTrace:
    """Run LARS from ``lam = inf`` down to 0 for the ``s``-``t`` lasso.

    With ``cross_check`` the closed-form tree expressions for the event
    times are evaluated next to the generic ones at every iteration and
    stored on ``trace.checks``.

    Raises
    ------
    AssumptionA1Violated
        When simultaneous joins would close a cycle in the active set, or
        the terminal solution is not an ``s``-``t`` path.
    NumericalBreakdown
        When the active columns become numerically dependent.
    """
    s0, t0 = g.check_vertex(s), g.check_vertex(t)
    if s0 == t0:
        raise ValueError("source and target must differ")
    Q = weighted_incidence(g)
    y = indicator_vector(g.n, s, t)
    m = g.m
    if max_steps is None:
        max_steps = 4 * m + 10

    active: list[int] = []
    signs: list[int] = []
    a = b = np.zeros(0)
    lam = math.inf
    bps: list[Breakpoint] = []
    checks: list[TimesCheck] = []
    for step in range(1, max_steps + 1):
        # correlations along the current segment: c(lam) = c0 + lam c1
        if active:
            rows, QA = _active_block(Q, active)
            fit0 = np.zeros(g.n)
            fit1 = np.zeros(g.n)
            fit0[rows] = QA @ a
            fit1[rows] = QA @ b
            c0 = Q.rmatvec(y - fit0)
            c1 = Q.rmatvec(fit1)
        else:
            c0 = Q.rmatvec(y)
            c1 = np.zeros(m)
        inactive = np.ones(m, dtype=bool)
        inactive[active] = False
        jt, js = joining_times(c0, c1, inactive, lam)
        ct, ratio = crossing_times(a, b, lam)

        if cross_check:
            closed = closed_form_times(g, s0, t0, active, signs, lam)
            if closed is None:
                raise AssumptionA1Violated(f"step {step}: active edges are not trees rooted at s and t")
            cj, cc, cr = closed
            checks.append(TimesCheck(step, lam, _Forest(g, active, signs, s0, t0).connected,
                                     jt, cj, ct, cc, ratio, cr))

        lam_next, events = next_breakpoint(jt, ct, js)
        if events[0].kind == "terminate":
            bps.append(Breakpoint(step, 0.0, tuple(events), tuple(active), tuple(signs), a, b))
            break

        resolved = []
        leaving = set()
        for ev in events:
            if ev.kind == "cross":
                resolved.append(Event("cross", active[ev.edge], signs[ev.edge]))
                leaving.add(active[ev.edge])
            else:
                resolved.append(ev)
        joins = [ev for ev in resolved if ev.kind == "join"]
        kept = [(j, sg) for j, sg in zip(active, signs) if j not in leaving]
        active = [j for j, _ in kept] + [ev.edge for ev in joins]
        signs = [sg for _, sg in kept] + [ev.sign for ev in joins]
        if _has_cycle(g, active):
            edges = ", ".join(str(g.edge(ev.edge)[:2]) for ev in joins)
            raise AssumptionA1Violated(
                f"step {step}: simultaneous joins {edges} at lambda={lam_next:.6g} close a cycle")
        rows, QA = _active_block(Q, active)
        a, b = compute_affine_coeffs(QA, signs, y[rows])
        lam = lam_next
        bps.append(Breakpoint(step, lam, tuple(resolved), tuple(active), tuple(signs), a, b))
    else:
        raise NumericalBreakdown(f"no termination within {max_steps} steps")

    beta = np.zeros(m)
    if active:
        beta[active] = a
    trace = LarsTrace(g, s, t, bps, beta, None, checks)
    trace.result = _recover_path(g, s, t, beta)
    return trace


def _active_block(Q: SparseMatrix, active: Sequence[int]):
    """Rows touched by the active columns and the dense block restricted to them."""
    block = Q.columns(active)
    rows = np.flatnonzero(np.any(block != 0, axis=1))
    return rows, block[rows]


def _recover_path(g: Graph, s: int, t: int, beta: np.ndarray, tol: float = 1e-6) -> PathResult:
    x = beta / g.weights
    rounded = np.rint(x)
    if np.max(np.abs(x - rounded), initial=0.0) > tol or np.max(np.abs(rounded), initial=0.0) > 1:
        raise AssumptionA1Violated("terminal solution is not integral")
    support = np.flatnonzero(rounded)
    nxt = {}
    for j in support:
        u, v = int(g.tails[j]), int(g.heads[j])
        if rounded[j] < 0:
            u, v = v, u
        if u in nxt:
            raise AssumptionA1Violated("terminal solution branches")
        nxt[u] = v
    verts = [s - 1]
    while verts[-1] != t - 1:
        if verts[-1] not in nxt or len(verts) > g.n:
            raise AssumptionA1Violated("terminal solution is not an s-t path")
        verts.append(nxt[verts[-1]])
    if len(verts) - 1 != support.size:
        raise AssumptionA1Violated("terminal solution carries a cycle")
    return make_result(g, Path.from_vertices(g, [v + 1 for v in verts]))
