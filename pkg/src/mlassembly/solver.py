"""Convex relaxation of maximum-likelihood assembly with a certified gap.

The program, over edge flows x >= 0 normalised to total length one, is

    maximise   sum_v w_v log(sum_{e out of v} p_e x_e) + sum_e m_e log x_e
    subject to inflow(v) = outflow(v) for every vertex, sum_e l_e x_e = 1.

It is solved with a primal log-barrier method (Newton steps on the
equality-constrained barrier problem, Schur complement on the constraints).

Optimality certificate.  The objective f is concave and positively
homogeneous up to a constant: f(a x) = f(x) + W log a with
W = sum_v w_v + sum_e m_e, hence grad f(x) . x = W.  For any feasible s,
f(s) <= f(x) + grad f(x) . s - W.  The feasible set is the convex hull of
simple cycles scaled to unit length, so grad f(x) . s is at most the maximum
cycle ratio rho* = max_C g(C) / l(C) with g = grad f(x).  Vertex potentials
pi with g_e - rho l_e + pi_src - pi_dst <= 0 on every cycle edge prove
rho* <= rho, and then ``gap = rho - W`` bounds f* - f(x).
"""

from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipy.sparse as sp
import scipy.linalg
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from mlassembly.exceptions import FormatError, InfeasibleError
from mlassembly.graph import PrefixGraph, strongly_connected_components, zero_length_order

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITERS = 100_000


@dataclass
class ConvexProgram:
    vertex_ids: list[int]
    weight: np.ndarray          # per vertex
    src: np.ndarray             # per edge, vertex positions
    dst: np.ndarray
    length: np.ndarray
    mult: np.ndarray
    p: np.ndarray
    const: float                # summed log-probabilities of compressed reads
    active: np.ndarray          # edges lying on some cycle
    roots: list[int]           # one vertex position per non-trivial SCC
    hub: int | None = None      # vertex position of the hub

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    @property
    def homogeneity(self) -> float:
        return float(self.weight.sum() + self.mult.sum())

    def out_flow(self, x: np.ndarray) -> np.ndarray:
        return np.bincount(self.src, weights=x, minlength=self.n_vertices)

    def in_flow(self, x: np.ndarray) -> np.ndarray:
        return np.bincount(self.dst, weights=x, minlength=self.n_vertices)

    def y(self, x: np.ndarray) -> np.ndarray:
        return np.bincount(self.src, weights=self.p * x, minlength=self.n_vertices)

    def objective(self, x: np.ndarray) -> float:
        y = self.y(x)
        wv = self.weight > 0
        me = self.mult > 0
        if np.any(y[wv] <= 0) or np.any(x[me] <= 0):
            return float("-inf")
        return float(np.dot(self.weight[wv], np.log(y[wv]))
                     + np.dot(self.mult[me], np.log(x[me])) + self.const)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        y = self.y(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(self.weight[self.src] > 0,
                         self.weight[self.src] * self.p / y[self.src], 0.0)
            g = g + np.where(self.mult > 0, self.mult / x, 0.0)
        return g

    def constraint_matrix(self) -> sp.csr_matrix:
        """All equality rows: in - out per vertex, then the length row.

        The solver itself drops one dependent conservation row per weakly
        connected piece of the active edges.
        """
        n, m = self.n_vertices, self.n_edges
        cols = np.arange(m)
        rows = np.concatenate([self.dst, self.src, np.full(m, n)])
        vals = np.concatenate([np.ones(m), -np.ones(m), self.length])
        return sp.csr_matrix((vals, (rows, np.tile(cols, 3))), shape=(n + 1, m))

    def residual(self, x: np.ndarray) -> float:
        cons = np.abs(self.in_flow(x) - self.out_flow(x)).max(initial=0.0)
        norm = abs(float(np.dot(self.length, x)) - 1.0)
        neg = float(max(0.0, -x.min(initial=0.0)))
        return float(max(cons, norm, neg))


@dataclass
class FractionalSolution:
    edge_ids: list[tuple[int, int]]     # (src, dst) per edge, graph order
    x: np.ndarray
    vertex_ids: list[int]
    y: np.ndarray
    objective: float
    gap: float
    feas_residual: float
    iters: int
    seed: int
    status: str = "converged"
    tol: float = DEFAULT_TOL
    potentials: np.ndarray | None = None
    ratio_bound: float | None = None
    gap_history: list[float] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def z(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.y)

    def y_of(self, v: int) -> float:
        return float(self.y[self.vertex_ids.index(v)])

    def to_dict(self) -> dict[str, Any]:
        doc = {
            "edges": [{"index": k, "src": s, "dst": d, "x": float(xv)}
                      for k, ((s, d), xv) in enumerate(zip(self.edge_ids, self.x))],
            "vertices": [{"id": v, "y": float(yv)} for v, yv in zip(self.vertex_ids, self.y)],
            "objective": self.objective,
            "gap": self.gap,
            "iters": self.iters,
            "seed": self.seed,
            "status": self.status,
            "tol": self.tol,
            "feas_residual": self.feas_residual,
            "gap_history": list(self.gap_history),
        }
        if self.potentials is not None:
            doc["certificate"] = {"potentials": [float(v) for v in self.potentials],
                                  "ratio_bound": self.ratio_bound}
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "FractionalSolution":
        try:
            edges = sorted(doc["edges"], key=lambda e: e.get("index", 0))
            cert = doc.get("certificate")
            return cls(
                edge_ids=[(int(e["src"]), int(e["dst"])) for e in edges],
                x=np.array([float(e["x"]) for e in edges]),
                vertex_ids=[int(v["id"]) for v in doc["vertices"]],
                y=np.array([float(v["y"]) for v in doc["vertices"]]),
                objective=float(doc["objective"]),
                gap=float(doc["gap"]),
                feas_residual=float(doc.get("feas_residual", 0.0)),
                iters=int(doc["iters"]),
                seed=int(doc["seed"]),
                status=doc.get("status", "converged"),
                tol=float(doc.get("tol", DEFAULT_TOL)),
                potentials=None if cert is None else np.array(cert["potentials"], dtype=float),
                ratio_bound=None if cert is None else float(cert["ratio_bound"]),
                gap_history=[float(v) for v in doc.get("gap_history", [])],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed solution document: {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "FractionalSolution":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise FormatError(f"solution JSON: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "FractionalSolution":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# building

def build_program(g: PrefixGraph) -> ConvexProgram:
    """Assemble the convex program for ``g``.

    Edges outside every strongly connected component can carry no
    circulation and are pinned to zero.
    """
    vids = list(g.vertices)
    pos = {v: k for k, v in enumerate(vids)}
    src = np.array([pos[e.src] for e in g.edges], dtype=np.int64)
    dst = np.array([pos[e.dst] for e in g.edges], dtype=np.int64)
    length = np.array([e.length for e in g.edges], dtype=float)
    mult = np.array([e.multiplicity for e in g.edges], dtype=float)
    p = np.array([e.p for e in g.edges], dtype=float)
    weight = np.array([g.vertices[v].weight for v in vids], dtype=float)

    comp_of = {}
    comps = strongly_connected_components(g)
    for c, comp in enumerate(comps):
        for v in comp:
            comp_of[v] = c
    active = np.array([comp_of[e.src] == comp_of[e.dst] for e in g.edges], dtype=bool)
    if g.edges and zero_length_order(g, np.flatnonzero(active)) is None:
        raise InfeasibleError("graph contains a zero-length cycle")

    n = len(vids)
    has_cycle_edge = np.zeros(n, dtype=bool)
    has_cycle_edge[src[active]] = True
    observable = np.zeros(n, dtype=bool)
    observable[src[active & (p > 0)]] = True
    for k, v in enumerate(vids):
        if weight[k] > 0 and not observable[k]:
            raise InfeasibleError(f"vertex {v} lies on no cycle and cannot be visited")
    bad = np.flatnonzero((mult > 0) & ~active)
    if bad.size:
        e = g.edges[int(bad[0])]
        raise InfeasibleError(f"compressed edge {e.src}->{e.dst} lies on no cycle")
    if not active.any():
        raise InfeasibleError("graph has no cycle")

    roots = []
    for comp in comps:
        k = pos[min(comp)]
        if has_cycle_edge[k]:
            roots.append(k)
    const = float(sum(e.log_p_interior for e in g.edges if e.multiplicity > 0))
    hub = None if g.hub is None else pos[g.hub]
    return ConvexProgram(vids, weight, src, dst, length, mult, p, const, active, roots, hub)


def _solution(g_prog: ConvexProgram, x: np.ndarray, edge_ids, **kw) -> FractionalSolution:
    return FractionalSolution(
        edge_ids=edge_ids, x=x, vertex_ids=list(g_prog.vertex_ids), y=g_prog.y(x),
        objective=g_prog.objective(x), feas_residual=g_prog.residual(x), **kw)


def initial_point(prog: ConvexProgram, seed: int = 0) -> FractionalSolution:
    """Concatenate-all-reads start: flow c on every v->hub->v pair.

    Compressed edges get no flow, so on a compressed graph the objective of
    this point is -inf; the solver does not start from it.
    """
    if prog.hub is None:
        raise InfeasibleError("initial_point needs a hub vertex")
    x = np.zeros(prog.n_edges)
    h = prog.hub
    to_hub = {}
    from_hub = {}
    for k in range(prog.n_edges):
        s, d = int(prog.src[k]), int(prog.dst[k])
        if d == h and s != h:
            to_hub.setdefault(s, k)
        elif s == h and d != h:
            from_hub.setdefault(d, k)
    total = 0.0
    for v in range(prog.n_vertices):
        if v == h:
            continue
        if v not in to_hub or v not in from_hub:
            raise InfeasibleError(f"vertex {prog.vertex_ids[v]} has no hub edges")
        total += prog.length[to_hub[v]]
    c = 1.0 / total
    for v in to_hub:
        x[to_hub[v]] = c
        x[from_hub[v]] = c
    ids = [(prog.vertex_ids[int(s)], prog.vertex_ids[int(d)]) for s, d in zip(prog.src, prog.dst)]
    return _solution(prog, x, ids, gap=float("inf"), iters=0, seed=seed, status="initial")


def _positive_circulation(prog: ConvexProgram) -> np.ndarray:
    """A circulation strictly positive on every active edge.

    Each active edge u->v is closed into a cycle through its component's root
    (root ~> u -> v ~> root) along BFS trees; the sum is normalised.
    """
    n = prog.n_vertices
    act = np.flatnonzero(prog.active)
    out_adj: list[list[int]] = [[] for _ in range(n)]
    in_adj: list[list[int]] = [[] for _ in range(n)]
    for k in act:
        out_adj[prog.src[k]].append(int(k))
        in_adj[prog.dst[k]].append(int(k))
    x = np.zeros(prog.n_edges)
    x[act] = 1.0
    for root in prog.roots:
        # out-tree: root ~> u ; in-tree: v ~> root
        for tree_adj, head_of, tail_of, demand_end in (
            (out_adj, prog.dst, prog.src, prog.src),
            (in_adj, prog.src, prog.dst, prog.dst),
        ):
            parent_edge = {root: -1}
            order = [root]
            queue = deque([root])
            while queue:
                u = queue.popleft()
                for k in tree_adj[u]:
                    w = int(head_of[k])
                    if w not in parent_edge:
                        parent_edge[w] = k
                        order.append(w)
                        queue.append(w)
            acc = dict.fromkeys(order, 0.0)
            for k in act:
                v = int(demand_end[k])
                if v in acc:
                    acc[v] += 1.0
            for w in reversed(order):
                k = parent_edge[w]
                if k < 0:
                    continue
                x[k] += acc[w]
                acc[int(tail_of[k])] += acc[w]
    x /= float(np.dot(prog.length, x))
    return x


class _Constraints:
    """Sparse equality constraints A x = b restricted to active edges."""

    def __init__(self, prog: ConvexProgram, act: np.ndarray):
        n = prog.n_vertices
        # one conservation row per connected piece is redundant; drop its first vertex
        adj = sp.csr_matrix((np.ones(len(act)), (prog.src[act], prog.dst[act])), shape=(n, n))
        _, label = connected_components(adj, directed=True, connection="weak")
        first = np.full(label.max() + 1, -1)
        for v in range(n - 1, -1, -1):
            first[label[v]] = v
        keep = np.ones(n, dtype=bool)
        keep[first] = False
        # vertices with no active edge have trivially balanced rows
        touched = np.zeros(n, dtype=bool)
        touched[prog.src[act]] = True
        touched[prog.dst[act]] = True
        keep &= touched
        row_of = -np.ones(n, dtype=np.int64)
        row_of[keep] = np.arange(keep.sum())
        self.row_of = row_of
        self.n_cons = int(keep.sum())
        m = len(act)
        s, d = prog.src[act], prog.dst[act]
        rows, cols, vals = [], [], []
        cols_e = np.arange(m)
        for ends, sign in ((d, 1.0), (s, -1.0)):
            r = row_of[ends]
            ok = r >= 0
            rows.append(r[ok])
            cols.append(cols_e[ok])
            vals.append(np.full(ok.sum(), sign))
        rows.append(np.full(m, self.n_cons))
        cols.append(cols_e)
        vals.append(prog.length[act])
        self.A = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_cons + 1, m))
        self.b = np.zeros(self.n_cons + 1)
        self.b[-1] = 1.0

    def potentials(self, nu: np.ndarray, n: int) -> tuple[np.ndarray, float]:
        pi = np.zeros(n)
        ok = self.row_of >= 0
        pi[ok] = nu[self.row_of[ok]]
        return pi, float(nu[-1])


def _certificate(prog: ConvexProgram, x: np.ndarray, act: np.ndarray, pi: np.ndarray,
                 rho_hint: float | None = None, passes: int = 0) -> tuple[float, np.ndarray]:
    """Cycle-ratio bound provable with potentials derived from ``pi``.

    With ``rho_hint`` the potentials are first raised Bellman-Ford style
    against weights g - rho_hint * l (at most ``passes`` sweeps).  Whatever
    the potentials, zero-length edges are then made tight by a longest-path
    sweep and the bound is the largest reduced ratio over the remaining
    edges, so the result is valid even if the raising did not settle.
    """
    g = prog.gradient(x)[act]
    s, d, l = prog.src[act], prog.dst[act], prog.length[act]
    pi = pi.copy()
    if rho_hint is not None:
        w = g - rho_hint * l
        for _ in range(passes):
            cand = pi[s] + w
            viol = cand > pi[d] + 1e-15 * (1.0 + np.abs(pi[d]))
            if not viol.any():
                break
            np.maximum.at(pi, d[viol], cand[viol])
    zero = np.flatnonzero(l == 0)
    if zero.size:
        # raise potentials along the zero-length DAG so those edges hold exactly
        succ: dict[int, list[int]] = {}
        indeg: dict[int, int] = {}
        for k in zero:
            succ.setdefault(int(s[k]), []).append(int(k))
            indeg[int(d[k])] = indeg.get(int(d[k]), 0) + 1
        stack = [v for v in succ if indeg.get(v, 0) == 0]
        while stack:
            u = stack.pop()
            for k in succ.get(u, ()):
                v = int(d[k])
                cand = pi[u] + g[k]
                if cand > pi[v]:
                    pi[v] = cand
                indeg[v] -= 1
                if indeg[v] == 0:
                    stack.append(v)
    pos = l > 0
    rho = float(np.max((g[pos] + pi[s[pos]] - pi[d[pos]]) / l[pos]))
    return rho, pi


class _Newton:
    def __init__(self, prog: ConvexProgram, act: np.ndarray):
        self.prog = prog
        self.act = act
        self.cons = _Constraints(prog, act)
        s = prog.src[act]
        self.src = s
        self.w_src = prog.weight[s]
        self.p = prog.p[act]
        self.m = prog.mult[act]
        self.n = prog.n_vertices
        # edge -> column in the rank-one block matrix (only weighted sources)
        weighted = np.flatnonzero(prog.weight > 0)
        col = -np.ones(self.n, dtype=np.int64)
        col[weighted] = np.arange(len(weighted))
        self.block_col = col[s]
        self.weighted_vertices = weighted

    def y(self, xa: np.ndarray) -> np.ndarray:
        return np.bincount(self.src, weights=self.p * xa, minlength=self.n)

    def barrier_value(self, xa: np.ndarray, mu: float) -> float:
        """Scaled barrier -f/mu - sum log x (inf outside the domain)."""
        if np.any(xa <= 0):
            return math.inf
        y = self.y(xa)
        wv = self.weighted_vertices
        if np.any(y[wv] <= 0):
            return math.inf
        f = np.dot(self.prog.weight[wv], np.log(y[wv])) + np.dot(self.m, np.log(xa))
        return float(-f / mu - np.sum(np.log(xa)))

    def system(self, xa: np.ndarray, mu: float, barrier: bool = True):
        """Factor the Newton system of the barrier problem at ``xa``.

        The Hessian is D + Q diag(a) Q^T (one rank-one block per weighted
        source vertex).  Introducing zeta = a * Q^T dx gives the SPD system
        (B D^-1 B^T + diag(0, 1/a)) [nu; zeta] = rhs with B = [A; Q^T],
        which avoids the cancellation of a Woodbury update.  Returns the
        barrier gradient and a KKT solver with iterative refinement.

        With ``barrier=False`` the gradient is that of -f alone and mu / x^2
        only regularises the step (a proximal Newton iteration whose fixed
        points are the KKT points of the unbarriered problem).
        """
        y = self.y(xa)
        ys = y[self.src]
        with np.errstate(divide="ignore", invalid="ignore"):
            g_f = np.where(self.w_src > 0, self.w_src * self.p / ys, 0.0) + self.m / xa
        grad = -g_f - mu / xa if barrier else -g_f
        dinv = xa * xa / (self.m + mu)
        d_diag = (self.m + mu) / (xa * xa)
        wv = self.weighted_vertices
        hasb = self.block_col >= 0
        Q = sp.csr_matrix((self.p[hasb], (np.flatnonzero(hasb), self.block_col[hasb])),
                          shape=(len(xa), len(wv)))
        Qt = Q.T.tocsr()
        inv_a = y[wv] ** 2 / self.prog.weight[wv]
        A = self.cons.A
        B = sp.vstack([A, Qt]).tocsr()
        Bt = B.T.tocsr()
        M = (B @ sp.diags(dinv) @ Bt).tocsc()
        M = M + sp.diags(np.concatenate([np.zeros(A.shape[0]), inv_a]))
        solve_m = self._factor(M)
        nc = A.shape[0]

        def reduced(f1, f2, f3):
            t1 = dinv * f1
            sol = solve_m(np.concatenate([A @ t1 - f2, Qt @ t1 - f3]))
            return dinv * (f1 - Bt @ sol), sol

        def kkt(f1, f2):
            """Solve H dx + A^T nu = f1, A dx = f2; returns (dx, nu, dx^T H dx)."""
            f3 = np.zeros(len(wv))
            dx, sol = reduced(f1, f2, f3)
            scale = np.abs(f1).max() + 1.0
            for _ in range(3):
                e1 = f1 - d_diag * dx - (Bt @ sol)
                e2 = f2 - A @ dx
                e3 = f3 - (Qt @ dx - sol[nc:] * inv_a)
                if max(np.abs(e1).max() / scale, np.abs(e2).max(), np.abs(e3).max()) < 1e-15:
                    break
                ddx, dsol = reduced(e1, e2, e3)
                dx = dx + ddx
                sol = sol + dsol
            qdx = Qt @ dx
            quad = float(np.sum(d_diag * dx * dx) + np.sum(qdx * qdx / inv_a))
            return dx, sol[:nc], quad

        return grad, kkt

    @staticmethod
    def _factor(M):
        """Return a solver for the SPD matrix ``M`` (diagonally rescaled)."""
        d = np.sqrt(np.maximum(M.diagonal(), 1e-300))
        if M.shape[0] <= 800:
            Ms = M.toarray() / d[:, None] / d[None, :]
            try:
                c = scipy.linalg.cho_factor(Ms, check_finite=False)
                return lambda rhs: scipy.linalg.cho_solve(c, rhs / d, check_finite=False) / d
            except np.linalg.LinAlgError:
                pinv = np.linalg.pinv(Ms)
                return lambda rhs: (pinv @ (rhs / d)) / d
        Dm = sp.diags(1.0 / d)
        Ms = (Dm @ M @ Dm).tocsc()
        try:
            # SPD: symmetric ordering, diagonal pivots
            lu = splu(Ms, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                      options={"SymmetricMode": True})
        except RuntimeError:
            try:
                lu = splu(Ms, permc_spec="COLAMD")
            except RuntimeError:
                # numerically singular: a tiny ridge, corrected by refinement
                lu = splu((Ms + 1e-13 * sp.identity(Ms.shape[0])).tocsc(), permc_spec="COLAMD")
        return lambda rhs: lu.solve(rhs / d) / d


def _step_cap(xa: np.ndarray, dx: np.ndarray, cap: float) -> float:
    neg = dx < 0
    if np.any(neg):
        cap = min(cap, 0.99 * float(np.min(-xa[neg] / dx[neg])))
    return cap


def _center(newton: _Newton, xa: np.ndarray, mu: float, budget: int):
    """Damped Newton on the scaled barrier until centred; returns (x, nu, kkt, steps)."""
    nu = kkt = None
    prev = math.inf
    steps = 0
    while steps < min(budget, 500):
        grad, kkt = newton.system(xa, mu)
        dx, nu, quad = kkt(-grad, newton.cons.b - newton.cons.A @ xa)
        steps += 1
        lam2 = quad / mu
        lam = math.sqrt(lam2)
        damped = 1.0 if lam < 0.25 else 1.0 / (1.0 + lam)
        t = _step_cap(xa, dx, damped)
        if lam >= 0.25 and mu > 1e-8:
            # longer steps where barrier values are still well resolved
            f0 = newton.barrier_value(xa, mu)
            s = _step_cap(xa, dx, 1.0)
            while s > t:
                if newton.barrier_value(xa + s * dx, mu) <= f0 - 0.1 * s * lam2:
                    t = s
                    break
                s *= 0.5
        xa = xa + t * dx
        # stop when centred, or when rounding noise stalls quadratic convergence
        if lam2 < 1e-12 or (lam < 0.25 and lam2 > 0.5 * prev):
            break
        prev = lam2 if lam < 0.25 else math.inf
    return xa, nu, kkt, steps


def _strong_support(prog: ConvexProgram, edges: np.ndarray) -> np.ndarray:
    """Edges of ``edges`` lying on a cycle that uses only ``edges``."""
    n = prog.n_vertices
    adj = sp.csr_matrix((np.ones(len(edges)), (prog.src[edges], prog.dst[edges])),
                        shape=(n, n))
    _, label = connected_components(adj, directed=True, connection="strong")
    return edges[label[prog.src[edges]] == label[prog.dst[edges]]]


def solve(prog: ConvexProgram, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
          seed: int = 0, edge_ids: list[tuple[int, int]] | None = None,
          shrink: float = 8.0) -> FractionalSolution:
    """Maximise the relaxed log-likelihood to a certified gap ``<= tol``.

    A barrier path is followed on all cycle edges.  Once the central-path
    tangent separates vanishing edges from the rest, the problem is
    re-solved on the surviving support (well conditioned, since no flow
    tends to zero there) and certified against the full graph.  The method
    is deterministic; ``seed`` is recorded for provenance only.  If
    ``max_iters`` Newton steps do not reach the tolerance the best point is
    returned with ``status="unconverged"``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if edge_ids is None:
        edge_ids = [(prog.vertex_ids[int(s)], prog.vertex_ids[int(d)])
                    for s, d in zip(prog.src, prog.dst)]
    act = np.flatnonzero(prog.active)
    newton = _Newton(prog, act)
    la = prog.length[act]
    # uniform start; Newton steps restore conservation (infeasible start)
    xa = np.full(len(act), 1.0 / float(la.sum()))
    W = prog.homogeneity
    n = prog.n_vertices
    # the scaled barrier -f/mu - sum log x is self-concordant only for mu <= 1
    mu = min(1.0, max(W, 1.0) / len(act))
    iters = 0
    best = None
    history: list[float] = []
    tried_supports: set[bytes] = set()

    def record(x, nu, cons, rho_hint=None, passes=0):
        nonlocal best
        pi_raw, _ = cons.potentials(nu, n)
        rho, pi = _certificate(prog, x, act, pi_raw, rho_hint, passes)
        gap = max(rho - W, 0.0)
        if best is None or gap < best[1]:
            best = (x.copy(), gap, pi, rho)
        history.append(best[1])
        return gap

    def crossover(support: np.ndarray, mu0: float) -> None:
        """Proximal Newton on the support, certified on the whole graph."""
        nonlocal iters
        sub = _Newton(prog, support)
        xs = prog_x[support].copy()
        delta = mu0
        last = math.inf
        for _ in range(60):
            if iters >= max_iters:
                return
            grad, kkt = sub.system(xs, delta, barrier=False)
            dx, nu_r, _ = kkt(-grad, sub.cons.b - sub.cons.A @ xs)
            iters += 1
            t = _step_cap(xs, dx, 1.0)
            xs = xs + t * dx
            if not np.all(np.isfinite(xs)):
                return
            x = np.zeros(prog.n_edges)
            x[support] = xs
            _, lam_r = sub.cons.potentials(nu_r, n)
            gap = record(x, nu_r, sub.cons, rho_hint=lam_r, passes=n + 1)
            log.debug("crossover |S|=%d delta=%.1e step=%.2f gap=%.3e", len(support), delta, t, gap)
            if best[1] <= tol:
                return
            if t < 0.5 and xs.min() < 1e-6 * xs.max():
                return              # support guess keeps an edge that wants to vanish
            if gap > 0.9 * last and delta <= 1e-10:
                return
            last = min(last, gap)
            delta = max(delta * 0.1, 1e-10)

    stalled = 0
    path_gap = math.inf
    while iters < max_iters:
        xa, nu, kkt, steps = _center(newton, xa, mu, max_iters - iters)
        iters += steps
        if nu is None:
            break
        prog_x = np.zeros(prog.n_edges)
        prog_x[act] = xa
        gap = record(prog_x, nu, newton.cons)
        log.debug("mu=%.3e gap=%.3e iters=%d", mu, gap, iters)
        if best[1] <= tol:
            break
        stalled = stalled + 1 if gap >= 0.5 * path_gap else 0
        path_gap = min(path_gap, gap)
        if stalled >= 3 or mu < 1e-30:
            break
        # predictor along the central path: H dx/dmu + A^T dnu/dmu = 1/x
        tangent, _, _ = kkt(1.0 / xa, np.zeros(len(newton.cons.b)))
        rate = mu * tangent / xa      # ~1 on vanishing edges, ~0 on the support
        if gap < 1e-2 * max(W, 1.0):
            support = _strong_support(prog, act[rate < 0.5])
            key = support.tobytes()
            if key not in tried_supports and len(support):
                tried_supports.add(key)
                crossover(support, mu)
                if best[1] <= tol:
                    break
        new_mu = mu / shrink
        move = (new_mu - mu) * tangent
        s = _step_cap(xa, move, 1.0)
        if s > 0.5:
            cand = xa + s * move
            xa = cand / float(np.dot(la, cand))
        mu = new_mu

    status = "converged" if best is not None and best[1] <= tol else "unconverged"
    if best is None:
        x0 = np.zeros(prog.n_edges)
        x0[act] = xa
        best = (x0, math.inf, None, None)
    x, gap, pi, rho = best
    sol = _solution(prog, x, edge_ids, gap=float(gap), iters=iters, seed=seed, status=status,
                    tol=tol, potentials=pi, ratio_bound=rho, gap_history=history)
    if sol.feas_residual > tol and status == "converged":
        sol.status = "unconverged"
    return sol


def solve_graph(g: PrefixGraph, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
                seed: int = 0) -> FractionalSolution:
    prog = build_program(g)
    return solve(prog, tol=tol, max_iters=max_iters, seed=seed,
                 edge_ids=[(e.src, e.dst) for e in g.edges])


def verify_certificate(g: PrefixGraph, sol: FractionalSolution) -> dict[str, float]:
    """Recompute residuals and the gap bound directly from graph edges.

    Independent of the solver's internal arrays: walks ``g.edges`` and
    checks every cycle edge against the stored potentials.
    """
    vpos = {v: k for k, v in enumerate(sol.vertex_ids)}
    n = len(sol.vertex_ids)
    out = np.zeros(n)
    inn = np.zeros(n)
    yv = np.zeros(n)
    norm = 0.0
    for e, xe in zip(g.edges, sol.x):
        out[vpos[e.src]] += xe
        inn[vpos[e.dst]] += xe
        yv[vpos[e.src]] += e.p * xe
        norm += e.length * xe
    residual = max(float(np.abs(out - inn).max()), abs(norm - 1.0), float(max(0.0, -sol.x.min())))
    objective = 0.0
    W = 0.0
    for v, vert in g.vertices.items():
        if vert.weight > 0:
            objective += vert.weight * math.log(yv[vpos[v]])
            W += vert.weight
    for e, xe in zip(g.edges, sol.x):
        if e.multiplicity > 0:
            objective += e.multiplicity * math.log(xe) + e.log_p_interior
            W += e.multiplicity
    comp = {}
    for c, vs in enumerate(strongly_connected_components(g)):
        for v in vs:
            comp[v] = c
    violation = 0.0
    ratio = -math.inf
    pi = sol.potentials
    for e, xe in zip(g.edges, sol.x):
        if comp[e.src] != comp[e.dst]:
            continue
        w = g.vertices[e.src].weight
        grad = (w * e.p / yv[vpos[e.src]] if w > 0 else 0.0) + (
            e.multiplicity / xe if e.multiplicity > 0 else 0.0)
        slack = grad + pi[vpos[e.src]] - pi[vpos[e.dst]]
        if e.length == 0:
            violation = max(violation, slack)
        else:
            ratio = max(ratio, slack / e.length)
    return {"residual": residual, "objective": objective, "ratio_bound": ratio,
            "gap": ratio - W, "zero_edge_violation": violation}
