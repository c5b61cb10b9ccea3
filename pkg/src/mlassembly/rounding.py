"""From a fractional solution to circular contigs.

Vertex counts are rounded at random with the right expectation, a
minimum-length edge multiset with the prescribed degrees is selected, and
each connected piece of the resulting Eulerian multigraph is read off as
one circular contig.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment, linprog

from mlassembly.exceptions import AssemblyError, FormatError, InfeasibleError
from mlassembly.graph import PrefixGraph
from mlassembly.sequences import Assembly
from mlassembly.solver import FractionalSolution

SNAP = 1e-9


@dataclass
class VertexCounts:
    L: int
    counts: dict[int, int]
    seed: int = 0

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict[str, Any]:
        return {"L": self.L, "seed": self.seed,
                "counts": [{"id": v, "n": n} for v, n in sorted(self.counts.items())]}

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "VertexCounts":
        try:
            return cls(int(doc["L"]), {int(c["id"]): int(c["n"]) for c in doc["counts"]},
                       int(doc.get("seed", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed counts document: {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def load(cls, path: str | Path) -> "VertexCounts":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise FormatError(f"counts JSON: {exc}") from None


@dataclass
class EdgeSelection:
    multiplicity: np.ndarray        # per graph edge
    cost: int
    hub_degree: int = 0

    def edges(self) -> list[int]:
        return [k for k, c in enumerate(self.multiplicity) for _ in range(int(c))]


@dataclass
class IntegralAssembly:
    selection: EdgeSelection
    tours: list[list[int]]
    assembly: Assembly
    fragments: list[str] = field(default_factory=list)

    @property
    def total_length(self) -> int:
        return self.assembly.L

    def tours_dict(self) -> dict[str, Any]:
        return tours_to_dict(self.selection, self.tours)


def round_vertex_counts(g: PrefixGraph, sol: FractionalSolution, L: int,
                        seed: int = 0) -> VertexCounts:
    """n_v = floor(L y_v) plus one with probability frac(L y_v), independently.

    Values within 1e-9 of an integer are snapped so integral solutions round
    deterministically despite floating-point noise.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    rng = np.random.default_rng(seed)
    ids = sorted(v for v in sol.vertex_ids if v in g.vertices and g.vertices[v].weight > 0)
    u = rng.random(len(ids))
    pos = {v: k for k, v in enumerate(sol.vertex_ids)}
    counts = {}
    for v, r in zip(ids, u):
        t = L * max(float(sol.y[pos[v]]), 0.0)
        near = round(t)
        if abs(t - near) < SNAP:
            counts[v] = int(near)
            continue
        base = math.floor(t)
        counts[v] = base + int(r < t - base)
    return VertexCounts(L, counts, seed)


def _check_partners(g: PrefixGraph, counts: dict[int, int], allowed: set[int]) -> None:
    has_out = {e.src for e in g.edges if e.dst in allowed}
    has_in = {e.dst for e in g.edges if e.src in allowed}
    for v in sorted(counts):
        if counts[v] <= 0:
            continue
        outs, ins = v in has_out, v in has_in
        if not outs or not ins:
            side = "outgoing" if not outs else "incoming"
            raise InfeasibleError(f"vertex {v} (n={counts[v]}) has no usable {side} partner")


def select_edges(g: PrefixGraph, counts: VertexCounts, hub_cap: int | None = None,
                 method: str = "flow") -> EdgeSelection:
    """Minimum total length edge multiset with in = out = n_v at every read vertex.

    The hub, if present, takes any degree h <= hub_cap (default sum of n_v).
    ``method="flow"`` solves the degree-constrained min-cost flow LP (its
    constraint matrix is a network matrix, so the simplex vertex is
    integral); ``method="assignment"`` builds the replicated bipartite graph
    and solves it as a perfect assignment, which is only practical for small
    totals but follows the replication construction literally.
    """
    n = {v: int(counts.counts.get(v, 0)) for v in g.vertices if v != g.hub}
    total = sum(n.values())
    if total < 1:
        raise InfeasibleError("all vertex counts are zero; nothing to assemble")
    cap = total if hub_cap is None else int(hub_cap)
    allowed = {v for v, c in n.items() if c > 0}
    if g.hub is not None and cap > 0:
        allowed.add(g.hub)
    _check_partners(g, {v: c for v, c in n.items()}, allowed)
    if method == "flow":
        return _select_flow(g, n, cap, allowed)
    if method == "assignment":
        return _select_assignment(g, n, cap)
    raise ValueError(f"unknown method {method!r}")


def _cheapest_parallel(g: PrefixGraph, allowed: set[int]) -> dict[tuple[int, int], int]:
    best: dict[tuple[int, int], int] = {}
    for k, e in enumerate(g.edges):
        if e.src not in allowed or e.dst not in allowed:
            continue
        key = (e.src, e.dst)
        if key not in best or e.length < g.edges[best[key]].length:
            best[key] = k
    return best


def _select_flow(g: PrefixGraph, n: dict[int, int], cap: int, allowed: set[int]) -> EdgeSelection:
    cand = sorted(_cheapest_parallel(g, allowed).values())
    if not cand:
        raise InfeasibleError("no usable edges between vertices with positive counts")
    hub = g.hub if g.hub in allowed else None
    verts = sorted(v for v in allowed if v != hub)
    row = {v: k for k, v in enumerate(verts)}
    m = len(cand)
    nv = len(verts)
    # variables: edge multiplicities, then the hub degree h
    rows, cols, vals = [], [], []
    r_hub_out = 2 * nv
    r_hub_in = 2 * nv + 1
    for j, k in enumerate(cand):
        e = g.edges[k]
        if e.src == hub:
            rows.append(r_hub_out)
        else:
            rows.append(row[e.src])
        cols.append(j)
        vals.append(1.0)
        if e.dst == hub:
            rows.append(r_hub_in)
        else:
            rows.append(nv + row[e.dst])
        cols.append(j)
        vals.append(1.0)
    n_rows = 2 * nv + (2 if hub is not None else 0)
    n_vars = m + (1 if hub is not None else 0)
    if hub is not None:
        rows += [r_hub_out, r_hub_in]
        cols += [m, m]
        vals += [-1.0, -1.0]
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_vars))
    b = np.array([n[v] for v in verts] * 2 + ([0, 0] if hub is not None else []), dtype=float)
    c = np.array([g.edges[k].length for k in cand] + ([0.0] if hub is not None else []), dtype=float)
    bounds = [(0, None)] * m + ([(0, cap)] if hub is not None else [])
    res = linprog(c, A_eq=A, b_eq=b, bounds=bounds, method="highs-ds")
    if res.status != 0:
        raise InfeasibleError(f"no degree-feasible edge multiset exists: {res.message}")
    xk = np.rint(res.x[:m]).astype(np.int64)
    if np.abs(res.x[:m] - xk).max() > 1e-6:
        raise AssemblyError("edge selection LP returned a fractional vertex")
    mult = np.zeros(len(g.edges), dtype=np.int64)
    mult[cand] = xk
    hub_degree = int(round(res.x[m])) if hub is not None else 0
    sel = EdgeSelection(mult, int(sum(g.edges[k].length * int(v) for k, v in zip(cand, xk))),
                        hub_degree)
    check_degrees(g, sel, n)
    return sel


def _select_assignment(g: PrefixGraph, n: dict[int, int], cap: int) -> EdgeSelection:
    hub = g.hub
    slots: list[int] = []
    for v in sorted(n):
        slots += [v] * n[v]
    if hub is not None:
        slots += [hub] * cap
    size = len(slots)
    if size > 4000:
        raise ValueError(f"assignment formulation too large ({size} slots)")
    cheapest = _cheapest_parallel(g, set(g.vertices))
    big = 1.0 + sum(e.length for e in g.edges) * (size + 1)
    cost = np.full((size, size), big)
    for i, u in enumerate(slots):
        for j, v in enumerate(slots):
            if u == hub and v == hub:
                cost[i, j] = 0.0        # unused hub copy
            elif (u, v) in cheapest:
                cost[i, j] = g.edges[cheapest[(u, v)]].length
    r, c = linear_sum_assignment(cost)
    if np.any(cost[r, c] >= big):
        raise InfeasibleError("no perfect matching on the replicated bipartite graph")
    mult = np.zeros(len(g.edges), dtype=np.int64)
    hub_degree = 0
    for i, j in zip(r, c):
        u, v = slots[i], slots[j]
        if u == hub and v == hub:
            continue
        mult[cheapest[(u, v)]] += 1
        if u == hub:
            hub_degree += 1
    sel = EdgeSelection(mult, int(sum(e.length * int(k) for e, k in zip(g.edges, mult))), hub_degree)
    check_degrees(g, sel, n)
    return sel


def check_degrees(g: PrefixGraph, sel: EdgeSelection, n: dict[int, int] | None = None) -> None:
    """Raise unless in = out at every vertex (and both equal n_v when given)."""
    out = {v: 0 for v in g.vertices}
    inn = {v: 0 for v in g.vertices}
    for e, k in zip(g.edges, sel.multiplicity):
        out[e.src] += int(k)
        inn[e.dst] += int(k)
    for v in g.vertices:
        if out[v] != inn[v]:
            raise AssemblyError(f"vertex {v}: out-degree {out[v]} != in-degree {inn[v]}")
        if n is not None and v != g.hub and out[v] != n.get(v, 0):
            raise AssemblyError(f"vertex {v}: degree {out[v]} != count {n.get(v, 0)}")


def euler_tours(g: PrefixGraph, multiplicity: Sequence[int]) -> list[list[int]]:
    """One closed walk per connected piece, each edge copy used exactly once.

    Hierholzer's algorithm; at every vertex the unused edge with the lowest
    (dst id, edge index) is taken first and pieces are started from their
    lowest vertex id, so the output is fully deterministic.
    """
    sel = EdgeSelection(np.asarray(multiplicity, dtype=np.int64), 0)
    check_degrees(g, sel)
    out: dict[int, list[int]] = {}
    for k, c in enumerate(sel.multiplicity):
        if c:
            out.setdefault(g.edges[k].src, []).extend([k] * int(c))
    for v in out:
        # reversed so that pop() yields the lowest (dst, index) first
        out[v].sort(key=lambda k: (g.edges[k].dst, k), reverse=True)
    tours = []
    for start in sorted(out):
        if not out[start]:
            continue
        stack: list[tuple[int, int]] = [(start, -1)]
        circuit: list[int] = []
        while stack:
            v, via = stack[-1]
            if out.get(v):
                k = out[v].pop()
                stack.append((g.edges[k].dst, k))
            else:
                stack.pop()
                if via >= 0:
                    circuit.append(via)
        circuit.reverse()
        tours.append(circuit)
    return tours


def emit_assembly(tours: list[list[int]], g: PrefixGraph) -> Assembly:
    """Concatenate edge labels around each tour into a circular contig."""
    contigs = []
    for tour in tours:
        contig = "".join(g.edges[k].label for k in tour)
        if not contig:
            raise AssemblyError("tour of total length zero")
        contigs.append(contig)
    return Assembly(tuple(contigs))


def hub_fragments(tours: list[list[int]], g: PrefixGraph) -> list[str]:
    """Linear pieces between hub visits (each hub traversal is an assembly break)."""
    if g.hub is None:
        return []
    frags = []
    for tour in tours:
        cuts = [i for i, k in enumerate(tour) if g.edges[k].dst == g.hub]
        if not cuts:
            continue
        # rotate so the walk starts just after a hub arrival
        r = cuts[-1] + 1
        walk = tour[r:] + tour[:r]
        piece = []
        for k in walk:
            piece.append(g.edges[k].label)
            if g.edges[k].dst == g.hub:
                frags.append("".join(piece))
                piece = []
    return frags


def round_and_assemble(g: PrefixGraph, sol: FractionalSolution, L: int, seed: int = 0,
                       hub_cap: int | None = None) -> IntegralAssembly:
    counts = round_vertex_counts(g, sol, L, seed)
    sel = select_edges(g, counts, hub_cap)
    tours = euler_tours(g, sel.multiplicity)
    return IntegralAssembly(sel, tours, emit_assembly(tours, g), hub_fragments(tours, g))


def tours_to_dict(sel: EdgeSelection, tours: list[list[int]]) -> dict[str, Any]:
    return {"tours": [list(map(int, t)) for t in tours],
            "multiplicity": [int(k) for k in sel.multiplicity],
            "cost": int(sel.cost), "hub_degree": int(sel.hub_degree)}


def tours_from_dict(doc: dict[str, Any]) -> tuple[EdgeSelection, list[list[int]]]:
    try:
        sel = EdgeSelection(np.array(doc["multiplicity"], dtype=np.int64), int(doc["cost"]),
                            int(doc.get("hub_degree", 0)))
        return sel, [[int(k) for k in t] for t in doc["tours"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed tours document: {exc}") from None
