"""Exhaustive ground-truth generators for tiny instances.

Nothing here scales; every routine refuses inputs whose search space is
above a fixed cap rather than running for hours.  None of these functions
share code with the optimisation modules they are used to check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from mlassembly.exceptions import InfeasibleError, SearchSpaceError
from mlassembly.graph import Edge, PrefixGraph, Vertex
from mlassembly.sequences import ALPHABET, Assembly, ReadSet, check_sequence, count_occurrences

MAX_SEARCH = 10**7


@dataclass
class IntegerSolution:
    x: tuple[int, ...]
    n: dict[int, int]
    L: int
    objective: float


def _integer_objective(g: PrefixGraph, x, L: int) -> float:
    y: dict[int, float] = {v: 0.0 for v in g.vertices}
    for e, xe in zip(g.edges, x):
        y[e.src] += e.p * xe
    total = 0.0
    for v, vert in g.vertices.items():
        if vert.weight > 0:
            if y[v] <= 0:
                return -math.inf
            total += vert.weight * math.log(y[v] / L)
    for e, xe in zip(g.edges, x):
        if e.multiplicity > 0:
            if xe <= 0:
                return -math.inf
            total += e.multiplicity * math.log(xe / L) + e.log_p_interior
    return total


def length_vector_count(lengths, L: int, x_max: int) -> int:
    """Number of vectors 0 <= x_e <= x_max with sum(l_e x_e) == L."""
    ways = [0] * (L + 1)
    ways[0] = 1
    for l in lengths:
        new = [0] * (L + 1)
        for t, w in enumerate(ways):
            if not w:
                continue
            for k in range(x_max + 1):
                s = t + k * l
                if s > L:
                    break
                new[s] += w
        ways = new
    return ways[L]


def ip_bruteforce(g: PrefixGraph, L: int, x_max: int) -> IntegerSolution:
    """Best integer circulation of total length L with every x_e <= x_max.

    The search space counted against the cap is the set of length-feasible
    vectors, which is what the enumeration actually visits (conservation is
    checked as soon as each vertex's edges are all fixed).  Ties keep the
    lexicographically smallest x.
    """
    if L < 1 or x_max < 0:
        raise ValueError("need L >= 1 and x_max >= 0")
    lengths = [e.length for e in g.edges]
    space = length_vector_count(lengths, L, x_max)
    if space > MAX_SEARCH:
        raise SearchSpaceError(f"{space} length-feasible vectors exceed the cap of {MAX_SEARCH}")
    m = len(g.edges)
    last = {v: -1 for v in g.vertices}
    for k, e in enumerate(g.edges):
        last[e.src] = max(last[e.src], k)
        last[e.dst] = max(last[e.dst], k)
    closes: list[list[int]] = [[] for _ in range(m)]
    for v, k in last.items():
        if k >= 0:
            closes[k].append(v)
    balance = {v: 0 for v in g.vertices}
    x = [0] * m
    best: list = [None, -math.inf]
    found = [False]

    def rec(k: int, rem: int) -> None:
        if k == m:
            if rem == 0:
                found[0] = True
                val = _integer_objective(g, x, L)
                if best[0] is None or val > best[1] + 1e-12:
                    best[0], best[1] = tuple(x), val
            return
        e = g.edges[k]
        top = x_max if e.length == 0 else min(x_max, rem // e.length)
        for c in range(top + 1):
            x[k] = c
            balance[e.src] += c
            balance[e.dst] -= c
            if all(balance[v] == 0 for v in closes[k]):
                rec(k + 1, rem - c * e.length)
            balance[e.src] -= c
            balance[e.dst] += c
        x[k] = 0

    rec(0, L)
    if not found[0]:
        raise InfeasibleError(f"no integer circulation of total length {L} with x <= {x_max}")
    xs = best[0]
    n = {v: 0 for v, vert in g.vertices.items() if v != g.hub}
    for e, xe in zip(g.edges, xs):
        if e.src in n:
            n[e.src] += xe
    return IntegerSolution(xs, n, L, best[1])


def overlap_multigraph(reads: ReadSet) -> PrefixGraph:
    """Every exact overlap as its own edge, not just the shortest one per pair.

    For each ordered pair (a, b) and offset o in 1..len(a) (0 for distinct
    reads where a is a prefix of b and precedes it in (length, id) order)
    with a[o:] a prefix of b, an edge of length o.  The full-read break edge
    o = len(a) is always present.  Any assembly whose consecutive read
    occurrences are at most one read length apart is a walk in this graph.
    """
    verts = {r.id: Vertex(r.id, 1, r.seq, r.id) for r in reads}
    edges = []
    for ra in reads:
        a = ra.seq
        for rb in reads:
            b = rb.seq
            lo = 1 if ra.id == rb.id or (len(a), ra.id) > (len(b), rb.id) else 0
            for o in range(max(lo, len(a) - len(b)), len(a) + 1):
                if b.startswith(a[o:]):
                    edges.append(Edge(ra.id, rb.id, o, a[:o], o == len(a)))
    return PrefixGraph(verts, edges)


def enumerate_best_assembly(reads: ReadSet, L: int) -> Assembly:
    """Highest-likelihood single circular string of length L, by exhaustion.

    Strings are visited in lexicographic order (A < C < G < T) and the first
    maximiser is returned.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if 4**L > MAX_SEARCH:
        raise SearchSpaceError(f"4^{L} strings exceed the cap of {MAX_SEARCH}")
    if len(reads) == 0:
        raise ValueError("empty read set")
    idx = np.arange(4**L, dtype=np.int64)
    digits = np.empty((4**L, L), dtype=np.int8)
    for pos in range(L):
        digits[:, L - 1 - pos] = (idx >> (2 * pos)) & 3
    code = {c: k for k, c in enumerate(ALPHABET)}
    score = np.zeros(4**L)
    mult: dict[str, int] = {}
    for r in reads:
        mult[r.seq] = mult.get(r.seq, 0) + 1
    for seq, times in mult.items():
        cnt = np.zeros(4**L, dtype=np.int64)
        for start in range(L):
            hit = np.ones(4**L, dtype=bool)
            for j, ch in enumerate(seq):
                hit &= digits[:, (start + j) % L] == code[ch]
            cnt += hit
        with np.errstate(divide="ignore"):
            score += times * np.log(cnt / L)
    best = int(np.argmax(score))
    if not np.isfinite(score[best]):
        # every string misses some read; the likelihood is -inf everywhere
        best = 0
    return Assembly.of("".join(ALPHABET[d] for d in digits[best]))


def matching_bruteforce(costs: dict[tuple[int, int], float], degrees: dict[int, int],
                        hub: int | None = None, hub_cap: int | None = None) -> tuple[float, dict]:
    """Cheapest edge multiset with in = out = degrees[v], by trying every pairing.

    Out-copies of the read vertices are paired with in-copies in every
    possible way.  With ``hub`` given, a pair (u, v) may instead be routed
    u -> hub -> v, at most ``hub_cap`` times (default: unlimited); for a fixed
    pairing the best such routes are the ones saving the most.  Returns the
    cost and the multiset as {(u, v): count}.
    """
    degrees = {v: d for v, d in degrees.items() if d > 0}
    total = sum(degrees.values())
    if total > 7:
        raise SearchSpaceError(f"{total} slots exceed the brute-force cap of 7")
    if total == 0:
        raise InfeasibleError("all degrees are zero")
    cap = total if hub_cap is None else min(hub_cap, total)
    slots = [v for v in sorted(degrees) for _ in range(degrees[v])]
    inf = math.inf

    def direct(u, v):
        return costs.get((u, v), inf)

    def via(u, v):
        if hub is None:
            return inf
        return costs.get((u, hub), inf) + costs.get((hub, v), inf)

    best_cost = inf
    best_pairs: dict = {}
    for perm in set(itertools.permutations(slots)):
        pairs = list(zip(slots, perm))
        base = [direct(u, v) for u, v in pairs]
        alt = [via(u, v) for u, v in pairs]
        saving = sorted(((base[k] - alt[k], k) for k in range(len(pairs)) if alt[k] < base[k]),
                        reverse=True)
        routed = {k for _, k in saving[:cap]}
        cost = sum(alt[k] if k in routed else base[k] for k in range(len(pairs)))
        if cost < best_cost - 1e-12:
            best_cost = cost
            best_pairs = {}
            for k, (u, v) in enumerate(pairs):
                keys = [(u, hub), (hub, v)] if k in routed else [(u, v)]
                for key in keys:
                    best_pairs[key] = best_pairs.get(key, 0) + 1
    if best_cost == inf:
        raise InfeasibleError("no perfect matching exists")
    return best_cost, best_pairs


def graph_costs(g: PrefixGraph) -> dict[tuple[int, int], int]:
    """Cheapest edge length per ordered pair, the matching's cost function."""
    out: dict[tuple[int, int], int] = {}
    for e in g.edges:
        key = (e.src, e.dst)
        out[key] = min(out.get(key, e.length), e.length)
    return out


def occurrence_query_oracle(assembly: Assembly, s: str) -> float:
    """Circular occurrences of s divided by the assembly length."""
    check_sequence(s, allow_empty=True)
    if assembly.L < 1:
        raise ValueError("empty assembly")
    return count_occurrences(assembly, s) / assembly.L
