"""Prefix graphs for reads with substitution errors.

Overlaps are no longer exact, so every ordered pair may be joined by several
edges, one per plausible offset, each carrying the probability ``p`` that
the overlapping stretch of the destination read is observed when
sequencing from the source.  Vertex observation rates become
``y_v = sum_e p_e x_e`` over the out-edges of v.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from mlassembly.graph import Edge, PrefixGraph, read_vertices
from mlassembly.sequences import Read, ReadSet
from mlassembly.simplify import add_break_hub


@dataclass(frozen=True)
class ErrorParams:
    """Substitution rate and the (mu, sigma, d) tolerance used for pruning.

    ``mu=None`` takes the substitution rate itself as the mean error rate.
    """

    error_rate: float = 0.0
    mu: float | None = None
    sigma: float = 0.0
    d: float = 2.0
    min_overlap: int = 1
    floor_factor: float = 1e-3
    heuristic: bool = False

    def __post_init__(self):
        if not 0.0 <= self.error_rate < 1.0:
            raise ValueError("error_rate must be in [0, 1)")
        if self.mu is not None and not 0.0 <= self.mu < 1.0:
            raise ValueError("mu must be in [0, 1)")
        if self.sigma < 0 or self.d < 0:
            raise ValueError("sigma and d must be >= 0")
        if self.min_overlap < 1:
            raise ValueError("min_overlap must be >= 1")
        if not 0.0 < self.floor_factor <= 1.0:
            raise ValueError("floor_factor must be in (0, 1]")

    @property
    def mean_rate(self) -> float:
        return self.error_rate if self.mu is None else self.mu

    def tolerance_base(self) -> float:
        """1 - mu - d*sigma, the per-character slack factor."""
        base = 1.0 - self.mean_rate - self.d * self.sigma
        if base <= 0.0:
            raise ValueError(f"mu + d*sigma must be < 1 (got {1.0 - base:g})")
        return base

    def floor(self, overlap: int) -> float:
        return self.tolerance_base() ** overlap * self.floor_factor

    def to_dict(self) -> dict:
        return asdict(self)


def overlap_probability(a: Read | str, b: Read | str, o: int, eps: float) -> float:
    """Probability of reading b's prefix over the stretch a[o:] under rate ``eps``.

    Each overlapping position contributes 1 - eps on a match and eps/3 on a
    mismatch.  An empty overlap (o == len(a)) has probability 1.
    """
    a = a.seq if isinstance(a, Read) else a
    b = b.seq if isinstance(b, Read) else b
    if o < 0 or o > len(a):
        raise ValueError(f"offset {o} outside [0, {len(a)}]")
    k = len(a) - o
    if k > len(b):
        raise ValueError(f"overlap of {k} exceeds destination length {len(b)}")
    mism = sum(1 for u, v in zip(a[o:], b[:k]) if u != v)
    return (1.0 - eps) ** (k - mism) * (eps / 3.0) ** mism


def _mismatch_profile(a: str, b: str, offsets: range) -> np.ndarray:
    """Mismatch count of a[o:] against b[:len(a)-o] for every offset."""
    aa = np.frombuffer(a.encode(), dtype=np.uint8)
    bb = np.frombuffer(b.encode(), dtype=np.uint8)
    out = np.empty(len(offsets), dtype=np.int64)
    for t, o in enumerate(offsets):
        k = len(a) - o
        out[t] = int(np.count_nonzero(aa[o:] != bb[:k]))
    return out


def _pareto(cands: list[tuple[int, float]]) -> list[tuple[int, float]]:
    """Drop (l, p) dominated by another with l' <= l and p' >= p; ties keep the shortest."""
    keep: list[tuple[int, float]] = []
    best_p = -1.0
    for l, p in sorted(cands, key=lambda t: (t[0], -t[1])):
        if p > best_p:
            keep.append((l, p))
            best_p = p
    return keep


def build_error_graph(reads: ReadSet, params: ErrorParams, hub: bool = True) -> PrefixGraph:
    """All plausible overlap edges, several per pair when offsets compete.

    An offset o joins a to b when the overlap a[o:] (at least
    ``min_overlap`` long) fits on b's prefix and its probability clears
    ``params.floor``.  Zero-length edges only run from the (length, id)
    smaller read to the larger one so the zero-length subgraph stays acyclic.
    Break edges are represented by the hub (v->hub observed with
    probability (1-eps)^|v|); pass ``hub=False`` to leave it out, e.g. before
    path compression.
    """
    if len(reads) == 0:
        raise ValueError("cannot build a graph from an empty read set")
    eps = params.error_rate
    edges: list[Edge] = []
    for ra in reads:
        a = ra.seq
        for rb in reads:
            b = rb.seq
            lo = max(len(a) - len(b), 0)
            if ra.id == rb.id:
                lo = max(lo, 1)
            elif lo == 0 and (len(a), ra.id) > (len(b), rb.id):
                lo = 1
            hi = len(a) - params.min_overlap
            if hi < lo:
                continue
            offsets = range(lo, hi + 1)
            mism = _mismatch_profile(a, b, offsets)
            cands = []
            for o, mm in zip(offsets, mism):
                k = len(a) - o
                p = (1.0 - eps) ** (k - mm) * (eps / 3.0) ** mm
                if p > 0.0 and p >= params.floor(k):
                    cands.append((o, p))
            for oid, (o, p) in enumerate(_pareto(cands)):
                edges.append(Edge(ra.id, rb.id, o, a[:o], False, 0, p, oid))
    g = PrefixGraph(read_vertices(reads), edges, params={"error": params.to_dict()},
                    probabilistic=True)
    if hub:
        g = add_break_hub(g, hub_out_p=lambda s: (1.0 - eps) ** len(s))
    return g


def adjusted_y(g: PrefixGraph, x) -> dict[int, float]:
    """y_v = sum over out-edges of p_e x_e."""
    y = {v: 0.0 for v in g.vertices}
    for e, xe in zip(g.edges, x):
        y[e.src] += e.p * float(xe)
    return y


def error_transitive_reduce(g: PrefixGraph, params: ErrorParams,
                            heuristic: bool | None = None) -> PrefixGraph:
    """Drop i->k when some i->j->k is no longer and at least as probable.

    The strict rule removes (l, p) if l_ij + l_jk <= l and p <= p_ij p_jk.
    The heuristic form tests p (1 - mu - d sigma)^l <= p_ij p_jk instead,
    which removes a superset.  As in the exact reduction, removals are
    simultaneous, witnesses j differ from i and k, and hub edges are kept.
    """
    heuristic = params.heuristic if heuristic is None else heuristic
    base = params.tolerance_base()
    out: dict[int, list[tuple[int, int, float]]] = {}
    for e in g.edges:
        if g.is_hub_edge(e) or e.src == e.dst:
            continue
        out.setdefault(e.src, []).append((e.dst, e.length, e.p))
    # two-hop Pareto fronts per (i, k)
    fronts: dict[tuple[int, int], list[tuple[int, float]]] = {}
    for i, lst in out.items():
        acc: dict[int, list[tuple[int, float]]] = {}
        for j, l1, p1 in lst:
            if j == i:
                continue
            for k, l2, p2 in out.get(j, ()):
                if k == j:
                    continue
                acc.setdefault(k, []).append((l1 + l2, p1 * p2))
        for k, c in acc.items():
            fronts[(i, k)] = _pareto(c)
    keep = []
    for e in g.edges:
        front = None if g.is_hub_edge(e) else fronts.get((e.src, e.dst))
        if not front:
            keep.append(e)
            continue
        lhs = e.p * (base ** e.length if heuristic else 1.0)
        # tolerance absorbs rounding in the products (exact ties count as dominated)
        removed = any(l <= e.length and lhs <= p * (1 + 1e-12) for l, p in front)
        if not removed:
            keep.append(e)
    return g.copy(edges=keep)


def error_pipeline(reads: ReadSet, params: ErrorParams) -> PrefixGraph:
    """build (with hub) -> error transitive reduction.

    Path compression is not applied: without the exact classifier's break
    analysis, collapsing a vertex would silently remove its hub route.
    """
    return error_transitive_reduce(build_error_graph(reads, params), params)


def hub_probability(read_len: int, eps: float) -> float:
    return (1.0 - eps) ** read_len


__all__ = [
    "ErrorParams",
    "adjusted_y",
    "build_error_graph",
    "error_pipeline",
    "hub_probability",
    "error_transitive_reduce",
    "overlap_probability",
]
