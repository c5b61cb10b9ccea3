"""Optimum-preserving reductions of the prefix graph.

Two routes produce the same simplified graph:

* the reference pipeline, operating on an explicit (complete) prefix graph:
  ``transitive_reduce -> remove_break_edges -> compress_paths -> add_break_hub``;
* :func:`build_simplified_graph`, which never materialises break edges and
  only records overlaps of at least ``min_overlap`` characters.
"""

from __future__ import annotations

import math
import statistics
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Callable, Iterable

import numpy as np

from mlassembly.graph import Edge, PrefixGraph, Vertex, make_edge, read_vertices
from mlassembly.sequences import ReadSet


@dataclass(frozen=True)
class SimplifyParams:
    """Knobs for the compact/uniform classifier and overlap discovery.

    ``compact_tau=None`` means half the median read length.
    """

    min_overlap: int = 1
    compact_tau: int | None = None
    uniform_rho: float = 2.0
    length_slack: int = 1

    def __post_init__(self):
        if self.min_overlap < 1:
            raise ValueError("min_overlap must be >= 1")
        if self.compact_tau is not None and self.compact_tau < 1:
            raise ValueError("compact_tau must be >= 1")
        if self.uniform_rho < 1:
            raise ValueError("uniform_rho must be >= 1")
        if self.length_slack < 0:
            raise ValueError("length_slack must be >= 0")

    def tau_for(self, lengths: Iterable[int]) -> int:
        if self.compact_tau is not None:
            return self.compact_tau
        lengths = list(lengths)
        if not lengths:
            return 1
        return max(1, int(statistics.median(lengths)) // 2)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# transitive reduction

def _two_hop_best(out: dict[int, dict[int, int]]) -> dict[int, dict[int, int]]:
    """For every i, shortest i->j->k length over witnesses j not in {i, k}."""
    best: dict[int, dict[int, int]] = {}
    for i, nbrs in out.items():
        row: dict[int, int] = {}
        for j, lij in nbrs.items():
            if j == i:
                continue
            for k, ljk in out.get(j, {}).items():
                if k == j:
                    continue
                d = lij + ljk
                if d < row.get(k, math.inf):
                    row[k] = d
        best[i] = row
    return best


def transitive_reduce(g: PrefixGraph) -> PrefixGraph:
    """Drop every edge (i, k) with a witness j such that l_ij + l_jk <= l_ik.

    Removals are decided simultaneously on the input graph.  Hub edges are
    neither removed nor used as witnesses.
    """
    out: dict[int, dict[int, int]] = defaultdict(dict)
    for e in g.edges:
        if g.is_hub_edge(e) or e.src == e.dst:
            continue
        cur = out[e.src].get(e.dst)
        if cur is None or e.length < cur:
            out[e.src][e.dst] = e.length
    best = _two_hop_best(out)
    keep = []
    for e in g.edges:
        if g.is_hub_edge(e):
            keep.append(e)
            continue
        d = best.get(e.src, {}).get(e.dst)
        if d is None or d > e.length:
            keep.append(e)
    return g.copy(edges=keep)


# ---------------------------------------------------------------------------
# compact/uniform classification

@dataclass
class _Path:
    vertices: list[int]
    edges: list[int]
    cyclic: bool = False

    @property
    def interior(self) -> list[int]:
        return self.vertices if self.cyclic else self.vertices[1:-1]


def _nb_structure(g: PrefixGraph):
    nb_out: dict[int, list[int]] = {v: [] for v in g.vertices}
    nb_in: dict[int, list[int]] = {v: [] for v in g.vertices}
    for k, e in enumerate(g.edges):
        if e.is_break or g.is_hub_edge(e):
            continue
        nb_out[e.src].append(k)
        nb_in[e.dst].append(k)
    return nb_out, nb_in


def _unbranched_paths(g: PrefixGraph, nb_out, nb_in) -> list[_Path]:
    def simple(v):
        if v == g.hub or len(nb_out[v]) != 1 or len(nb_in[v]) != 1:
            return False
        return g.edges[nb_out[v][0]].dst != v

    paths = []
    seen: set[int] = set()
    for s in g.vertices:
        if s == g.hub or simple(s):
            continue
        for k in nb_out[s]:
            verts, edges = [s], [k]
            v = g.edges[k].dst
            while simple(v) and v not in seen:
                seen.add(v)
                verts.append(v)
                k = nb_out[v][0]
                edges.append(k)
                v = g.edges[k].dst
            verts.append(v)
            if len(verts) > 2:
                paths.append(_Path(verts, edges))
    for s in sorted(g.vertices):
        if s in seen or not simple(s):
            continue
        verts, edges = [], []
        v = s
        while v not in seen:
            seen.add(v)
            verts.append(v)
            k = nb_out[v][0]
            edges.append(k)
            v = g.edges[k].dst
        if v == s:
            paths.append(_Path(verts, edges, cyclic=True))
    return paths


def coverage_estimates(g: PrefixGraph, path: _Path) -> np.ndarray:
    """Per-vertex count of path reads whose placement overlaps the vertex's read."""
    lengths = np.array([g.edges[k].length for k in path.edges], dtype=float)
    if path.cyclic:
        n = len(path.vertices)
        period = lengths.sum()
        pos1 = np.concatenate([[0.0], np.cumsum(lengths[:-1])])
        lens1 = np.array([len(g.seq(v)) for v in path.vertices], dtype=float)
        reps = int(np.ceil(lens1.max() / max(period, 1.0))) + 1
        shifts = np.arange(-reps, reps + 1) * period
        pos = (pos1[None, :] + shifts[:, None]).ravel()
        lens = np.tile(lens1, len(shifts))
        qpos, qlen = pos1, lens1
    else:
        pos = np.concatenate([[0.0], np.cumsum(lengths)])
        lens = np.array([len(g.seq(v)) for v in path.vertices], dtype=float)
        qpos, qlen = pos[1:-1], lens[1:-1]
        n = len(qpos)
    counts = np.empty(n)
    for t in range(n):
        counts[t] = np.count_nonzero((pos < qpos[t] + qlen[t]) & (pos + lens > qpos[t]))
    return counts


def classify_vertices(g: PrefixGraph, p: SimplifyParams) -> set[int]:
    """Interior vertices of compact and uniform unbranched overlap paths."""
    nb_out, nb_in = _nb_structure(g)
    tau = p.tau_for(len(g.seq(v)) for v in g.read_vertices())
    chosen: set[int] = set()
    for path in _unbranched_paths(g, nb_out, nb_in):
        if any(g.edges[k].length > tau for k in path.edges):
            continue
        cov = coverage_estimates(g, path)
        if cov.min() <= 0 or cov.max() / cov.min() > p.uniform_rho:
            continue
        chosen.update(path.interior)
    return chosen


def remove_break_edges(g: PrefixGraph, p: SimplifyParams | None = None) -> PrefixGraph:
    """Delete break edges touching compact-and-uniform path interiors.

    A break edge u->w is kept whenever u has no non-break out-edge or w has no
    non-break in-edge, so no vertex is ever stranded.
    """
    p = p or SimplifyParams()
    chosen = classify_vertices(g, p)
    nb_out, nb_in = _nb_structure(g)
    keep = []
    for e in g.edges:
        if (e.is_break and not g.is_hub_edge(e) and (e.src in chosen or e.dst in chosen)
                and nb_out[e.src] and nb_in[e.dst]):
            continue
        keep.append(e)
    out = g.copy(edges=keep)
    out.params = {**g.params, "simplify": p.to_dict()}
    return out


# ---------------------------------------------------------------------------
# path compression

def _merge(g: PrefixGraph, run: list[Edge]) -> Edge:
    first = run[0]
    interior = [e.src for e in run[1:]]
    mult = sum(e.multiplicity for e in run) + sum(g.vertices[v].weight for v in interior)
    logp = sum(e.log_p_interior for e in run) + sum(math.log(e.p) for e in run[1:] if e.p > 0)
    return Edge(first.src, run[-1].dst, sum(e.length for e in run),
                "".join(e.label for e in run), False, mult,
                first.p, first.overlap_id, logp)


def _split_runs(lengths: list[int], slack: int) -> list[tuple[int, int]]:
    runs, start = [], 0
    lo = hi = lengths[0]
    for t in range(1, len(lengths)):
        nlo, nhi = min(lo, lengths[t]), max(hi, lengths[t])
        if nhi - nlo <= slack:
            lo, hi = nlo, nhi
        else:
            runs.append((start, t))
            start, lo, hi = t, lengths[t], lengths[t]
    runs.append((start, len(lengths)))
    return runs


def _compress(g: PrefixGraph, blocked: set[int], slack: int) -> PrefixGraph:
    out_idx, in_idx = g.out_index(), g.in_index()

    def interior(v):
        if v == g.hub or v in blocked or len(out_idx[v]) != 1 or len(in_idx[v]) != 1:
            return False
        a, b = g.edges[in_idx[v][0]], g.edges[out_idx[v][0]]
        return not (a.is_break or b.is_break or a.src == v)

    chains: list[list[int]] = []
    claimed: set[int] = set()
    for k, e in enumerate(g.edges):
        if interior(e.src) or not interior(e.dst):
            continue
        chain = [k]
        v = e.dst
        while interior(v):
            k = out_idx[v][0]
            chain.append(k)
            claimed.add(k)
            v = g.edges[k].dst
        claimed.add(chain[0])
        chains.append(chain)
    # cycles made only of interior vertices: anchor at the smallest id
    for v0 in sorted(g.vertices):
        if not interior(v0) or out_idx[v0][0] in claimed:
            continue
        chain, v = [], v0
        while True:
            k = out_idx[v][0]
            chain.append(k)
            claimed.add(k)
            v = g.edges[k].dst
            if v == v0:
                break
        chains.append(chain)

    removed_edges: set[int] = set()
    removed_vertices: set[int] = set()
    new_edges: list[Edge] = []
    for chain in chains:
        lengths = [g.edges[k].length for k in chain]
        for a, b in _split_runs(lengths, slack):
            if b - a < 2:
                continue
            run = [g.edges[k] for k in chain[a:b]]
            new_edges.append(_merge(g, run))
            removed_edges.update(chain[a:b])
            removed_vertices.update(e.src for e in run[1:])
    edges = [e for k, e in enumerate(g.edges) if k not in removed_edges] + new_edges
    vertices = {v: x for v, x in g.vertices.items() if v not in removed_vertices}
    return g.copy(edges=edges, vertices=vertices)


def compress_paths(g: PrefixGraph, length_slack: int | None = None) -> PrefixGraph:
    """Collapse unbranched runs of near-equal edge lengths into single edges.

    A vertex is collapsed only if its total in- and out-degree are both one and
    neither edge is a break edge, so the flow through it is forced.  The merged
    edge's ``multiplicity`` counts the vertices it absorbed.
    """
    if length_slack is None:
        length_slack = g.params.get("simplify", {}).get("length_slack", 1)
    return _compress(g, set(), length_slack)


# ---------------------------------------------------------------------------
# break hub

def add_break_hub(g: PrefixGraph, hub_out_p: Callable[[str], float] | None = None) -> PrefixGraph:
    """Replace all explicit break edges by a dummy vertex.

    Every read vertex v gets v->hub (label seq(v)) and hub->v (empty label).
    ``hub_out_p`` optionally assigns observation probabilities to v->hub.
    """
    if g.hub is not None:
        raise ValueError("graph already has a hub")
    hub = max(g.vertices) + 1
    edges = [e for e in g.edges if not e.is_break]
    vertices = dict(g.vertices)
    vertices[hub] = Vertex(hub, 0, "", None)
    for v in sorted(g.vertices):
        s = g.seq(v)
        p = hub_out_p(s) if hub_out_p is not None else 1.0
        edges.append(Edge(v, hub, len(s), s, False, 0, p))
    for v in sorted(g.vertices):
        edges.append(Edge(hub, v, 0, "", False, 0))
    return g.copy(edges=edges, vertices=vertices, hub=hub)


def reference_pipeline(g: PrefixGraph, p: SimplifyParams | None = None) -> PrefixGraph:
    p = p or SimplifyParams()
    g = remove_break_edges(transitive_reduce(g), p)
    return add_break_hub(compress_paths(g, p.length_slack))


# ---------------------------------------------------------------------------
# direct construction

def find_overlaps(reads: ReadSet, min_overlap: int) -> dict[int, dict[int, int]]:
    """Non-break edge lengths l_ij for every pair overlapping by >= min_overlap.

    Uses a dictionary of read prefixes; memory is linear in the number of
    prefix entries, i.e. in total read characters.
    """
    index: dict[str, list[int]] = defaultdict(list)
    for r in reads:
        for k in range(min_overlap, len(r.seq) + 1):
            index[r.seq[:k]].append(r.id)
    out: dict[int, dict[int, int]] = {}
    for r in reads:
        a, i = r.seq, r.id
        row: dict[int, int] = {}
        for p in range(0, len(a) - min_overlap + 1):
            hits = index.get(a[p:])
            if not hits:
                continue
            for j in hits:
                if j in row:
                    continue
                if p == 0 and (j == i or (reads[j].seq == a and j < i)):
                    continue
                if p == len(a):
                    continue
                row[j] = p
        out[i] = row
    return out


def _break_survival(reads: ReadSet, nb: dict[int, dict[int, int]]):
    """Describe which break pairs survive transitive reduction.

    Returns ``(explicit, exclusions)``: for vertices in ``explicit`` the
    surviving break targets are listed; for all others they are every vertex
    not in ``exclusions[i]``.
    """
    V = [r.id for r in reads]
    size = {r.id: len(r.seq) for r in reads}
    best = _two_hop_best(nb)
    zpred: dict[int, list[int]] = defaultdict(list)
    for i, row in nb.items():
        for k, l in row.items():
            if l == 0 and k != i:
                zpred[k].append(i)

    def c_removed(i: int, k: int) -> bool:
        return any(j != i and j not in nb[i] for j in zpred.get(k, ()))

    explicit: dict[int, set[int]] = {}
    exclusions: dict[int, set[int]] = {}
    for i in V:
        q = [j for j, l in nb[i].items() if j != i and l + size[j] <= size[i]]
        a_removed = {k for k, d in best[i].items() if d <= size[i]}
        if q:
            cand = set(V)
            for j in q:
                cand &= set(nb[j]) | {j}
            explicit[i] = {k for k in cand
                           if k not in nb[i] and k not in a_removed and not c_removed(i, k)}
        else:
            excl = set(nb[i]) | a_removed
            excl.update(k for k in zpred if c_removed(i, k))
            exclusions[i] = excl
    return explicit, exclusions


def _blocked_vertices(reads: ReadSet, nb_orig, nb_after, chosen: set[int]) -> set[int]:
    """Vertices that still carry a break edge after break-edge removal.

    A surviving break pair u->w is kept unless one endpoint is classified, and
    always kept when u has no overlap out-edge or w no overlap in-edge.
    """
    V = [r.id for r in reads]
    explicit, exclusions = _break_survival(reads, nb_orig)
    nb_out_deg = {i: len(nb_after[i]) for i in V}
    nb_in_deg = dict.fromkeys(V, 0)
    for i in V:
        for k in nb_after[i]:
            nb_in_deg[k] += 1

    def kept(u: int, w: int) -> bool:
        if u not in chosen and w not in chosen:
            return True
        return nb_out_deg[u] == 0 or nb_in_deg[w] == 0

    unchosen = {v for v in V if v not in chosen}
    no_in = {w for w in V if nb_in_deg[w] == 0}
    blocked: set[int] = set()

    for u, targets in explicit.items():
        if any(kept(u, w) for w in targets):
            blocked.add(u)
            blocked.update(w for w in targets if kept(u, w))
    for u, excl in exclusions.items():
        if nb_out_deg[u] == 0:
            allowed_w = None
        elif u in chosen:
            allowed_w = no_in
        else:
            allowed_w = unchosen | no_in
        if allowed_w is None:
            ok = len(V) - len(excl) > 0
        else:
            ok = len(allowed_w) - len(allowed_w & excl) > 0
        if ok:
            blocked.add(u)

    # in-side for generic sources: u reaches every w outside its exclusions
    excluded_by: dict[int, set[int]] = defaultdict(set)
    for u, excl in exclusions.items():
        for w in excl:
            excluded_by[w].add(u)
    generic = set(exclusions)
    free_generic = {u for u in generic if u not in chosen or nb_out_deg[u] == 0}
    zero_out_generic = {u for u in generic if nb_out_deg[u] == 0}
    for w in V:
        if w in blocked:
            continue
        if nb_in_deg[w] == 0:
            sources = generic
        elif w in chosen:
            sources = zero_out_generic
        else:
            sources = free_generic
        if len(sources) - len(sources & excluded_by.get(w, set())) > 0:
            blocked.add(w)
    return blocked


def _reduce_nb(reads: ReadSet, nb: dict[int, dict[int, int]]) -> dict[int, dict[int, int]]:
    """Transitive reduction of recorded overlap edges, break witnesses included."""
    size = {r.id: len(r.seq) for r in reads}
    best = _two_hop_best(nb)
    out: dict[int, dict[int, int]] = {}
    for i, row in nb.items():
        q = [(j, l) for j, l in row.items() if j != i]
        kept_row = {}
        for k, lik in row.items():
            d = best[i].get(k)
            if d is not None and d <= lik:
                continue
            # witness i->j (overlap) then j->k (break)
            if any(j != k and k not in nb[j] and lij + size[j] <= lik for j, lij in q):
                continue
            kept_row[k] = lik
        out[i] = kept_row
    return out


def build_simplified_graph(reads: ReadSet, p: SimplifyParams | None = None) -> PrefixGraph:
    """Simplified graph built straight from reads, without break edges in memory."""
    if len(reads) == 0:
        raise ValueError("cannot build a graph from an empty read set")
    p = p or SimplifyParams()
    nb = find_overlaps(reads, p.min_overlap)
    nb_after = _reduce_nb(reads, nb)
    edges = [make_edge(i, k, reads[i].seq, l)
             for i in sorted(nb_after) for k, l in sorted(nb_after[i].items())]
    g = PrefixGraph(read_vertices(reads), edges, params={"simplify": p.to_dict()})
    chosen = classify_vertices(g, p)
    blocked = _blocked_vertices(reads, nb, nb_after, chosen)
    g = _compress(g, blocked, p.length_slack)
    return add_break_hub(g)


__all__ = [
    "SimplifyParams",
    "add_break_hub",
    "build_simplified_graph",
    "classify_vertices",
    "compress_paths",
    "coverage_estimates",
    "find_overlaps",
    "reference_pipeline",
    "remove_break_edges",
    "transitive_reduce",
]
