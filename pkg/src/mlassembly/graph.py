"""The prefix graph over a read set, plus its JSON dump format."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from mlassembly.exceptions import FormatError
from mlassembly.sequences import Read, ReadSet


@dataclass(frozen=True)
class Vertex:
    id: int
    weight: int
    seq: str = ""
    read_id: int | None = None


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    length: int
    label: str
    is_break: bool = False
    multiplicity: int = 0
    # error model only: observation probability for the source read and
    # the summed log-probability of reads compressed into the edge
    p: float = 1.0
    overlap_id: int = 0
    log_p_interior: float = 0.0

    def __post_init__(self):
        if self.length < 0:
            raise ValueError(f"negative edge length {self.length}")
        if len(self.label) != self.length:
            raise ValueError(
                f"edge {self.src}->{self.dst}: label length {len(self.label)} != {self.length}")


@dataclass
class PrefixGraph:
    vertices: dict[int, Vertex]
    edges: list[Edge]
    hub: int | None = None
    params: dict[str, Any] = field(default_factory=dict)
    probabilistic: bool = False

    # -- convenience views -------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def read_vertices(self) -> list[int]:
        return [v for v in self.vertices if v != self.hub]

    def seq(self, v: int) -> str:
        return self.vertices[v].seq

    def out_index(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {v: [] for v in self.vertices}
        for k, e in enumerate(self.edges):
            out[e.src].append(k)
        return out

    def in_index(self) -> dict[int, list[int]]:
        inc: dict[int, list[int]] = {v: [] for v in self.vertices}
        for k, e in enumerate(self.edges):
            inc[e.dst].append(k)
        return inc

    def is_hub_edge(self, e: Edge) -> bool:
        return self.hub is not None and (e.src == self.hub or e.dst == self.hub)

    def copy(self, edges: Iterable[Edge] | None = None,
             vertices: dict[int, Vertex] | None = None, **changes) -> "PrefixGraph":
        g = PrefixGraph(
            vertices=dict(self.vertices if vertices is None else vertices),
            edges=list(self.edges if edges is None else edges),
            hub=self.hub,
            params=dict(self.params),
            probabilistic=self.probabilistic,
        )
        for k, v in changes.items():
            setattr(g, k, v)
        return g

    def edge_multiset(self) -> list[tuple]:
        """Sorted edge tuples, used for isomorphism checks between constructions."""
        return sorted((e.src, e.dst, e.length, e.label, e.is_break, e.multiplicity)
                      for e in self.edges)

    # -- JSON --------------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        edges = []
        for e in self.edges:
            d = {
                "src": e.src, "dst": e.dst, "length": e.length, "label": e.label,
                "is_break": e.is_break, "multiplicity": e.multiplicity,
            }
            if self.probabilistic:
                d.update(p=e.p, overlap_id=e.overlap_id, log_p_interior=e.log_p_interior)
            edges.append(d)
        doc: dict[str, Any] = {
            "vertices": [
                {"id": v.id, "weight": v.weight, "read_id": v.read_id, "seq": v.seq}
                for v in self.vertices.values()
            ],
            "edges": edges,
            "hub": self.hub,
        }
        if self.params:
            doc["params"] = self.params
        if self.probabilistic:
            doc["probabilistic"] = True
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "PrefixGraph":
        try:
            vertices = {
                int(v["id"]): Vertex(int(v["id"]), int(v["weight"]), v.get("seq", ""),
                                     v.get("read_id"))
                for v in doc["vertices"]
            }
            edges = [
                Edge(int(e["src"]), int(e["dst"]), int(e["length"]), e["label"],
                     bool(e["is_break"]), int(e["multiplicity"]),
                     float(e.get("p", 1.0)), int(e.get("overlap_id", 0)),
                     float(e.get("log_p_interior", 0.0)))
                for e in doc["edges"]
            ]
            hub = doc.get("hub")
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed graph document: {exc}") from None
        for e in edges:
            if e.src not in vertices or e.dst not in vertices:
                raise FormatError(f"edge {e.src}->{e.dst} references unknown vertex")
        return cls(vertices, edges, None if hub is None else int(hub),
                   dict(doc.get("params", {})), bool(doc.get("probabilistic", False)))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "PrefixGraph":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"graph JSON: {exc}") from None
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path: str | Path) -> "PrefixGraph":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def edge_length(a: Read | str, b: Read | str, same_vertex: bool = False) -> int:
    """Length of the shortest prefix of ``a`` whose remainder is a prefix of ``b``.

    With ``same_vertex`` the zero split is excluded so a self-loop is never
    shorter than one character.
    """
    a = a.seq if isinstance(a, Read) else a
    b = b.seq if isinstance(b, Read) else b
    for p in range(1 if same_vertex else 0, len(a)):
        if b.startswith(a[p:]):
            return p
    return len(a)


def make_edge(src: int, dst: int, seq_src: str, length: int, **kw) -> Edge:
    return Edge(src, dst, length, seq_src[:length], is_break=length == len(seq_src), **kw)


def pair_length(reads: ReadSet, i: int, j: int) -> int:
    """Edge length between read vertices, with identical reads ordered by id.

    Identical reads i < j are joined by a zero-length edge in the forward
    direction only; backwards (and on self-loops) the zero split is excluded,
    which keeps the zero-length subgraph acyclic.
    """
    a, b = reads[i].seq, reads[j].seq
    if i == j or (a == b and i > j):
        return edge_length(a, b, same_vertex=True)
    return edge_length(a, b)


def read_vertices(reads: ReadSet) -> dict[int, Vertex]:
    return {r.id: Vertex(r.id, 1, r.seq, r.id) for r in reads}


def build_prefix_graph(reads: ReadSet) -> PrefixGraph:
    """Complete directed prefix graph, self-loops included."""
    if len(reads) == 0:
        raise ValueError("cannot build a prefix graph from an empty read set")
    edges = []
    for a in reads:
        for b in reads:
            edges.append(make_edge(a.id, b.id, a.seq, pair_length(reads, a.id, b.id)))
    return PrefixGraph(read_vertices(reads), edges)


# -- structural checks ------------------------------------------------------

def zero_length_order(g: PrefixGraph, edges: Iterable[int] | None = None) -> list[int] | None:
    """Topological order of vertices along zero-length edges, or None on a cycle."""
    idx = range(len(g.edges)) if edges is None else edges
    succ: dict[int, list[int]] = defaultdict(list)
    indeg = {v: 0 for v in g.vertices}
    for k in idx:
        e = g.edges[k]
        if e.length == 0:
            succ[e.src].append(e.dst)
            indeg[e.dst] += 1
    order = [v for v, d in indeg.items() if d == 0]
    head = 0
    while head < len(order):
        v = order[head]
        head += 1
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                order.append(w)
    return order if len(order) == len(indeg) else None


def has_zero_length_cycle(g: PrefixGraph) -> bool:
    return zero_length_order(g) is None


def strongly_connected_components(g: PrefixGraph, edges: Iterable[int] | None = None) -> list[list[int]]:
    """Tarjan's algorithm (iterative); components in reverse topological order."""
    idx = range(len(g.edges)) if edges is None else edges
    succ: dict[int, list[int]] = {v: [] for v in g.vertices}
    for k in idx:
        e = g.edges[k]
        succ[e.src].append(e.dst)
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in g.vertices:
        if root in index:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, i = work[-1]
            nbrs = succ[v]
            if i < len(nbrs):
                work[-1] = (v, i + 1)
                w = nbrs[i]
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, 0))
                elif w in on_stack:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def with_edges(g: PrefixGraph, keep: Iterable[bool]) -> PrefixGraph:
    return g.copy(edges=[e for e, k in zip(g.edges, keep) if k])


__all__ = [
    "Edge",
    "PrefixGraph",
    "Vertex",
    "build_prefix_graph",
    "edge_length",
    "has_zero_length_cycle",
    "make_edge",
    "pair_length",
    "strongly_connected_components",
    "zero_length_order",
]
