"""Probability of observing a query string directly from a fractional solution.

A walk starts at any labelled position with mass equal to its edge's flow,
emits one character per position, and at the end of an edge continues along
an outgoing edge chosen with probability proportional to flow.  Zero-length
edges carry no positions; mass crossing them is propagated along the
(acyclic) zero-length subgraph before the next character is emitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mlassembly.exceptions import AssemblyError
from mlassembly.graph import PrefixGraph
from mlassembly.sequences import ALPHABET, check_sequence
from mlassembly.solver import FractionalSolution

_CODE = {c: k for k, c in enumerate(ALPHABET)}


@dataclass(frozen=True)
class SubstitutionModel:
    """``table[a, b]``: probability of reading base b when the true base is a."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.shape != (4, 4) or np.any(t < 0) or not np.allclose(t.sum(axis=1), 1.0):
            raise ValueError("substitution table must be a 4x4 row-stochastic matrix")
        object.__setattr__(self, "table", t)

    @classmethod
    def identity(cls) -> "SubstitutionModel":
        return cls(np.eye(4))

    @classmethod
    def uniform(cls, eps: float) -> "SubstitutionModel":
        if not 0.0 <= eps < 1.0:
            raise ValueError("error rate must be in [0, 1)")
        t = np.full((4, 4), eps / 3.0)
        np.fill_diagonal(t, 1.0 - eps)
        return cls(t)

    def pr(self, true_base: str, read_base: str) -> float:
        return float(self.table[_CODE[true_base], _CODE[read_base]])


def follow_probability(sol: FractionalSolution, i: int, j: int) -> float:
    """Share of vertex i's outgoing flow carried by edges i -> j."""
    out = 0.0
    to_j = 0.0
    for (s, d), x in zip(sol.edge_ids, sol.x):
        if s == i:
            out += x
            if d == j:
                to_j += x
    if out <= 0:
        raise AssemblyError(f"vertex {i} has no outgoing flow")
    return to_j / out


class QueryDP:
    """Precomputed position layout; ``log_probability`` runs one query."""

    def __init__(self, sol: FractionalSolution, g: PrefixGraph, model: SubstitutionModel | None = None,
                 cross_break: bool = True):
        if len(sol.x) != len(g.edges):
            raise ValueError("solution and graph disagree on the number of edges")
        self.model = model or SubstitutionModel.identity()
        vids = list(g.vertices)
        vpos = {v: k for k, v in enumerate(vids)}
        nv = len(vids)
        x = np.maximum(np.asarray(sol.x, dtype=float), 0.0)
        src = np.array([vpos[e.src] for e in g.edges], dtype=np.int64)
        dst = np.array([vpos[e.dst] for e in g.edges], dtype=np.int64)
        out_flow = np.bincount(src, weights=x, minlength=nv)
        usable = x > 0
        if not cross_break:
            usable &= np.array([not g.is_hub_edge(e) for e in g.edges], dtype=bool)
        with np.errstate(divide="ignore", invalid="ignore"):
            follow = np.where(out_flow[src] > 0, x / out_flow[src], 0.0)

        if not np.any(x[[k for k, e in enumerate(g.edges) if e.length > 0]] > 0):
            raise AssemblyError("solution carries no flow on any labelled edge")
        pos_edges = [k for k, e in enumerate(g.edges) if usable[k] and e.length > 0]
        # with breaks excluded every walk may be cut; the layout can even be empty
        self.empty = not pos_edges
        if self.empty:
            return
        lengths = np.array([g.edges[k].length for k in pos_edges], dtype=np.int64)
        first = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        self.n_pos = int(lengths.sum())
        self.first = first
        self.last = first + lengths - 1
        self.codes = np.frombuffer(
            "".join(g.edges[k].label for k in pos_edges).translate(_TRANSLATE).encode(),
            dtype=np.uint8).astype(np.int64)
        self.init = np.repeat(x[pos_edges], lengths)
        self.edge_src = src[pos_edges]
        self.edge_dst = dst[pos_edges]
        self.edge_follow = follow[pos_edges]
        self.nv = nv

        # zero-length edges grouped by topological level of their source
        zero = [k for k, e in enumerate(g.edges) if usable[k] and e.length == 0]
        level = np.zeros(nv, dtype=np.int64)
        if zero:
            succ: dict[int, list[int]] = {}
            indeg = np.zeros(nv, dtype=np.int64)
            for k in zero:
                succ.setdefault(int(src[k]), []).append(k)
                indeg[dst[k]] += 1
            frontier = [v for v in range(nv) if indeg[v] == 0]
            seen = 0
            while frontier:
                nxt = []
                for u in frontier:
                    seen += 1
                    for k in succ.get(u, ()):
                        w = int(dst[k])
                        level[w] = max(level[w], level[u] + 1)
                        indeg[w] -= 1
                        if indeg[w] == 0:
                            nxt.append(w)
                frontier = nxt
            if seen != nv:
                raise AssemblyError("zero-length cycle among flow-carrying edges")
        zero = np.array(zero, dtype=np.int64)
        self.zero_levels = []
        if zero.size:
            lv = level[src[zero]]
            for L in range(int(lv.max()) + 1):
                ks = zero[lv == L]
                if ks.size:
                    self.zero_levels.append((src[ks], dst[ks], follow[ks]))

    def _arrival(self, row: np.ndarray) -> np.ndarray:
        arr = np.bincount(self.edge_dst, weights=row[self.last], minlength=self.nv)
        for s, d, f in self.zero_levels:
            np.add.at(arr, d, f * arr[s])
        return arr

    def log_probability(self, s: str) -> float:
        check_sequence(s, allow_empty=True)
        if self.empty:
            return -math.inf
        row = self.init.copy()
        log_scale = 0.0
        tab = self.model.table
        for ch in s:
            c = _CODE[ch]
            emit = tab[self.codes, c]
            arr = self._arrival(row)
            new = np.empty_like(row)
            new[1:] = row[:-1]
            new[self.first] = self.edge_follow * arr[self.edge_src]
            new *= emit
            peak = float(new.max())
            if peak <= 0.0:
                return -math.inf
            # rescale to avoid underflow; only two rows ever live
            row = new / peak
            log_scale += math.log(peak)
        total = float(row.sum())
        return log_scale + math.log(total) if total > 0 else -math.inf

    def probability(self, s: str) -> float:
        return math.exp(self.log_probability(s))


_TRANSLATE = str.maketrans({c: chr(k) for k, c in enumerate(ALPHABET)})


def query_probability(sol: FractionalSolution, g: PrefixGraph, s: str,
                      model: SubstitutionModel | None = None, cross_break: bool = True) -> float:
    return QueryDP(sol, g, model, cross_break).probability(s)


def query_log_probability(sol: FractionalSolution, g: PrefixGraph, s: str,
                          model: SubstitutionModel | None = None, cross_break: bool = True) -> float:
    return QueryDP(sol, g, model, cross_break).log_probability(s)
