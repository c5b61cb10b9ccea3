import pytest

from mlassembly.graph import (Edge, PrefixGraph, Vertex, build_prefix_graph, has_zero_length_cycle,
                              strongly_connected_components)
from mlassembly.sequences import ReadSet, random_genome
from mlassembly.simplify import (SimplifyParams, add_break_hub, build_simplified_graph,
                                 classify_vertices, compress_paths, reference_pipeline,
                                 remove_break_edges, transitive_reduce)
from mlassembly.solver import solve_graph

from conftest import random_instance


def pairs(g):
    return {(e.src, e.dst): e.length for e in g.edges}


def chain_graph(n=10, step=2, k=6, seed=7):
    """Reads at a fixed offset along a line: only consecutive overlaps, all breaks."""
    genome = random_genome(step * n + k, seed=seed)
    seqs = [genome[step * i:step * i + k] for i in range(n)]
    verts = {i: Vertex(i, 1, s, i) for i, s in enumerate(seqs)}
    edges = []
    for i in range(n):
        for j in range(n):
            if j == i + 1:
                edges.append(Edge(i, j, step, seqs[i][:step]))
            else:
                edges.append(Edge(i, j, k, seqs[i], True))
    return PrefixGraph(verts, edges)


class TestTransitiveReduce:
    def test_removes_dominated_edge(self):
        reads = ReadSet.from_sequences(["AACCGG", "CCGGTT", "GGTTAA"])
        full = pairs(build_prefix_graph(reads))
        assert (full[(0, 1)], full[(1, 2)], full[(0, 2)]) == (2, 2, 4)
        assert (0, 2) not in pairs(transitive_reduce(build_prefix_graph(reads)))

    def test_unchanged_when_rule_never_fires(self):
        verts = {i: Vertex(i, 1, "ACGT", i) for i in range(3)}
        edges = [Edge(0, 1, 3, "ACG"), Edge(1, 2, 3, "ACG"), Edge(0, 2, 4, "ACGT", True),
                 Edge(2, 0, 4, "ACGT", True)]
        g = PrefixGraph(verts, edges)
        assert transitive_reduce(g).edge_multiset() == g.edge_multiset()

    def test_keeps_duplicate_chain(self):
        g = transitive_reduce(build_prefix_graph(ReadSet.from_sequences(["ACG", "ACG", "ACG"])))
        zero = {(e.src, e.dst) for e in g.edges if e.length == 0}
        assert {(0, 1), (1, 2)} <= zero

    @pytest.mark.parametrize("seed", range(5))
    def test_idempotent(self, seed):
        _, reads = random_instance(seed)
        once = transitive_reduce(build_prefix_graph(reads))
        assert transitive_reduce(once).edge_multiset() == once.edge_multiset()


class TestRemoveBreakEdges:
    def test_chain_interiors_lose_breaks(self):
        g = chain_graph()
        interior = set(range(1, 9))
        assert classify_vertices(g, SimplifyParams()) == interior
        r = remove_break_edges(g)
        for e in r.edges:
            if e.is_break:
                assert not (e.src in interior and e.dst in interior)

    def test_vertex_without_overlap_keeps_breaks(self):
        g = remove_break_edges(chain_graph())
        # the last read has no non-break out-edge
        assert any(e.is_break and e.src == 9 for e in g.edges)
        assert any(e.is_break and e.dst == 0 for e in g.edges)

    def test_isolated_read(self):
        g = build_prefix_graph(ReadSet.from_sequences(["ACGT"]))
        assert remove_break_edges(transitive_reduce(g)).edge_multiset() == g.edge_multiset()


class TestCompress:
    def test_chain_merges(self):
        seqs = ["AACC", "CCGG", "GGTT", "TTAA"]
        verts = {i: Vertex(i, 1, s, i) for i, s in enumerate(seqs)}
        edges = [Edge(0, 1, 2, "AA"), Edge(1, 2, 2, "CC"), Edge(2, 3, 2, "GG"),
                 Edge(3, 0, 2, "TT"), Edge(0, 0, 4, "AACC"), Edge(3, 3, 4, "TTAA")]
        g = compress_paths(PrefixGraph(verts, edges))
        merged = [e for e in g.edges if e.multiplicity > 0]
        assert len(merged) == 1
        e = merged[0]
        assert (e.src, e.dst, e.length, e.multiplicity, e.label) == (0, 3, 6, 2, "AACCGG")
        assert set(g.vertices) == {0, 3}

    def test_unequal_lengths_not_merged(self):
        seqs = ["AACCGG", "CCGGTT", "GTTAAC", "TTAACC"]
        verts = {i: Vertex(i, 1, s, i) for i, s in enumerate(seqs)}
        edges = [Edge(0, 1, 2, "AA"), Edge(1, 2, 5, "CCGGT"), Edge(2, 3, 1, "G"),
                 Edge(3, 0, 4, "TTAA"), Edge(0, 0, 6, "AACCGG"), Edge(3, 3, 6, "TTAACC")]
        g = compress_paths(PrefixGraph(verts, edges))
        assert g.edge_multiset() == PrefixGraph(verts, edges).edge_multiset()

    def test_two_chromosomes_stay_separable(self):
        # chromosomes X and XY; the read ending X branches to X's start and Y's start
        x = random_genome(16, seed=21)
        y = random_genome(8, seed=22)
        k = 5
        seqs = []
        for chrom in (x, x + y):
            ext = chrom + chrom
            seqs += [ext[p:p + k] for p in range(len(chrom))]
        reads = ReadSet.from_sequences(seqs)
        full = build_prefix_graph(reads)
        g = reference_pipeline(full)
        branch = {v for v in g.vertices if g.seq(v) == x[-k:]}
        assert branch, "the X/Y junction read must survive compression"
        assert solve_graph(g).objective == pytest.approx(solve_graph(full).objective, abs=1e-6)


class TestHub:
    def test_two_reads(self, disjoint_reads):
        g = add_break_hub(build_prefix_graph(disjoint_reads))
        hub = g.hub
        assert g.vertices[hub].weight == 0
        assert sum(1 for e in g.edges if g.is_hub_edge(e)) == 4
        assert not any(e.is_break for e in g.edges)
        assert not has_zero_length_cycle(g)

    def test_hub_paths_match_break_lengths(self, two_reads):
        full = build_prefix_graph(two_reads)
        g = add_break_hub(full)
        to_hub = {e.src: e.length for e in g.edges if e.dst == g.hub}
        from_hub = {e.dst: e.length for e in g.edges if e.src == g.hub}
        for v in two_reads:
            assert to_hub[v.id] == len(v.seq) and from_hub[v.id] == 0

    @pytest.mark.parametrize("seed", range(5))
    def test_strongly_connected(self, seed):
        _, reads = random_instance(seed)
        g = reference_pipeline(build_prefix_graph(reads))
        assert len(strongly_connected_components(g)) == 1


class TestDirectConstruction:
    @pytest.mark.parametrize("seed", range(15))
    def test_matches_reference_pipeline(self, seed):
        _, reads = random_instance(seed, count=(3, 12), read_len=(3, 7))
        direct = build_simplified_graph(reads, SimplifyParams(min_overlap=1))
        ref = reference_pipeline(build_prefix_graph(reads), SimplifyParams(min_overlap=1))
        assert set(direct.vertices) == set(ref.vertices)
        assert direct.edge_multiset() == ref.edge_multiset()

    @pytest.mark.parametrize("seed", range(5))
    def test_edge_count_bound(self, seed):
        _, reads = random_instance(seed, count=(6, 12))
        g = build_simplified_graph(reads, SimplifyParams(min_overlap=2))
        non_hub = sum(1 for e in g.edges if not g.is_hub_edge(e))
        assert len(g.edges) == non_hub + 2 * (len(g.vertices) - 1)

    def test_min_overlap_respected(self):
        _, reads = random_instance(4, count=(8, 10), read_len=(6, 6))
        g = build_simplified_graph(reads, SimplifyParams(min_overlap=3))
        for e in g.edges:
            if not g.is_hub_edge(e) and e.multiplicity == 0:
                assert len(g.seq(e.src)) - e.length >= 3

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            build_simplified_graph(ReadSet(()))

    def test_params_echoed(self):
        _, reads = random_instance(1)
        g = build_simplified_graph(reads, SimplifyParams(min_overlap=2))
        assert PrefixGraph.loads(g.dumps()).params["simplify"]["min_overlap"] == 2
