import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlassembly.exceptions import InfeasibleError
from mlassembly.graph import Edge, PrefixGraph, Vertex, build_prefix_graph
from mlassembly.sequences import Assembly, ReadSet, log_likelihood
from mlassembly.simplify import add_break_hub, reference_pipeline
from mlassembly.solver import (ConvexProgram, FractionalSolution, build_program, initial_point,
                               solve, solve_graph, verify_certificate)

from conftest import random_instance


def scaled(prog: ConvexProgram, alpha: float) -> ConvexProgram:
    return ConvexProgram(prog.vertex_ids, prog.weight, prog.src, prog.dst, prog.length * alpha,
                         prog.mult, prog.p, prog.const, prog.active, prog.roots, prog.hub)


class TestExamples:
    def test_single_read(self):
        sol = solve_graph(build_prefix_graph(ReadSet.from_sequences(["ACGG"])))
        assert sol.x == pytest.approx([0.25], abs=1e-9)
        assert sol.objective == pytest.approx(math.log(1 / 4), abs=1e-7)

    def test_two_overlapping_reads(self, two_reads):
        g = build_prefix_graph(two_reads)
        sol = solve_graph(g)
        x = dict(zip(sol.edge_ids, sol.x))
        assert x[(0, 1)] == pytest.approx(0.25, abs=1e-7)
        assert x[(1, 0)] == pytest.approx(0.25, abs=1e-7)
        assert sol.y == pytest.approx([0.25, 0.25], abs=1e-7)
        assert sol.objective == pytest.approx(2 * math.log(1 / 4), abs=1e-7)

    def test_two_reads_grid_refinement(self, two_reads):
        # feasible circulations: a on each overlap pair, b and c on the self-loops,
        # 4a + 4b + 4c = 1; the objective is ln(a+b) + ln(a+c)
        best = -math.inf
        for a in np.linspace(0, 0.25, 51):
            for b in np.linspace(0, 0.25 - a, 51):
                c = 0.25 - a - b
                if a + b > 0 and a + c > 0:
                    best = max(best, math.log(a + b) + math.log(a + c))
        assert solve_graph(build_prefix_graph(two_reads)).objective >= best - 1e-9

    def test_disjoint_reads_through_hub(self, disjoint_reads):
        g = reference_pipeline(build_prefix_graph(disjoint_reads))
        sol = solve_graph(g)
        y = {v: sol.y_of(v) for v in (0, 1)}
        assert y[0] == pytest.approx(1 / 8, abs=1e-7) and y[1] == pytest.approx(1 / 8, abs=1e-7)
        assert sol.objective == pytest.approx(2 * math.log(1 / 8), abs=1e-7)


class TestProgram:
    def test_uncompressed_has_no_multiplicities(self, two_reads):
        prog = build_program(build_prefix_graph(two_reads))
        assert not prog.mult.any() and prog.const == 0.0

    def test_multiplicity_term(self):
        verts = {0: Vertex(0, 1, "AACC", 0)}
        edges = [Edge(0, 0, 4, "AACC", multiplicity=2)]
        prog = build_program(PrefixGraph(verts, edges))
        x = np.array([0.25])
        assert prog.objective(x) == pytest.approx(3 * math.log(0.25))

    def test_constraint_rows(self, two_reads):
        from mlassembly.solver import _Constraints
        prog = build_program(build_prefix_graph(two_reads))
        full = prog.constraint_matrix().toarray()
        assert full.shape == (3, prog.n_edges)
        # conservation rows sum to zero, so one of them is dependent
        assert np.linalg.matrix_rank(full) == 2
        reduced = _Constraints(prog, np.ones(prog.n_edges, dtype=bool)).A.toarray()
        assert reduced.shape[0] == 2
        assert np.linalg.matrix_rank(np.vstack([full, reduced])) == 2

    def test_no_cycle_is_infeasible(self):
        verts = {0: Vertex(0, 1, "AC", 0), 1: Vertex(1, 1, "CG", 1)}
        with pytest.raises(InfeasibleError):
            build_program(PrefixGraph(verts, [Edge(0, 1, 1, "A")]))

    def test_zero_cycle_is_infeasible(self):
        verts = {0: Vertex(0, 1, "AC", 0), 1: Vertex(1, 1, "AC", 1)}
        edges = [Edge(0, 1, 0, ""), Edge(1, 0, 0, ""), Edge(0, 0, 2, "AC")]
        with pytest.raises(InfeasibleError):
            build_program(PrefixGraph(verts, edges))


class TestInitialPoint:
    def test_concatenation(self, disjoint_reads):
        prog = build_program(add_break_hub(build_prefix_graph(disjoint_reads)))
        sol = initial_point(prog)
        assert sol.feas_residual == 0.0
        assert sol.objective == pytest.approx(2 * math.log(1 / 8))

    def test_equals_concatenated_assembly(self, disjoint_reads):
        prog = build_program(add_break_hub(build_prefix_graph(disjoint_reads)))
        concat = Assembly.of("".join(disjoint_reads.seqs))
        assert initial_point(prog).objective == pytest.approx(log_likelihood(disjoint_reads, concat))

    def test_below_concatenation_in_general(self):
        _, reads = random_instance(6)
        sol = initial_point(build_program(add_break_hub(build_prefix_graph(reads))))
        concat = Assembly.of("".join(reads.seqs))
        # extra occurrences across read boundaries only raise the likelihood
        assert sol.objective <= log_likelihood(reads, concat) + 1e-12
        assert sol.objective == pytest.approx(len(reads) * math.log(1 / reads.read_len_total))

    def test_needs_hub(self, two_reads):
        with pytest.raises(InfeasibleError):
            initial_point(build_program(build_prefix_graph(two_reads)))


class TestCertificate:
    @pytest.mark.parametrize("seed", range(12))
    def test_converged_solutions_verify(self, seed):
        _, reads = random_instance(seed, count=(4, 10))
        for g in (build_prefix_graph(reads), reference_pipeline(build_prefix_graph(reads))):
            sol = solve_graph(g)
            assert sol.converged
            cert = verify_certificate(g, sol)
            assert cert["residual"] <= sol.tol
            assert max(cert["gap"], 0.0) <= sol.tol
            assert cert["objective"] == pytest.approx(sol.objective, abs=1e-9)

    def test_gap_history_monotone(self):
        _, reads = random_instance(2, count=(8, 10))
        sol = solve_graph(reference_pipeline(build_prefix_graph(reads)))
        h = sol.gap_history
        assert all(b <= a for a, b in zip(h, h[1:]))

    def test_iteration_limit_reports_unconverged(self):
        _, reads = random_instance(3, count=(8, 10))
        sol = solve_graph(reference_pipeline(build_prefix_graph(reads)), max_iters=2)
        assert sol.status == "unconverged"
        assert sol.gap > sol.tol
        assert np.isfinite(sol.objective)

    def test_positive_y(self):
        _, reads = random_instance(8)
        sol = solve_graph(reference_pipeline(build_prefix_graph(reads)))
        assert np.all(sol.y[:len(reads)] > 0)


class TestProperties:
    @given(st.integers(0, 10_000), st.floats(0.2, 5.0))
    def test_scale_invariance(self, seed, alpha):
        _, reads = random_instance(seed)
        prog = build_program(reference_pipeline(build_prefix_graph(reads)))
        a = solve(prog)
        b = solve(scaled(prog, alpha))
        assert b.objective == pytest.approx(a.objective - prog.homogeneity * math.log(alpha),
                                            abs=1e-6)

    @given(st.integers(0, 10_000))
    def test_upper_bounds_genome(self, seed):
        genome, reads = random_instance(seed)
        sol = solve_graph(reference_pipeline(build_prefix_graph(reads)))
        assert sol.objective >= log_likelihood(reads, Assembly.of(genome)) - 1e-6


class TestSerialisation:
    def test_round_trip(self, two_reads):
        sol = solve_graph(build_prefix_graph(two_reads))
        back = FractionalSolution.loads(sol.dumps())
        assert back.dumps() == sol.dumps()
        assert np.array_equal(back.x, sol.x)

    def test_deterministic(self):
        _, reads = random_instance(5)
        g = reference_pipeline(build_prefix_graph(reads))
        assert solve_graph(g, seed=3).dumps() == solve_graph(g, seed=3).dumps()

    def test_field_names(self, two_reads):
        import json
        doc = json.loads(solve_graph(build_prefix_graph(two_reads)).dumps())
        assert {"edges", "vertices", "objective", "gap", "iters", "seed"} <= set(doc)
        assert {"src", "dst", "x"} <= set(doc["edges"][0])
        assert {"id", "y"} <= set(doc["vertices"][0])
