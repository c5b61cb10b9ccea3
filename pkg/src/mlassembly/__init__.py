"""Maximum-likelihood assembly of reads through a convex flow relaxation."""

from mlassembly.sequences import (
    Assembly,
    Read,
    ReadSet,
    count_occurrences,
    log_likelihood,
    simulate_reads,
)
from mlassembly.graph import Edge, PrefixGraph, build_prefix_graph, edge_length
from mlassembly.simplify import (
    SimplifyParams,
    add_break_hub,
    build_simplified_graph,
    compress_paths,
    remove_break_edges,
    transitive_reduce,
)
from mlassembly.solver import (
    FractionalSolution,
    build_program,
    initial_point,
    solve,
    solve_graph,
    verify_certificate,
)
from mlassembly.rounding import (
    VertexCounts,
    emit_assembly,
    euler_tours,
    round_and_assemble,
    round_vertex_counts,
    select_edges,
)
from mlassembly.query import QueryDP, SubstitutionModel, follow_probability, query_probability
from mlassembly.error_model import ErrorParams, build_error_graph, error_transitive_reduce

__version__ = "0.1.0"

__all__ = [
    "Assembly",
    "Edge",
    "ErrorParams",
    "FractionalSolution",
    "PrefixGraph",
    "QueryDP",
    "Read",
    "ReadSet",
    "SimplifyParams",
    "SubstitutionModel",
    "VertexCounts",
    "add_break_hub",
    "build_error_graph",
    "build_prefix_graph",
    "build_program",
    "build_simplified_graph",
    "compress_paths",
    "count_occurrences",
    "edge_length",
    "emit_assembly",
    "error_transitive_reduce",
    "euler_tours",
    "follow_probability",
    "initial_point",
    "log_likelihood",
    "query_probability",
    "remove_break_edges",
    "round_and_assemble",
    "round_vertex_counts",
    "select_edges",
    "simulate_reads",
    "solve",
    "solve_graph",
    "transitive_reduce",
    "verify_certificate",
]
