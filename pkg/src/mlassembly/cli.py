"""Command-line pipeline driver.

Each subcommand is one stage; outputs are written atomically and a single
key=value log line per stage goes to stderr.

Exit codes: 0 success, 1 usage or parse error, 2 infeasible instance,
3 solver did not converge (the best solution found is still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from mlassembly.error_model import ErrorParams, build_error_graph, error_transitive_reduce
from mlassembly.exceptions import AssemblyError, FormatError, InfeasibleError
from mlassembly.fasta import assembly_to_fasta, read_fasta, read_reads, reads_to_fasta
from mlassembly.graph import PrefixGraph, build_prefix_graph
from mlassembly.query import QueryDP, SubstitutionModel
from mlassembly.report import build_report
from mlassembly.rounding import (VertexCounts, emit_assembly, euler_tours, hub_fragments,
                                 round_vertex_counts, select_edges, tours_from_dict,
                                 tours_to_dict)
from mlassembly.sequences import Assembly, log_likelihood, random_genome, simulate_reads
from mlassembly.simplify import SimplifyParams, build_simplified_graph, reference_pipeline
from mlassembly.solver import DEFAULT_TOL, FractionalSolution, solve_graph, verify_certificate

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_UNCONVERGED = 0, 1, 2, 3


@dataclass
class PipelineConfig:
    seed: int = 0
    tol: float = DEFAULT_TOL
    L: int | None = None
    simplify: SimplifyParams = field(default_factory=SimplifyParams)
    error: ErrorParams | None = None

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("--tol must be > 0")
        if self.L is not None and self.L < 1:
            raise ValueError("--length must be >= 1")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _log(stage: str, **kv) -> None:
    parts = [f"stage={stage}"]
    for k, v in kv.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        parts.append(f"{k}={str(v).replace(' ', '_')}")
    print(" ".join(parts), file=sys.stderr, flush=True)


def write_atomic(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        write_atomic(path, text)


def _config(args) -> PipelineConfig:
    err = None
    if getattr(args, "error_rate", None) is not None:
        err = ErrorParams(error_rate=args.error_rate, mu=getattr(args, "mu", None),
                          sigma=getattr(args, "sigma", 0.0), d=getattr(args, "d", 2.0),
                          min_overlap=getattr(args, "min_overlap", 1))
    return PipelineConfig(
        seed=args.seed, tol=getattr(args, "tol", DEFAULT_TOL), L=getattr(args, "length", None),
        simplify=SimplifyParams(min_overlap=getattr(args, "min_overlap", 1)), error=err)


def _load_graph(path: str) -> PrefixGraph:
    return PrefixGraph.load(path)


def _load_solution(path: str, g: PrefixGraph) -> FractionalSolution:
    sol = FractionalSolution.load(path)
    if sol.edge_ids != [(e.src, e.dst) for e in g.edges]:
        raise FormatError("solution edges do not match the graph")
    return sol


# ---------------------------------------------------------------------------
# stages

def cmd_simulate(args, cfg: PipelineConfig) -> int:
    genome = random_genome(args.genome_length, seed=cfg.seed)
    reads = simulate_reads(genome, args.count, args.read_len,
                           error_rate=args.error_rate or 0.0, seed=cfg.seed)
    _emit(args.output, reads_to_fasta(reads))
    if args.genome_out:
        write_atomic(args.genome_out, assembly_to_fasta(Assembly.of(genome)))
    _log("simulate", reads=len(reads), genome_length=len(genome))
    return EXIT_OK


def cmd_build_graph(args, cfg: PipelineConfig) -> int:
    reads = read_reads(args.reads)
    if cfg.error is not None:
        g = build_error_graph(reads, cfg.error)
    else:
        g = build_prefix_graph(reads)
    _emit(args.output, g.dumps())
    _log("build-graph", vertices=len(g.vertices), edges=len(g.edges),
         error_model=cfg.error is not None)
    return EXIT_OK


def cmd_simplify(args, cfg: PipelineConfig) -> int:
    if args.reads:
        if cfg.error is not None:
            g = error_transitive_reduce(build_error_graph(read_reads(args.reads), cfg.error),
                                        cfg.error)
        else:
            g = build_simplified_graph(read_reads(args.reads), cfg.simplify)
    elif args.graph:
        g = _load_graph(args.graph)
        if g.probabilistic:
            params = cfg.error or ErrorParams(**g.params.get("error", {}))
            g = error_transitive_reduce(g, params)
        else:
            g = reference_pipeline(g, cfg.simplify)
    else:
        raise ValueError("simplify needs a graph file or --reads")
    _emit(args.output, g.dumps())
    _log("simplify", vertices=len(g.vertices), edges=len(g.edges))
    return EXIT_OK


def cmd_solve(args, cfg: PipelineConfig) -> int:
    g = _load_graph(args.graph)
    sol = solve_graph(g, tol=cfg.tol, max_iters=args.max_iters, seed=cfg.seed)
    _emit(args.output, sol.dumps())
    cert = verify_certificate(g, sol)
    _log("solve", status=sol.status, objective=sol.objective, gap=sol.gap,
         residual=sol.feas_residual, verified_gap=max(cert["gap"], 0.0), iters=sol.iters)
    return EXIT_OK if sol.converged else EXIT_UNCONVERGED


def _require_length(cfg: PipelineConfig) -> int:
    if cfg.L is None:
        raise ValueError("--length L is required for this stage")
    return cfg.L


def cmd_round(args, cfg: PipelineConfig) -> int:
    L = _require_length(cfg)
    g = _load_graph(args.graph)
    sol = _load_solution(args.solution, g)
    counts = round_vertex_counts(g, sol, L, cfg.seed)
    _emit(args.output, counts.dumps())
    _log("round", L=L, total=counts.total)
    return EXIT_OK


def cmd_assemble(args, cfg: PipelineConfig) -> int:
    L = _require_length(cfg)
    g = _load_graph(args.graph)
    sol = _load_solution(args.solution, g)
    counts = (VertexCounts.load(args.counts) if args.counts
              else round_vertex_counts(g, sol, L, cfg.seed))
    sel = select_edges(g, counts, args.hub_cap)
    tours = euler_tours(g, sel.multiplicity)
    asm = emit_assembly(tours, g)
    if args.tours:
        write_atomic(args.tours, json.dumps(tours_to_dict(sel, tours), indent=1))
    if args.format == "json":
        doc = {"contigs": list(asm.contigs), "fragments": hub_fragments(tours, g),
               "cost": sel.cost, "hub_degree": sel.hub_degree}
        _emit(args.output, json.dumps(doc, indent=1) + "\n")
    else:
        _emit(args.output, assembly_to_fasta(asm))
    _log("assemble", L=L, contigs=len(asm.contigs), length=asm.L, cost=sel.cost,
         hub_degree=sel.hub_degree)
    return EXIT_OK


def cmd_tours(args, cfg: PipelineConfig) -> int:
    g = _load_graph(args.graph)
    sel, tours = tours_from_dict(json.loads(Path(args.tours).read_text(encoding="utf-8")))
    _emit(args.output, assembly_to_fasta(emit_assembly(tours, g)))
    _log("tours", tours=len(tours), cost=sel.cost)
    return EXIT_OK


def cmd_query(args, cfg: PipelineConfig) -> int:
    g = _load_graph(args.graph)
    sol = _load_solution(args.solution, g)
    queries = [(f"q{k}", q) for k, q in enumerate(args.strings)]
    if args.queries:
        queries += read_fasta(args.queries)
    model = (SubstitutionModel.uniform(cfg.error.error_rate) if cfg.error is not None
             else SubstitutionModel.identity())
    dp = QueryDP(sol, g, model, cross_break=not args.no_cross_break)
    rows = [(qid, dp.log_probability(s)) for qid, s in queries]
    if args.format == "json":
        doc = [{"query_id": qid, "probability": math.exp(lp), "log_probability": lp}
               for qid, lp in rows]
        _emit(args.output, json.dumps(doc, indent=1) + "\n")
    else:
        text = "query_id\tprobability\tlog_probability\n"
        text += "".join(f"{qid}\t{math.exp(lp)!r}\t{lp!r}\n" for qid, lp in rows)
        _emit(args.output, text)
    _log("query", queries=len(rows), cross_break=not args.no_cross_break)
    return EXIT_OK


def cmd_score(args, cfg: PipelineConfig) -> int:
    reads = read_reads(args.reads)
    asm = Assembly(tuple(s for _, s in read_fasta(args.assembly)))
    ll = log_likelihood(reads, asm)
    if args.format == "json":
        _emit(args.output, json.dumps({"log_likelihood": ll, "L": asm.L}) + "\n")
    else:
        _emit(args.output, f"log_likelihood\tL\n{ll!r}\t{asm.L}\n")
    _log("score", log_likelihood=ll, L=asm.L)
    return EXIT_OK


def cmd_report(args, cfg: PipelineConfig) -> int:
    reads = read_reads(args.reads)
    g = _load_graph(args.graph)
    sol = _load_solution(args.solution, g)
    asm = Assembly(tuple(s for _, s in read_fasta(args.assembly)))
    rep = build_report(sol, asm, reads)
    _emit(args.output, rep.dumps() + "\n" if args.format == "json" else rep.to_text())
    if args.figures:
        from mlassembly import plotting

        fig_dir = Path(args.figures)
        plotting.plot_gap_history(sol, fig_dir / "gap_history.png")
        plotting.plot_contig_lengths(asm, fig_dir / "contig_lengths.png")
        counts = round_vertex_counts(g, sol, asm.L, cfg.seed)
        plotting.plot_counts(g, sol, counts, fig_dir / "counts.png")
    _log("report", objective=rep.objective, log_likelihood=rep.log_likelihood, margin=rep.margin)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _common(p: argparse.ArgumentParser, tol: bool = False, length: bool = False,
            errors: bool = False) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None, help="output file (default stdout)")
    if tol:
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    if length:
        p.add_argument("--length", type=int, default=None, help="assembly length L")
    if errors:
        p.add_argument("--min-overlap", type=int, default=1)
        p.add_argument("--error-rate", type=float, default=None,
                       help="switch to the substitution-error graph with this rate")
        p.add_argument("--mu", type=float, default=None)
        p.add_argument("--sigma", type=float, default=0.0)
        p.add_argument("--d", type=float, default=2.0)


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mlasm", description="Likelihood-based assembly from a prefix graph.")
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="random circular genome and reads")
    _common(p)
    p.add_argument("--genome-length", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--read-len", type=int, required=True)
    p.add_argument("--error-rate", type=float, default=None)
    p.add_argument("--genome-out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("build-graph", help="complete prefix graph (or error graph) from reads")
    _common(p, errors=True)
    p.add_argument("reads")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("simplify", help="reduce a graph, or build the reduced graph from reads")
    _common(p, errors=True)
    p.add_argument("graph", nargs="?")
    p.add_argument("--reads", default=None)
    p.set_defaults(func=cmd_simplify)

    p = sub.add_parser("solve", help="solve the convex program")
    _common(p, tol=True)
    p.add_argument("graph")
    p.add_argument("--max-iters", type=int, default=100_000)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("round", help="randomised vertex counts")
    _common(p, length=True)
    p.add_argument("graph")
    p.add_argument("solution")
    p.set_defaults(func=cmd_round)

    p = sub.add_parser("assemble", help="round, select edges, emit contigs")
    _common(p, length=True)
    p.add_argument("graph")
    p.add_argument("solution")
    p.add_argument("--counts", default=None, help="use these counts instead of rounding")
    p.add_argument("--tours", default=None, help="also write the tours JSON here")
    p.add_argument("--hub-cap", type=int, default=None)
    p.add_argument("--format", choices=["fasta", "json"], default="fasta")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("tours", help="contigs from a tours JSON")
    _common(p)
    p.add_argument("graph")
    p.add_argument("tours")
    p.set_defaults(func=cmd_tours)

    p = sub.add_parser("query", help="probability of observing strings")
    _common(p)
    p.add_argument("graph")
    p.add_argument("solution")
    p.add_argument("strings", nargs="*")
    p.add_argument("--queries", default=None, help="FASTA file of query strings")
    p.add_argument("--no-cross-break", action="store_true")
    p.add_argument("--error-rate", type=float, default=None)
    p.add_argument("--format", choices=["tsv", "json"], default="tsv")
    p.set_defaults(func=cmd_query, mu=None, sigma=0.0, d=2.0, min_overlap=1)

    p = sub.add_parser("score", help="log-likelihood of an assembly")
    _common(p)
    p.add_argument("reads")
    p.add_argument("assembly")
    p.add_argument("--format", choices=["tsv", "json"], default="tsv")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="summary of a run, optionally with figures")
    _common(p)
    p.add_argument("--reads", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--assembly", required=True)
    p.add_argument("--figures", default=None, help="directory for PNG figures")
    p.add_argument("--format", choices=["tsv", "json"], default="tsv")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        stream=sys.stderr, format="level=%(levelname)s msg=%(message)s")
    t0 = time.perf_counter()
    try:
        cfg = _config(args)
        code = args.func(args, cfg)
    except InfeasibleError as exc:
        _log(args.command, status="infeasible", error=exc)
        return EXIT_INFEASIBLE
    except (AssemblyError, ValueError, OSError) as exc:
        _log(args.command, status="error", error=exc)
        return EXIT_USAGE
    _log(args.command, status="done", exit=code, seconds=time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
