"""Run summary: solver quality, the emitted assembly and the bound margin."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

from mlassembly.exceptions import FormatError
from mlassembly.sequences import Assembly, ReadSet, log_likelihood
from mlassembly.solver import FractionalSolution


@dataclass
class Report:
    objective: float
    gap: float
    status: str
    L: int
    n_contigs: int
    contig_lengths: list[int]
    log_likelihood: float
    margin: float

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_text(self) -> str:
        lines = [f"{k}\t{_fmt(v)}" for k, v in self.to_dict().items() if k != "contig_lengths"]
        lines.insert(5, "contig_lengths\t" + ",".join(map(str, self.contig_lengths)))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def build_report(solution: FractionalSolution, assembly: Assembly, reads: ReadSet) -> Report:
    """Summarise one run.

    ``margin`` is the convex objective minus the assembly's log-likelihood.
    The objective bounds every assembly's likelihood from above, so the
    margin is non-negative up to the solver tolerance; it is +inf when some
    read does not occur in the assembly.
    """
    if assembly is None or not assembly.contigs:
        raise FormatError("cannot report on an empty assembly")
    ll = log_likelihood(reads, assembly)
    margin = solution.objective - ll
    return Report(
        objective=float(solution.objective),
        gap=float(solution.gap),
        status=solution.status,
        L=assembly.L,
        n_contigs=len(assembly.contigs),
        contig_lengths=sorted((len(c) for c in assembly.contigs), reverse=True),
        log_likelihood=ll,
        margin=margin,
    )
