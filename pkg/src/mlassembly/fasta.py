"""Minimal FASTA reader/writer restricted to the ACGT alphabet."""

from __future__ import annotations

import io
from pathlib import Path
from typing import Iterable, Iterator, TextIO

from mlassembly.exceptions import FormatError
from mlassembly.sequences import Assembly, ReadSet, check_sequence


def parse_fasta(handle: TextIO) -> Iterator[tuple[str, str]]:
    """Yield ``(header, sequence)`` pairs; headers lose their leading '>'."""
    name = None
    chunks: list[str] = []
    for lineno, line in enumerate(handle, 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            if name is not None:
                yield name, _finish(name, chunks)
            name = line[1:].strip()
            chunks = []
            continue
        if name is None:
            raise FormatError(f"line {lineno}: sequence data before first header")
        try:
            check_sequence(line)
        except FormatError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        chunks.append(line)
    if name is not None:
        yield name, _finish(name, chunks)


def _finish(name: str, chunks: list[str]) -> str:
    seq = "".join(chunks)
    if not seq:
        raise FormatError(f"record {name!r} has no sequence")
    return seq


def read_fasta(path: str | Path) -> list[tuple[str, str]]:
    with open(path, encoding="utf-8") as handle:
        return list(parse_fasta(handle))


def read_reads(path: str | Path) -> ReadSet:
    records = read_fasta(path)
    if not records:
        raise FormatError(f"{path}: no FASTA records")
    return ReadSet.from_sequences([s for _, s in records], [h for h, _ in records])


def format_fasta(records: Iterable[tuple[str, str]], width: int = 80) -> str:
    out = io.StringIO()
    for header, seq in records:
        out.write(f">{header}\n")
        for k in range(0, len(seq), width):
            out.write(seq[k:k + width] + "\n")
    return out.getvalue()


def reads_to_fasta(reads: ReadSet) -> str:
    names = reads.names or tuple(f"read{r.id}" for r in reads)
    return format_fasta(zip(names, reads.seqs))


def assembly_to_fasta(assembly: Assembly) -> str:
    records = (
        (f"contig{k} length={len(c)} circular=true", c)
        for k, c in enumerate(assembly.contigs)
    )
    return format_fasta(records)
