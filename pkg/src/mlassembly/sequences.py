"""Reads, assemblies, the uniform-sampling likelihood and a read simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from mlassembly.exceptions import FormatError

ALPHABET = "ACGT"
_ALPHABET_SET = frozenset(ALPHABET)

NEG_INF = float("-inf")


def check_sequence(seq: str, allow_empty: bool = False) -> str:
    if not seq and not allow_empty:
        raise FormatError("empty sequence")
    bad = set(seq) - _ALPHABET_SET
    if bad:
        raise FormatError(f"invalid characters {sorted(bad)!r} in sequence")
    return seq


@dataclass(frozen=True)
class Read:
    id: int
    seq: str

    def __post_init__(self):
        check_sequence(self.seq)

    def __len__(self) -> int:
        return len(self.seq)


@dataclass(frozen=True)
class ReadSet:
    reads: tuple[Read, ...]
    names: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        for k, r in enumerate(self.reads):
            if r.id != k:
                raise FormatError(f"read ids must be dense 0..n-1, got {r.id} at position {k}")

    @classmethod
    def from_sequences(cls, seqs: Iterable[str], names: Sequence[str] | None = None) -> "ReadSet":
        reads = tuple(Read(k, s) for k, s in enumerate(seqs))
        return cls(reads, tuple(names) if names is not None else ())

    @property
    def read_len_total(self) -> int:
        return sum(len(r.seq) for r in self.reads)

    @property
    def seqs(self) -> list[str]:
        return [r.seq for r in self.reads]

    def __len__(self) -> int:
        return len(self.reads)

    def __iter__(self):
        return iter(self.reads)

    def __getitem__(self, k: int) -> Read:
        return self.reads[k]


@dataclass(frozen=True)
class Assembly:
    """A set of circular contigs."""

    contigs: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "contigs", tuple(self.contigs))
        if not self.contigs:
            raise FormatError("an assembly needs at least one contig")
        for c in self.contigs:
            check_sequence(c)

    @classmethod
    def of(cls, *contigs: str) -> "Assembly":
        return cls(tuple(contigs))

    @property
    def L(self) -> int:
        return sum(len(c) for c in self.contigs)


def count_circular(contig: str, s: str) -> int:
    """Number of start positions ``0 <= p < len(contig)`` where ``s`` reads off the cycle."""
    n = len(contig)
    if not s:
        return n
    ext = contig * (len(s) // n + 2)
    count = 0
    p = ext.find(s, 0, n - 1 + len(s))
    while p != -1:
        count += 1
        p = ext.find(s, p + 1, n - 1 + len(s))
    return count


def count_occurrences(assembly: Assembly, read: Read | str) -> int:
    s = read.seq if isinstance(read, Read) else read
    return sum(count_circular(c, s) for c in assembly.contigs)


def log_likelihood(reads: ReadSet, assembly: Assembly) -> float:
    """Natural-log probability of sampling ``reads`` uniformly from ``assembly``.

    Returns ``-inf`` when some read does not occur at all.
    """
    if len(reads) == 0:
        raise ValueError("log-likelihood of an empty read set is undefined")
    L = assembly.L
    cache: dict[str, int] = {}
    total = 0.0
    for r in reads:
        n = cache.get(r.seq)
        if n is None:
            n = cache[r.seq] = count_occurrences(assembly, r.seq)
        if n == 0:
            return NEG_INF
        total += math.log(n / L)
    return total


def simulate_reads(genome: str, count: int, read_len: int, error_rate: float = 0.0,
                   seed: int = 0) -> ReadSet:
    """Sample ``count`` reads uniformly from a circular genome.

    Each base is independently replaced, with probability ``error_rate``, by a
    uniformly chosen different base.
    """
    check_sequence(genome)
    if count < 1:
        raise ValueError("count must be >= 1")
    if read_len < 1 or read_len > len(genome):
        raise ValueError(f"read_len must be in [1, {len(genome)}], got {read_len}")
    if not 0.0 <= error_rate < 1.0:
        raise ValueError("error_rate must be in [0, 1)")

    rng = np.random.default_rng(seed)
    codes = np.frombuffer(genome.encode(), dtype=np.uint8)
    lookup = np.zeros(256, dtype=np.int8)
    for k, ch in enumerate(ALPHABET):
        lookup[ord(ch)] = k
    g = lookup[codes]

    starts = rng.integers(0, len(genome), size=count)
    idx = (starts[:, None] + np.arange(read_len)[None, :]) % len(genome)
    bases = g[idx]
    if error_rate > 0:
        flip = rng.random(bases.shape) < error_rate
        shift = rng.integers(1, 4, size=bases.shape)
        bases = np.where(flip, (bases + shift) % 4, bases)
    letters = np.frombuffer(ALPHABET.encode(), dtype=np.uint8)[bases]
    seqs = [row.tobytes().decode() for row in letters]
    names = [f"read{k} start={int(s)}" for k, s in enumerate(starts)]
    return ReadSet.from_sequences(seqs, names)


def random_genome(length: int, seed: int = 0) -> str:
    rng = np.random.default_rng(seed)
    return "".join(ALPHABET[k] for k in rng.integers(0, 4, size=length))
