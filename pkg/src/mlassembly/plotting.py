"""Diagnostic figures written to files (no display needed)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from mlassembly.graph import PrefixGraph  # noqa: E402
from mlassembly.rounding import VertexCounts  # noqa: E402
from mlassembly.sequences import Assembly  # noqa: E402
from mlassembly.solver import FractionalSolution  # noqa: E402


def plot_gap_history(sol: FractionalSolution, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    gaps = np.asarray(sol.gap_history, dtype=float)
    gaps = gaps[np.isfinite(gaps)]
    if gaps.size:
        ax.semilogy(np.arange(1, gaps.size + 1), np.maximum(gaps, 1e-16), marker="o", ms=3)
    ax.axhline(sol.tol, color="grey", ls="--", lw=1, label=f"tol = {sol.tol:g}")
    ax.set_xlabel("certificate evaluation")
    ax.set_ylabel("duality gap")
    ax.legend(loc="upper right", frameon=False)
    return _save(fig, path)


def plot_counts(g: PrefixGraph, sol: FractionalSolution, counts: VertexCounts,
                path: str | Path) -> Path:
    """Rounded n_v against the fractional target L*y_v."""
    pos = {v: k for k, v in enumerate(sol.vertex_ids)}
    ids = sorted(v for v in counts.counts if v in pos)
    target = np.array([counts.L * sol.y[pos[v]] for v in ids])
    got = np.array([counts.counts[v] for v in ids])
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.scatter(target, got, s=8, alpha=0.6)
    hi = max(float(target.max(initial=1.0)), float(got.max(initial=1))) + 0.5
    ax.plot([0, hi], [0, hi], color="grey", lw=1)
    ax.set_xlabel("L * y_v")
    ax.set_ylabel("n_v")
    return _save(fig, path)


def plot_contig_lengths(assembly: Assembly, path: str | Path) -> Path:
    lengths = sorted((len(c) for c in assembly.contigs), reverse=True)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(np.arange(len(lengths)), lengths, width=0.8)
    ax.set_xlabel("contig rank")
    ax.set_ylabel("length")
    return _save(fig, path)


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
