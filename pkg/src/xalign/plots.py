"""Figure rendering for report tables.

Each emitted CSV has a matching PNG so a run directory is browsable without
further tooling.  Figures are a pure presentation layer: nothing reads them
back, and replay verification hashes only the delimited outputs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import AlignmentReport  # noqa: E402


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_alignment(
    reports: dict[str, AlignmentReport], out_dir, prefix: str = ""
) -> list[Path]:
    """Directionality bars, concordance box plot, relevance-vs-k lines."""
    out_dir = Path(out_dir)
    written: list[Path] = []
    first = next(iter(reports.values()))
    names = first.feature_names or [f"f{j}" for j in range(len(first.directionality))]

    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(names) + 2), 3.5))
    width = 0.8 / len(reports)
    for i, (label, rep) in enumerate(reports.items()):
        ax.bar(
            [x + i * width for x in range(len(names))],
            rep.directionality,
            width=width,
            label=label,
        )
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("directionality")
    ax.set_ylim(0, 1.05)
    ax.axhline(0.5, color="gray", lw=0.8, ls="--")
    ax.legend(fontsize=7)
    path = out_dir / f"{prefix}directionality.png"
    _save(fig, path)
    written.append(path)

    fig, ax = plt.subplots(figsize=(4, 3.5))
    data = [rep.concordance[~np.isnan(rep.concordance)] for rep in reports.values()]
    ax.boxplot(data, tick_labels=list(reports))
    ax.set_ylabel("concordance")
    ax.axhline(0.0, color="gray", lw=0.8, ls="--")
    path = out_dir / f"{prefix}concordance.png"
    _save(fig, path)
    written.append(path)

    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    for label, rep in reports.items():
        ks = sorted(rep.relevance)
        means = [rep.relevance[k][0] for k in ks]
        ses = [rep.relevance[k][1] for k in ks]
        ax.errorbar(ks, means, yerr=ses, marker="o", ms=3, capsize=2, label=label)
    ax.set_xlabel("k")
    ax.set_ylabel("relevance")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=7)
    path = out_dir / f"{prefix}relevance.png"
    _save(fig, path)
    written.append(path)
    return written


def plot_sweep_bins(
    bins: list[tuple[str, dict[str, float]]], out_dir, name: str = "sweep_bins.png"
) -> Path:
    """Binned metric means against the feature-count bins, one line each."""
    out_dir = Path(out_dir)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    labels = [b[0] for b in bins]
    series = sorted({key for _, vals in bins for key in vals})
    for key in series:
        ax.plot(
            range(len(bins)),
            [vals.get(key, float("nan")) for _, vals in bins],
            marker="o",
            label=key,
        )
    ax.set_xticks(range(len(bins)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_xlabel("feature-count bin")
    ax.set_ylabel("binned mean")
    ax.legend(fontsize=7)
    path = out_dir / name
    _save(fig, path)
    return path


def plot_operator_gap(
    mean_gaps: dict[tuple[float, int, int], float], out_dir,
    name: str = "operator_gap.png",
) -> Path:
    """Log-log gap-vs-N curves, one line per (bandwidth, dimension)."""
    out_dir = Path(out_dir)
    fig, ax = plt.subplots(figsize=(5, 3.8))
    keys = sorted({(nu, d) for (nu, _, d) in mean_gaps})
    for nu, d in keys:
        ns = sorted(n for (nu2, n, d2) in mean_gaps if nu2 == nu and d2 == d)
        gaps = [mean_gaps[(nu, n, d)] for n in ns]
        ax.loglog(ns, gaps, marker="o", ms=3, label=f"nu={nu:g}, D={d}")
    ax.set_xlabel("N")
    ax.set_ylabel("operator gap")
    ax.legend(fontsize=6)
    path = out_dir / name
    _save(fig, path)
    return path
