"""Run directories, deterministic CSV emission, and replayable manifests.

Every command writes its tables with '.'-decimal, 17-significant-digit
floats and records a manifest carrying the resolved configuration, master
seed, and sha256 of each artifact, which is sufficient to replay the run
bit-for-bit and verify it.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .metrics import AlignmentReport
from .stats import ImprovementVerdict

MANIFEST_NAME = "manifest.json"


def fmt(value) -> str:
    """Locale-independent cell formatting; floats keep 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def render_csv(header: list[str], rows: list[list], comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunDir:
    """A command's output directory plus its accumulating manifest."""

    path: Path
    command: str
    config: dict
    master_seed: int
    artifacts: dict[str, str] = field(default_factory=dict)
    started: float = field(default_factory=time.monotonic)

    def __post_init__(self):
        self.path = Path(self.path)
        self.path.mkdir(parents=True, exist_ok=True)

    def write_csv(
        self, name: str, header: list[str], rows: list[list],
        comment: str | None = None,
    ) -> Path:
        target = self.path / name
        target.write_text(render_csv(header, rows, comment), encoding="utf-8")
        self.artifacts[name] = sha256_file(target)
        return target

    def write_text(self, name: str, text: str) -> Path:
        target = self.path / name
        target.write_text(text, encoding="utf-8")
        self.artifacts[name] = sha256_file(target)
        return target

    def attach(self, name: str) -> None:
        """Record an artifact written directly into the run directory."""
        self.artifacts[name] = sha256_file(self.path / name)

    def finalize(self, extra: dict | None = None) -> Path:
        manifest = {
            "command": self.command,
            "config": self.config,
            "master_seed": self.master_seed,
            "artifacts": dict(sorted(self.artifacts.items())),
            "tool_version": __version__,
            "wall_clock_s": round(time.monotonic() - self.started, 3),
            "created_utc": datetime.now(timezone.utc).isoformat(),
        }
        if extra:
            manifest.update(extra)
        target = self.path / MANIFEST_NAME
        with open(target, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return target


def load_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def default_run_dir(base, command: str) -> Path:
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    return Path(base) / f"{stamp}-{command}"


# ---------------------------------------------------------------------------
# Report tables
# ---------------------------------------------------------------------------


def alignment_rows(report: AlignmentReport, experiment: str):
    names = report.feature_names or [
        f"f{j}" for j in range(len(report.directionality))
    ]
    per_feature = [
        [experiment, name, report.directionality[j]] for j, name in enumerate(names)
    ]
    per_instance = [
        [experiment, i, c] for i, c in enumerate(report.concordance)
    ]
    per_k = [
        [experiment, k, mean, se] for k, (mean, se) in sorted(report.relevance.items())
    ]
    return per_feature, per_instance, per_k


def write_alignment_report(
    run: RunDir, report: AlignmentReport, experiment: str, prefix: str = ""
) -> None:
    per_feature, per_instance, per_k = alignment_rows(report, experiment)
    run.write_csv(
        f"{prefix}directionality.csv",
        ["experiment", "feature", "directionality"],
        per_feature,
        comment="figure: per-feature sign agreement bars",
    )
    run.write_csv(
        f"{prefix}concordance.csv",
        ["experiment", "instance", "concordance"],
        per_instance,
        comment="figure: per-instance rank-correlation distribution",
    )
    run.write_csv(
        f"{prefix}relevance.csv",
        ["experiment", "k", "mean", "standard_error"],
        per_k,
        comment="figure: top-k overlap vs k with error bars",
    )


def verdict_rows(verdict: ImprovementVerdict):
    return [
        [verdict.metric, d.delta, d.p_better, d.p_worse, d.outcome, verdict.overall]
        for d in verdict.dimensions
    ]


def write_verdicts(
    run: RunDir, verdicts: dict[str, ImprovementVerdict], name: str
) -> None:
    rows = []
    for metric in sorted(verdicts):
        rows.extend(verdict_rows(verdicts[metric]))
    run.write_csv(
        name,
        ["metric", "delta", "p_better", "p_worse", "outcome", "overall"],
        rows,
        comment="improvement verdicts: new-minus-old location tests, "
        "better means above zero",
    )


def write_explanations(
    run: RunDir,
    name: str,
    explanations: np.ndarray,
    feature_names: list[str],
    explainer_id: str,
    seeds: list[int],
    instance_ids: list[int],
    undefined_mask: np.ndarray | None = None,
) -> None:
    header = ["instance", "explainer", "seed"] + list(feature_names) + ["undefined_mask"]
    rows = []
    E = np.asarray(explanations)
    for i in range(E.shape[0]):
        mask = ""
        if undefined_mask is not None and undefined_mask[i].any():
            mask = "".join("1" if b else "0" for b in undefined_mask[i])
        values = [0.0 if (undefined_mask is not None and undefined_mask[i][j]) else E[i, j]
                  for j in range(E.shape[1])]
        rows.append([instance_ids[i], explainer_id, seeds[i]] + values + [mask])
    run.write_csv(name, header, rows, comment="one row per explained instance")


def read_explanations(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Returns (values, undefined_mask, feature_names) from an explanation CSV."""
    header, rows = read_csv(path)
    names = header[3:-1]
    values = np.zeros((len(rows), len(names)))
    mask = np.zeros((len(rows), len(names)), dtype=bool)
    for i, row in enumerate(rows):
        values[i] = [float(v) for v in row[3:-1]]
        bits = row[-1]
        if bits:
            mask[i] = [b == "1" for b in bits]
    values[mask] = np.nan
    return values, mask, names
