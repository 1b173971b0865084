"""Deterministic table/report emission and figure rendering.

CSV and JSON outputs are byte-stable for a fixed config and seed: floats are
formatted to 12 significant digits, keys are sorted, and no timestamps are
written.  Figures are rendered to PNG next to the tables.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SCHEMA_VERSION = 1

__all__ = [
    "config_hash",
    "write_csv",
    "write_json",
    "write_plot_data",
    "report_payload",
    "metric_decay_figure",
    "ratio_refinement_figure",
    "field_slice_figure",
    "spectrum_figure",
]


def _fmt(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_csv(path: Path, header, rows, provenance: dict) -> Path:
    """One table; every row carries the config hash."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    full_header = list(header) + ["config_hash", "schema_version"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(full_header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row]
                        + [provenance["config_hash"], SCHEMA_VERSION])
    path.write_text(buf.getvalue())
    return path


def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def write_json(path: Path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_round_floats(payload), sort_keys=True, indent=1) + "\n")
    return path


def report_payload(command: str, config: dict, provenance: dict, body: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_hash": provenance["config_hash"],
        "code_version": provenance["code_version"],
        "seed": provenance.get("seed"),
        "report": body,
    }


def write_plot_data(path: Path, x, y, provenance: dict, labels=("x", "y")) -> Path:
    """Two-column plot-data file for external tooling."""
    rows = list(zip(x, y))
    return write_csv(path, labels, rows, provenance)


def convergence_rows(report) -> list:
    return [(r["metric"], r["epsilon"], r["value"]) for r in report.rows]


# ---------------------------------------------------------------------------
# figures


def metric_decay_figure(path: Path, report, title: str) -> Path:
    """Log-log decay of each metric over the sweep, with fitted orders."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    metrics = sorted({r["metric"] for r in report.rows})
    for metric in metrics:
        eps, vals = report.series(metric)
        vals = [max(v, 1e-18) for v in vals]
        label = metric
        fit = report.fits.get(metric)
        if fit and fit.get("order") is not None:
            label += f" (order {fit['order']:.2f})"
        ax.loglog(eps, vals, "o-", label=label)
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel("metric")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def ratio_refinement_figure(path: Path, rows, title: str) -> Path:
    """Inequality-suite ratios against grid refinement."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    lemmas = sorted({r["lemma_id"] for r in rows})
    for lemma in lemmas:
        sizes = [r["grid_size"] for r in rows if r["lemma_id"] == lemma]
        maxes = [r["ratio_max"] for r in rows if r["lemma_id"] == lemma]
        ax.plot(sizes, maxes, "o-", label=lemma)
    ax.set_xlabel("points per axis")
    ax.set_ylabel("max ratio")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def field_slice_figure(path: Path, grid, fields: dict, title: str) -> Path:
    """Axis-aligned slice through each effective field."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    x = grid.axis_points()
    n = grid.points_per_axis
    for name, values in fields.items():
        vals = values if values.ndim == 1 else values[0]
        cube = vals.reshape(grid.shape)
        slicer = (slice(None),) + (n // 2,) * (grid.dimension - 1)
        ax.plot(x, cube[slicer], label=name)
    ax.set_xlabel("x")
    ax.set_ylabel("field value")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def spectrum_figure(path: Path, eigenvalues, title: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    ax.plot(range(len(eigenvalues)), eigenvalues, "s")
    ax.set_xlabel("level")
    ax.set_ylabel("eigenvalue")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
