"""SVG figure rendering. The CSV files are the source of truth: every plot is
drawn from a CSV already on disk, never from in-memory numbers, so the figure
can never disagree with the delimited output.

Figure style mirrors the report conventions: solid estimate lines, dotted
confidence bands. SVG output is deterministic (fixed hash salt, no embedded
date), so re-running a pipeline reproduces figures byte-for-byte.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "dynroc"

import matplotlib.pyplot as plt

from .accuracy import read_accuracy_csv

_X_LABEL = "Years from baseline"


def _save(fig, out_path: str | Path) -> None:
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _y_label(kind: str, fpf: float | None) -> str:
    if kind == "tpf_at_fpf":
        return f"TPF at FPF = {fpf:g}" if fpf is not None else "TPF"
    return "AUC(t)"


def render_accuracy_plot(
    csv_paths: dict[str, str | Path],
    out_path: str | Path,
    kind: str = "auc",
    fpf: float | None = None,
    title: str | None = None,
) -> None:
    """One line (plus dotted bands when present) per labeled curve CSV."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, (label, path) in enumerate(csv_paths.items()):
        data = read_accuracy_csv(path)
        color = f"C{i}"
        ax.plot(data["time"], data["estimate"], "-", color=color, label=label)
        if data["lower"] is not None:
            ax.plot(data["time"], data["lower"], ":", color=color)
            ax.plot(data["time"], data["upper"], ":", color=color)
    ax.set_xlabel(_X_LABEL)
    ax.set_ylabel(_y_label(kind, fpf))
    ax.set_ylim(0.0, 1.05)
    if title:
        ax.set_title(title)
    if len(csv_paths) > 1 or next(iter(csv_paths), "") != "":
        ax.legend(loc="lower left", frameon=False)
    fig.tight_layout()
    _save(fig, out_path)


def render_km_plot(csv_paths: dict[str, str | Path], out_path: str | Path, title: str | None = None) -> None:
    """Step plot of one or more Kaplan-Meier CSVs (time,survival[,se])."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, (label, path) in enumerate(csv_paths.items()):
        times = [0.0]
        values = [1.0]
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                times.append(float(row["time"]))
                values.append(float(row["survival"]))
        ax.step(times, values, where="post", color=f"C{i}", label=label or None)
    ax.set_xlabel(_X_LABEL)
    ax.set_ylabel("Survival probability")
    ax.set_ylim(0.0, 1.05)
    if title:
        ax.set_title(title)
    labels = [lab for lab in csv_paths if lab]
    if labels:
        ax.legend(loc="lower left", frameon=False)
    fig.tight_layout()
    _save(fig, out_path)
