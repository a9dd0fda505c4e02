"""Result rendering: text tables, JSON, delimited traces, trace figures.

Every experiment or baseline run directory receives the machine-readable
results (results.json), a text table in the style of the max-accuracy /
max-explanation-score summaries, per-iteration traces as CSV, and PNG
figures of the metric traces.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluation import BaselineResult, CellResult, ExperimentResult

RESULTS_SCHEMA_VERSION = 1


def format_results_table(result: ExperimentResult) -> str:
    """Two text blocks: max accuracy and max explanation score by mode x c."""
    counts = sorted({cell.counterexamples for cell in result.cells})
    modes = []
    for cell in result.cells:
        if cell.mode not in modes:
            modes.append(cell.mode)
    by_key = {(cell.mode, cell.counterexamples): cell for cell in result.cells}

    def block(title: str, value_of) -> list[str]:
        lines = [title]
        header = f"{'Mode':<12} {'Data':<14}" + "".join(f"  c={c:<6}" for c in counts)
        lines.append(header)
        lines.append("-" * len(header))
        for mode in modes:
            row = f"{mode:<12} {result.dataset:<14}"
            for c in counts:
                cell = by_key.get((mode, c))
                value = value_of(cell) if cell else None
                row += f"  {value:6.2f}  " if value is not None else "    -     "
            lines.append(row.rstrip())
        return lines

    lines = block(
        "Maximum accuracy (%) by number of counterexamples",
        lambda cell: None if cell.max_accuracy is None else cell.max_accuracy * 100,
    )
    lines.append("")
    lines += block(
        "Maximum average non-zero explanation score (%) by number of counterexamples",
        lambda cell: cell.max_explanation_score,
    )
    return "\n".join(lines) + "\n"


def write_traces_csv(result: ExperimentResult, path: Path) -> None:
    fields = [
        "dataset", "mode", "counterexamples_per_iteration", "iteration",
        "instance_id", "outcome", "counterexamples_generated",
        "labeled_size", "unlabeled_size", "accuracy", "explanation_score",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for cell in result.cells:
            for rec in cell.trace.records:
                writer.writerow({
                    "dataset": result.dataset,
                    "mode": cell.mode,
                    "counterexamples_per_iteration": cell.counterexamples,
                    "iteration": rec.iteration,
                    "instance_id": rec.instance_id or "",
                    "outcome": rec.outcome or "",
                    "counterexamples_generated": rec.counterexamples,
                    "labeled_size": rec.labeled_size,
                    "unlabeled_size": rec.unlabeled_size,
                    "accuracy": _fmt(rec.metrics.get("accuracy")),
                    "explanation_score": _fmt(rec.metrics.get("explanation_score")),
                })


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def _trace_series(cell: CellResult, key: str) -> tuple[list[int], list[float]]:
    xs, ys = [], []
    for rec in cell.trace.records:
        val = rec.metrics.get(key)
        if val is not None:
            xs.append(rec.iteration)
            ys.append(val)
    return xs, ys


def plot_traces(result: ExperimentResult, out_dir: Path) -> list[Path]:
    """One figure per metric with a line per grid cell."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for key, label, fname in (
        ("accuracy", "test accuracy", "accuracy_traces.png"),
        ("explanation_score", "avg non-zero explanation score (%)",
         "explanation_traces.png"),
    ):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        plotted = False
        for cell in result.cells:
            xs, ys = _trace_series(cell, key)
            if not xs:
                continue
            plotted = True
            ax.plot(xs, ys, marker=".", markersize=3, linewidth=1.0,
                    label=f"{cell.mode} c={cell.counterexamples}")
        if not plotted:
            plt.close(fig)
            continue
        ax.set_xlabel("iteration")
        ax.set_ylabel(label)
        ax.set_title(f"{result.name}: {label} per iteration")
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        target = out_dir / fname
        fig.savefig(target, dpi=120)
        plt.close(fig)
        written.append(target)
    return written


def results_payload(result: ExperimentResult) -> dict:
    return {
        "schema_version": RESULTS_SCHEMA_VERSION,
        "name": result.name,
        "dataset": result.dataset,
        "cells": [
            {
                "mode": cell.mode,
                "counterexamples_per_iteration": cell.counterexamples,
                "max_accuracy": cell.max_accuracy,
                "max_explanation_score": cell.max_explanation_score,
                "base_labels_used": cell.base_labels_used,
                "final_labeled_size": cell.final_labeled_size,
                "counterexamples_generated": cell.counterexamples_generated,
                "outcome_counts": cell.outcome_counts,
                "stopped_early": cell.stopped_early,
                "trace": [rec.to_json() for rec in cell.trace.records],
            }
            for cell in result.cells
        ],
    }


def write_experiment_outputs(result: ExperimentResult, out_dir: Path) -> dict[str, Path]:
    """results.json + results_table.txt + traces.csv + trace figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out_dir / "results.json",
        "table": out_dir / "results_table.txt",
        "traces": out_dir / "traces.csv",
    }
    paths["results"].write_text(
        json.dumps(results_payload(result), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    paths["table"].write_text(format_results_table(result), encoding="utf-8")
    write_traces_csv(result, paths["traces"])
    for i, fig_path in enumerate(plot_traces(result, out_dir / "figures")):
        paths[f"figure_{i}"] = fig_path
    return paths


def format_baseline_report(result: BaselineResult, dataset: str) -> str:
    lines = [
        f"Conventional training baseline on {dataset}",
        f"  training instances : {result.n_train}",
        f"  test instances     : {result.n_test}",
        f"  accuracy           : {result.accuracy * 100:.2f}%",
        "",
        "Labeling effort comparison (interactive loop vs baseline)",
        f"  base labels consumed by a session : {result.caipi_base_labels}"
        " (initial pool + one query per iteration)",
        f"  training instances incl. counterexamples : <= {result.caipi_max_instances}",
        f"  label reduction vs baseline : {result.label_reduction * 100:.2f}%",
    ]
    return "\n".join(lines) + "\n"


def write_baseline_outputs(result: BaselineResult, dataset: str,
                           out_dir: Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out_dir / "baseline_report.txt",
        "results": out_dir / "baseline.json",
    }
    paths["report"].write_text(format_baseline_report(result, dataset), encoding="utf-8")
    payload = {"schema_version": RESULTS_SCHEMA_VERSION, "dataset": dataset}
    payload.update(asdict(result))
    paths["results"].write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(1, len(result.train_log) + 1), result.train_log, marker="o")
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss")
    ax.set_title(f"baseline training loss ({dataset})")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig_path = out_dir / "figures" / "baseline_loss.png"
    fig_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    paths["figure"] = fig_path
    return paths
