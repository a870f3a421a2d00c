"""The five plot kinds and their deterministic renderer.

Every kind maps documented CSV columns straight onto axes; no smoothing or
aggregation happens here. render() draws into memory first and only then
writes the PNG and SVG, so a failing input never leaves a partial image.
"""

from __future__ import annotations

import io as _io
import os
from dataclasses import dataclass, field

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .io import FigureInputError, read_metrics, read_rq1, read_sweep, run_label

DPI = 150
FIGSIZE = (6.4, 4.0)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_RC = {
    "figure.dpi": DPI,
    "savefig.dpi": DPI,
    "svg.hashsalt": "entrodrop-figures",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.framealpha": 0.9,
    "path.simplify": False,
}


@dataclass
class PlotSpec:
    """One figure request: what to draw, from which files, into which stem."""

    kind: str
    inputs: list[str]
    output: str
    labels: list[str] = field(default_factory=list)
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None

    def label_for(self, i: int, fallback: str) -> str:
        return self.labels[i] if i < len(self.labels) else fallback


def _finish(ax, spec: PlotSpec, default_title: str, default_x: str, default_y: str):
    ax.set_title(spec.title or default_title)
    ax.set_xlabel(spec.xlabel or default_x)
    ax.set_ylabel(spec.ylabel or default_y)
    if spec.xlim is not None:
        ax.set_xlim(spec.xlim)
    if spec.ylim is not None:
        ax.set_ylim(spec.ylim)


def _plot_downstream_vs_epochs(ax, spec: PlotSpec) -> None:
    """Fixed-budget epoch trade: best downstream exact-match per epoch cell."""
    for i, path in enumerate(spec.inputs):
        rows = [r for r in read_rq1(path) if r["status"] == "ok"]
        if not rows:
            raise FigureInputError(f"{path}: no feasible cells to plot")
        x = np.array([float(r["requested_epochs"]) for r in rows])
        y = np.array([float(r["best_downstream"]) for r in rows])
        order = np.argsort(x)
        ax.plot(x[order], y[order], marker="o", color=PALETTE[i % len(PALETTE)],
                label=spec.label_for(i, os.path.basename(os.path.dirname(path)) or path))
    if len(spec.inputs) > 1 or spec.labels:
        ax.legend()
    _finish(ax, spec, "Downstream accuracy vs training epochs (fixed budget)",
            "target epochs", "best exact match")


def _plot_accuracy_loss_horizon(ax, spec: PlotSpec) -> None:
    """One run's downstream accuracy and validation loss over the horizon."""
    if len(spec.inputs) != 1:
        raise FigureInputError("accuracy_loss_horizon takes exactly one metrics file")
    m = read_metrics(spec.inputs[0])
    ax.plot(m["target_epoch"], m["val_loss_all"], color=PALETTE[0],
            label="validation loss")
    ax2 = ax.twinx()
    ax2.plot(m["target_epoch"], m["exact_match"], color=PALETTE[1],
             label="exact match")
    ax2.set_ylabel("exact match")
    ax2.grid(False)
    lines = ax.get_lines() + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], loc="center right")
    _finish(ax, spec, "Validation loss and downstream accuracy over training",
            "target epochs", "validation loss")


def _plot_entropy_stratified(ax, spec: PlotSpec) -> None:
    """Low- vs high-entropy validation loss curves, one color per run."""
    for i, path in enumerate(spec.inputs):
        m = read_metrics(path)
        label = spec.label_for(i, run_label(path, f"run {i + 1}"))
        color = PALETTE[i % len(PALETTE)]
        ax.plot(m["target_epoch"], m["val_loss_low"], color=color,
                linestyle="-", label=f"{label}, low entropy")
        ax.plot(m["target_epoch"], m["val_loss_high"], color=color,
                linestyle="--", label=f"{label}, high entropy")
    ax.legend()
    _finish(ax, spec, "Entropy-stratified validation loss",
            "target epochs", "validation loss")


def _plot_policy_comparison(ax, spec: PlotSpec) -> None:
    """Overall validation loss for N runs, labeled by policy descriptor."""
    for i, path in enumerate(spec.inputs):
        m = read_metrics(path)
        ax.plot(m["target_epoch"], m["val_loss_all"],
                color=PALETTE[i % len(PALETTE)],
                label=spec.label_for(i, run_label(path, f"run {i + 1}")))
    ax.legend()
    _finish(ax, spec, "Policy comparison", "target epochs", "validation loss")


def _plot_sensitivity(ax, spec: PlotSpec) -> None:
    """Max-ratio sensitivity: best epoch and min val loss per gamma_max cell."""
    if len(spec.inputs) != 1:
        raise FigureInputError("sensitivity takes exactly one aggregate file")
    rows = [r for r in read_sweep(spec.inputs[0], "gamma_max")
            if r["status"] == "ok"]
    if not rows:
        raise FigureInputError(f"{spec.inputs[0]}: no successful cells to plot")
    x = np.array([float(r["gamma_max"]) for r in rows])
    be = np.array([float(r["best_epoch"]) for r in rows])
    mv = np.array([float(r["min_val_loss"]) for r in rows])
    order = np.argsort(x)
    ax.plot(x[order], be[order], marker="s", color=PALETTE[0], label="best epoch")
    ax2 = ax.twinx()
    ax2.plot(x[order], mv[order], marker="o", color=PALETTE[1],
             label="min val loss")
    ax2.set_ylabel("min validation loss")
    ax2.grid(False)
    lines = ax.get_lines() + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], loc="center right")
    _finish(ax, spec, "Sensitivity to maximum masking ratio",
            "gamma_max", "best epoch")


PLOT_KINDS = {
    "downstream_vs_epochs": _plot_downstream_vs_epochs,
    "accuracy_loss_horizon": _plot_accuracy_loss_horizon,
    "entropy_stratified": _plot_entropy_stratified,
    "policy_comparison": _plot_policy_comparison,
    "sensitivity": _plot_sensitivity,
}


def render(spec: PlotSpec, out_dir: str) -> tuple[str, str]:
    """Render one spec into out_dir; returns (png_path, svg_path).

    Inputs are read and drawn fully in memory before any file is created.
    """
    if spec.kind not in PLOT_KINDS:
        raise FigureInputError(
            f"unknown plot kind '{spec.kind}' (known: {sorted(PLOT_KINDS)})")
    if not spec.inputs:
        raise FigureInputError(f"plot '{spec.output}' lists no inputs")
    stem = os.path.splitext(os.path.basename(spec.output))[0]
    if not stem:
        raise FigureInputError(f"plot kind '{spec.kind}' has an empty output name")

    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        try:
            PLOT_KINDS[spec.kind](ax, spec)
            png_buf, svg_buf = _io.BytesIO(), _io.BytesIO()
            fig.savefig(png_buf, format="png", metadata={"Software": None})
            fig.savefig(svg_buf, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)

    os.makedirs(out_dir, exist_ok=True)
    png_path = os.path.join(out_dir, stem + ".png")
    svg_path = os.path.join(out_dir, stem + ".svg")
    with open(png_path, "wb") as fh:
        fh.write(png_buf.getvalue())
    with open(svg_path, "wb") as fh:
        fh.write(svg_buf.getvalue())
    return png_path, svg_path
