"""Strict read-only loaders for the primary component's tabular artifacts.

Each loader checks the documented header before touching any row and raises
FigureInputError naming the offending column or file, so a bad input can
never produce a partially rendered image.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

# the trainer's documented metrics.csv header, in column order
METRICS_COLUMNS = ("step", "target_epoch", "train_loss", "val_loss_all",
                   "val_loss_low", "val_loss_high", "exact_match",
                   "gamma_cap", "mean_gamma")

# the RQ1 sweep summary header
RQ1_COLUMNS = ("requested_epochs", "status", "achieved_epochs",
               "best_downstream", "min_val_loss", "best_epoch", "note")

# columns every sweep aggregate carries in addition to its varied fields
SWEEP_REQUIRED = ("status", "best_epoch", "min_val_loss")


class FigureInputError(ValueError):
    """An input file is missing, empty, or violates its documented header."""


def _read_rows(path: str) -> tuple[list[str], list[dict[str, str]]]:
    if not os.path.exists(path):
        raise FigureInputError(f"{path}: no such input file")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            raise FigureInputError(f"{path}: empty file, nothing to plot")
        rows = list(reader)
    if not rows:
        raise FigureInputError(f"{path}: no data rows, nothing to plot")
    return list(header), rows


def _check_header(path: str, header: list[str], expected: tuple[str, ...]) -> None:
    for col in expected:
        if col not in header:
            raise FigureInputError(f"{path}: missing column '{col}'")
    for col in header:
        if col not in expected:
            raise FigureInputError(f"{path}: unexpected column '{col}'")
    if tuple(header) != expected:
        raise FigureInputError(
            f"{path}: column order {header} != documented {list(expected)}")


def read_metrics(path: str) -> dict[str, np.ndarray]:
    """Load one trainer metrics.csv into float column arrays."""
    header, rows = _read_rows(path)
    _check_header(path, header, METRICS_COLUMNS)
    return {c: np.array([float(r[c]) for r in rows]) for c in METRICS_COLUMNS}


def read_rq1(path: str) -> list[dict[str, str]]:
    """Load an rq1_summary.csv; rows keep their string form ('status' gating)."""
    header, rows = _read_rows(path)
    _check_header(path, header, RQ1_COLUMNS)
    return rows


def read_sweep(path: str, varied: str) -> list[dict[str, str]]:
    """Load a sweep aggregate.csv and require the varied column plus the
    fixed summary columns; the varied name may match a column's basename
    (sweeps name columns after dotted config paths, e.g. schedule.gamma_max)."""
    header, rows = _read_rows(path)
    for col in SWEEP_REQUIRED:
        if col not in header:
            raise FigureInputError(f"{path}: missing column '{col}'")
    matches = [c for c in header if c == varied or c.split(".")[-1] == varied]
    if not matches:
        raise FigureInputError(f"{path}: missing column '{varied}'")
    if len(matches) > 1:
        raise FigureInputError(f"{path}: ambiguous column '{varied}' ({matches})")
    key = matches[0]
    for r in rows:
        r[varied] = r[key]
    return rows


def run_label(metrics_path: str, fallback: str) -> str:
    """Legend label for a run: its summary.json policy descriptor when the
    metrics file sits inside a run directory, else the given fallback."""
    sibling = os.path.join(os.path.dirname(metrics_path), "summary.json")
    if os.path.exists(sibling):
        try:
            with open(sibling) as fh:
                policy = json.load(fh).get("policy")
            if isinstance(policy, str) and policy:
                return policy
        except (OSError, json.JSONDecodeError):
            pass
    return fallback
