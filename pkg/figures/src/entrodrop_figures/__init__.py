"""Plot rendering over the training lab's emitted CSV/JSON artifacts.

This package never recomputes science: every plotted value is read verbatim
from the primary component's metrics.csv, summary.json, rq1_summary.csv, or
sweep aggregate.csv files. Images render deterministically (fixed style,
fixed DPI, no timestamps) so snapshot tests can pin their structure.
"""

from .io import FigureInputError
from .plots import PLOT_KINDS, PlotSpec, render

__all__ = ["FigureInputError", "PLOT_KINDS", "PlotSpec", "render"]
