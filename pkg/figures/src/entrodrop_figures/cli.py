"""Batch figure renderer: `render-figures --spec figures.json --out dir`.

The spec file is JSON of the form {"plots": [{...}, ...]} where each entry
carries kind, inputs, output, and optional labels/title/axis settings. Exit
codes: 0 success, 2 usage or spec-file error, 3 input contract error,
4 unexpected failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .io import FigureInputError
from .plots import PLOT_KINDS, PlotSpec, render

_SPEC_KEYS = {"kind", "inputs", "output", "labels", "title",
              "xlabel", "ylabel", "xlim", "ylim"}


def _parse_spec(entry: dict, index: int) -> PlotSpec:
    if not isinstance(entry, dict):
        raise ValueError(f"plots[{index}] is not an object")
    unknown = set(entry) - _SPEC_KEYS
    if unknown:
        raise ValueError(f"plots[{index}] has unknown keys {sorted(unknown)}")
    for key in ("kind", "inputs", "output"):
        if key not in entry:
            raise ValueError(f"plots[{index}] is missing required key '{key}'")
    kind = entry["kind"]
    if kind not in PLOT_KINDS:
        raise ValueError(
            f"plots[{index}] has unknown kind '{kind}' (known: {sorted(PLOT_KINDS)})")
    inputs = entry["inputs"]
    if not isinstance(inputs, list) or not all(isinstance(p, str) for p in inputs):
        raise ValueError(f"plots[{index}].inputs must be a list of paths")
    spec = PlotSpec(kind=kind, inputs=inputs, output=str(entry["output"]))
    spec.labels = [str(s) for s in entry.get("labels", [])]
    spec.title = str(entry.get("title", ""))
    spec.xlabel = str(entry.get("xlabel", ""))
    spec.ylabel = str(entry.get("ylabel", ""))
    for axis in ("xlim", "ylim"):
        if entry.get(axis) is not None:
            lo, hi = entry[axis]
            setattr(spec, axis, (float(lo), float(hi)))
    return spec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render-figures",
        description="Render PNG+SVG figures from training-run CSV/JSON outputs.")
    parser.add_argument("--spec", required=True, help="JSON file listing plots")
    parser.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)

    try:
        with open(args.spec, encoding="utf-8") as fh:
            raw = json.load(fh)
        plots = raw["plots"] if isinstance(raw, dict) and "plots" in raw else None
        if not isinstance(plots, list) or not plots:
            raise ValueError("spec must be an object with a non-empty 'plots' list")
        specs = [_parse_spec(entry, i) for i, entry in enumerate(plots)]
    except (OSError, json.JSONDecodeError, ValueError, TypeError) as exc:
        print(f"render-figures: spec error: {exc}", file=sys.stderr)
        return 2

    try:
        for spec in specs:
            png_path, svg_path = render(spec, args.out)
            print(f"wrote {png_path} and {svg_path}", file=sys.stderr)
    except FigureInputError as exc:
        print(f"render-figures: input error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001  (CLI boundary)
        print(f"render-figures: failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
