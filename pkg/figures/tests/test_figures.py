"""Figure-renderer tests: reader contracts, golden SVG structure, determinism.

Golden snapshots live in tests/golden/*.json and record each figure's SVG
skeleton (element tag counts plus every text label). A missing golden file is
written on first run; afterwards any drift in structure or labels fails.
"""

import json
import os
import xml.etree.ElementTree as ET
from collections import Counter

import numpy as np
import pytest

from entrodrop_figures import FigureInputError, PLOT_KINDS, PlotSpec, render
from entrodrop_figures.cli import main as cli_main
from entrodrop_figures.io import (METRICS_COLUMNS, read_metrics, read_rq1,
                                  read_sweep, run_label)

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


# ------------------------------------------------------------------ fixtures


def _write_metrics(path, n=12, policy=None, seed=0):
    rng = np.random.default_rng(seed)
    steps = np.arange(1, n + 1) * 100
    epochs = steps / 50.0
    rows = []
    for i in range(n):
        decay = np.exp(-i / 4.0)
        rebound = 0.3 * max(0, i - 5) / n
        rows.append([
            steps[i], epochs[i],
            1.5 * decay + 0.4,
            1.2 * decay + 0.5 + rebound,
            0.8 * decay + 0.3,
            1.6 * decay + 0.6 + 2.5 * rebound,
            min(0.95, 0.1 + 0.08 * i),
            0.1 * i / n,
            0.05 * i / n + 0.001 * rng.random(),
        ])
    with open(path, "w") as fh:
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(f"{v:.6f}" for v in r) + "\n")
    if policy is not None:
        sibling = os.path.join(os.path.dirname(path), "summary.json")
        with open(sibling, "w") as fh:
            json.dump({"policy": policy, "best_epoch": 10.0}, fh)
    return path


def _write_rq1(path):
    with open(path, "w") as fh:
        fh.write("requested_epochs,status,achieved_epochs,best_downstream,"
                 "min_val_loss,best_epoch,note\n")
        fh.write("1,ok,1.02,0.31,0.92,0.98,\n")
        fh.write("10,ok,10.1,0.62,0.71,8.4,\n")
        fh.write("50,ok,50.3,0.55,0.74,24.0,\n")
        fh.write("400,infeasible,,,,,N*target=2e7 vs budget=1e7\n")
    return path


def _write_sweep(path):
    with open(path, "w") as fh:
        fh.write("gamma_max,status,best_epoch,min_val_loss,best_downstream,steps\n")
        fh.write("0.0,ok,25.0,0.704,0.61,5000\n")
        fh.write("0.1,ok,50.0,0.689,0.64,5000\n")
        fh.write("0.2,ok,80.0,0.681,0.64,5000\n")
        fh.write("0.4,failed(exit=4),,,,\n")
    return path


@pytest.fixture
def runs(tmp_path):
    a = tmp_path / "run_base"
    b = tmp_path / "run_drop"
    a.mkdir(), b.mkdir()
    return {
        "base": _write_metrics(str(a / "metrics.csv"), policy="none", seed=1),
        "drop": _write_metrics(str(b / "metrics.csv"), policy="entrodrop", seed=2),
        "rq1": _write_rq1(str(tmp_path / "rq1_summary.csv")),
        "sweep": _write_sweep(str(tmp_path / "aggregate.csv")),
        "out": str(tmp_path / "figs"),
    }


def svg_structure(path):
    tags: Counter = Counter()
    texts = []
    for el in ET.parse(path).getroot().iter():
        tag = el.tag.split("}")[-1]
        tags[tag] += 1
        if tag in ("text", "tspan") and el.text and el.text.strip():
            texts.append(el.text.strip())
    return {"tags": dict(sorted(tags.items())), "texts": sorted(texts)}


def check_golden(name, structure):
    os.makedirs(GOLDEN_DIR, exist_ok=True)
    golden_path = os.path.join(GOLDEN_DIR, f"{name}.json")
    if not os.path.exists(golden_path):
        with open(golden_path, "w") as fh:
            json.dump(structure, fh, indent=2, sort_keys=True)
        return
    with open(golden_path) as fh:
        golden = json.load(fh)
    assert structure == golden, f"SVG structure drifted from golden '{name}'"


# ------------------------------------------------------------ reader contract


class TestReaders:
    def test_metrics_roundtrip(self, runs):
        m = read_metrics(runs["base"])
        assert set(m) == set(METRICS_COLUMNS)
        assert m["step"][0] == 100.0

    def test_missing_column_named(self, runs, tmp_path):
        bad = tmp_path / "bad.csv"
        text = open(runs["base"]).read().replace("val_loss_low", "val_lo")
        bad.write_text(text)
        with pytest.raises(FigureInputError, match="val_loss_low"):
            read_metrics(str(bad))

    def test_unexpected_column_named(self, runs, tmp_path):
        bad = tmp_path / "bad.csv"
        lines = open(runs["base"]).read().splitlines()
        lines[0] += ",surprise"
        lines[1] += ",1.0"
        bad.write_text("\n".join(lines) + "\n")
        with pytest.raises(FigureInputError, match="surprise"):
            read_metrics(str(bad))

    def test_empty_file_and_header_only(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        with pytest.raises(FigureInputError, match="empty"):
            read_metrics(str(empty))
        header_only = tmp_path / "header.csv"
        header_only.write_text(",".join(METRICS_COLUMNS) + "\n")
        with pytest.raises(FigureInputError, match="no data rows"):
            read_metrics(str(header_only))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FigureInputError, match="no such input"):
            read_metrics(str(tmp_path / "nope.csv"))

    def test_rq1_keeps_status_rows(self, runs):
        rows = read_rq1(runs["rq1"])
        assert [r["status"] for r in rows].count("ok") == 3

    def test_sweep_matches_dotted_basename(self, runs, tmp_path):
        dotted = tmp_path / "agg2.csv"
        text = open(runs["sweep"]).read().replace("gamma_max", "schedule.gamma_max")
        dotted.write_text(text)
        rows = read_sweep(str(dotted), "gamma_max")
        assert rows[1]["gamma_max"] == "0.1"

    def test_run_label_prefers_policy_descriptor(self, runs):
        assert run_label(runs["drop"], "x") == "entrodrop"
        assert run_label("/nowhere/metrics.csv", "fallback") == "fallback"


# ------------------------------------------------------------- five kinds


class TestPlotKinds:
    def test_all_five_kinds_registered(self):
        assert sorted(PLOT_KINDS) == ["accuracy_loss_horizon",
                                      "downstream_vs_epochs",
                                      "entropy_stratified",
                                      "policy_comparison",
                                      "sensitivity"]

    def test_downstream_vs_epochs(self, runs):
        spec = PlotSpec(kind="downstream_vs_epochs", inputs=[runs["rq1"]],
                        output="fig_epochs")
        png, svg = render(spec, runs["out"])
        assert os.path.exists(png) and os.path.exists(svg)
        check_golden("downstream_vs_epochs", svg_structure(svg))

    def test_accuracy_loss_horizon(self, runs):
        spec = PlotSpec(kind="accuracy_loss_horizon", inputs=[runs["base"]],
                        output="fig_horizon")
        _, svg = render(spec, runs["out"])
        st = svg_structure(svg)
        assert "validation loss" in st["texts"]
        assert "exact match" in st["texts"]
        check_golden("accuracy_loss_horizon", st)

    def test_entropy_stratified(self, runs):
        spec = PlotSpec(kind="entropy_stratified",
                        inputs=[runs["base"], runs["drop"]],
                        output="fig_strata")
        _, svg = render(spec, runs["out"])
        st = svg_structure(svg)
        assert "none, low entropy" in st["texts"]
        assert "entrodrop, high entropy" in st["texts"]
        check_golden("entropy_stratified", st)

    def test_policy_comparison(self, runs):
        spec = PlotSpec(kind="policy_comparison",
                        inputs=[runs["base"], runs["drop"]],
                        output="fig_policies")
        _, svg = render(spec, runs["out"])
        st = svg_structure(svg)
        assert "none" in st["texts"] and "entrodrop" in st["texts"]
        check_golden("policy_comparison", st)

    def test_sensitivity(self, runs):
        spec = PlotSpec(kind="sensitivity", inputs=[runs["sweep"]],
                        output="fig_sensitivity")
        _, svg = render(spec, runs["out"])
        st = svg_structure(svg)
        assert "best epoch" in st["texts"]
        assert "min val loss" in st["texts"]
        check_golden("sensitivity", st)

    def test_axis_overrides_land_in_svg(self, runs):
        spec = PlotSpec(kind="policy_comparison", inputs=[runs["base"]],
                        output="fig_override", title="drop study",
                        xlabel="epoch count", ylabel="loss",
                        labels=["my run"], xlim=(0.0, 30.0))
        _, svg = render(spec, runs["out"])
        st = svg_structure(svg)
        for want in ("drop study", "epoch count", "loss", "my run"):
            assert want in st["texts"]


# -------------------------------------------------------------- determinism


class TestDeterminism:
    def test_bytes_identical_across_renders(self, runs, tmp_path):
        spec = PlotSpec(kind="entropy_stratified", inputs=[runs["base"]],
                        output="fig")
        p1, s1 = render(spec, str(tmp_path / "a"))
        p2, s2 = render(spec, str(tmp_path / "b"))
        assert open(p1, "rb").read() == open(p2, "rb").read()
        assert open(s1, "rb").read() == open(s2, "rb").read()


# ------------------------------------------------------------ failure modes


class TestFailureModes:
    def test_no_partial_image_on_bad_input(self, runs, tmp_path):
        header_only = tmp_path / "metrics.csv"
        header_only.write_text(",".join(METRICS_COLUMNS) + "\n")
        out = str(tmp_path / "out")
        spec = PlotSpec(kind="policy_comparison", inputs=[str(header_only)],
                        output="fig")
        with pytest.raises(FigureInputError):
            render(spec, out)
        assert not os.path.exists(out) or not os.listdir(out)

    def test_unknown_kind_rejected(self, runs):
        spec = PlotSpec(kind="heatmap", inputs=[runs["base"]], output="fig")
        with pytest.raises(FigureInputError, match="heatmap"):
            render(spec, runs["out"])

    def test_no_inputs_rejected(self, runs):
        spec = PlotSpec(kind="policy_comparison", inputs=[], output="fig")
        with pytest.raises(FigureInputError, match="no inputs"):
            render(spec, runs["out"])

    def test_rq1_without_feasible_rows(self, runs, tmp_path):
        path = tmp_path / "rq1_summary.csv"
        path.write_text("requested_epochs,status,achieved_epochs,best_downstream,"
                        "min_val_loss,best_epoch,note\n"
                        "400,infeasible,,,,,too big\n")
        spec = PlotSpec(kind="downstream_vs_epochs", inputs=[str(path)],
                        output="fig")
        with pytest.raises(FigureInputError, match="no feasible"):
            render(spec, runs["out"])


# --------------------------------------------------------------------- CLI


class TestCli:
    def _spec_file(self, tmp_path, plots):
        path = tmp_path / "figures.json"
        path.write_text(json.dumps({"plots": plots}))
        return str(path)

    def test_batch_render_success(self, runs, tmp_path):
        spec = self._spec_file(tmp_path, [
            {"kind": "policy_comparison", "inputs": [runs["base"], runs["drop"]],
             "output": "cmp"},
            {"kind": "sensitivity", "inputs": [runs["sweep"]],
             "output": "sens", "title": "sweep"},
        ])
        out = str(tmp_path / "figs")
        assert cli_main(["--spec", spec, "--out", out]) == 0
        names = sorted(os.listdir(out))
        assert names == ["cmp.png", "cmp.svg", "sens.png", "sens.svg"]

    def test_bad_spec_json_is_usage_error(self, tmp_path):
        path = tmp_path / "figures.json"
        path.write_text("{not json")
        assert cli_main(["--spec", str(path), "--out", str(tmp_path)]) == 2

    def test_unknown_kind_is_usage_error(self, runs, tmp_path):
        spec = self._spec_file(tmp_path, [
            {"kind": "pie", "inputs": [runs["base"]], "output": "x"}])
        assert cli_main(["--spec", spec, "--out", str(tmp_path / "o")]) == 2

    def test_missing_input_is_precondition_error(self, runs, tmp_path):
        spec = self._spec_file(tmp_path, [
            {"kind": "policy_comparison", "inputs": ["/nowhere/metrics.csv"],
             "output": "x"}])
        out = str(tmp_path / "o")
        assert cli_main(["--spec", spec, "--out", out]) == 3
        assert not os.path.exists(out) or not os.listdir(out)

    def test_missing_required_key_is_usage_error(self, runs, tmp_path):
        spec = self._spec_file(tmp_path, [{"kind": "policy_comparison"}])
        assert cli_main(["--spec", spec, "--out", str(tmp_path / "o")]) == 2
