"""Per-component RMSE and squared-error CDFs of a trained network on a test set."""
from __future__ import annotations

import json
import math
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyTestSet, MissingGroundTruth
from .neural import LPBatch, MlpModel, predict
from .problem import LossTerms, residuals

COMPONENTS = ("x1", "x2", "lambda1", "lambda2")


@dataclass
class EvalReport:
    components: Sequence[str]
    rmse: np.ndarray
    sq_errors: List[np.ndarray]  # one ascending array per component
    count: int
    residual_means: LossTerms

    def median_sq_error(self) -> np.ndarray:
        return np.array([np.median(e) for e in self.sq_errors])

    def cdf_rows(self, j: int):
        e = self.sq_errors[j]
        return e, np.arange(1, e.size + 1) / e.size

    def summary(self) -> dict:
        return {
            "count": self.count,
            "rmse": dict(zip(self.components, map(float, self.rmse))),
            "median_sq_error": dict(zip(self.components, map(float, self.median_sq_error()))),
            "residual_means": {"L_PF": self.residual_means.l_pf, "L_DF": self.residual_means.l_df,
                               "L_CS": self.residual_means.l_cs, "L_S": self.residual_means.l_s},
        }


def evaluate(model: MlpModel, test_set) -> EvalReport:
    """Compare network outputs with stored solutions, component by component.

    RMSE is computed from the sorted squared errors, so it does not depend
    on the order of ``test_set``.
    """
    if len(test_set) == 0:
        raise EmptyTestSet("test set is empty")
    if any(ex.truth is None for ex in test_set):
        raise MissingGroundTruth("evaluation needs ground-truth solutions")
    b = LPBatch.from_examples(test_set)
    K, m, n = b.G.shape
    if model.input_dim != b.features.shape[1] or model.output_dim != n + m:
        raise DimensionMismatch(f"model maps {model.input_dim}->{model.output_dim}, "
                                f"data needs {b.features.shape[1]}->{n + m}")
    out = predict(model, b.features)
    res = residuals(b.c, b.G, b.h, out[:, :n], out[:, n:])
    means = LossTerms(*(float(t) for t in res.terms.mean(axis=0)))
    return report_from_predictions(out, b.targets, means)


def report_from_predictions(pred: np.ndarray, truth: np.ndarray,
                            residual_means: Optional[LossTerms] = None) -> EvalReport:
    """Build a report from (K, d) prediction and target arrays."""
    pred, truth = np.asarray(pred, dtype=np.float64), np.asarray(truth, dtype=np.float64)
    if pred.ndim != 2 or pred.shape != truth.shape:
        raise DimensionMismatch(f"prediction {pred.shape} and target {truth.shape} arrays differ")
    if pred.shape[0] == 0:
        raise EmptyTestSet("test set is empty")
    sq = np.sort((pred - truth) ** 2, axis=0)
    sorted_cols = [np.ascontiguousarray(sq[:, j]) for j in range(sq.shape[1])]
    rmse = np.array([math.sqrt(col.mean()) for col in sorted_cols])
    d = pred.shape[1]
    names = COMPONENTS if d == len(COMPONENTS) else tuple(f"y{j + 1}" for j in range(d))
    if residual_means is None:
        residual_means = LossTerms(float("nan"), float("nan"), float("nan"), float("nan"))
    return EvalReport(names, rmse, sorted_cols, pred.shape[0], residual_means)


def _cdf_csv(e: np.ndarray, p: np.ndarray) -> str:
    lines = ["sq_error,cdf"] + [f"{float(a)!r},{float(q)!r}" for a, q in zip(e, p)]
    return "\n".join(lines) + "\n"


def _write(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def emit_cdf_csv(report: EvalReport, out_dir) -> List[str]:
    """Write ``cdf_<component>.csv`` for each component and ``rmse.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for j, name in enumerate(report.components):
        path = os.path.join(out_dir, f"cdf_{name}.csv")
        _write(path, _cdf_csv(*report.cdf_rows(j)))
        paths.append(path)
    rows = ["component,rmse"] + [f"{name},{float(v)!r}" for name, v in zip(report.components, report.rmse)]
    path = os.path.join(out_dir, "rmse.csv")
    _write(path, "\n".join(rows) + "\n")
    paths.append(path)
    return paths


def emit_summary_json(report: EvalReport, out_dir) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.json")
    _write(path, json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    return path


# -- SVG rendering ----------------------------------------------------------------

_W, _H, _PAD = 480, 320, 56
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def _svg_panel(title: str, xlabel: str, ylabel: str, series, logx: bool, logy: bool,
               source_csv: str) -> ET.ElementTree:
    """One line chart. ``series`` is a list of ``(label, xs, ys)``.

    The CSV the panel was drawn from is embedded verbatim in ``<metadata>``.
    """
    def tx(v, log):
        return np.log10(v) if log else v

    floor = 1e-16
    xs_all = np.concatenate([np.maximum(s[1], floor) if logx else s[1] for s in series])
    ys_all = np.concatenate([np.maximum(s[2], floor) if logy else s[2] for s in series])
    x0, x1 = float(tx(xs_all.min(), logx)), float(tx(xs_all.max(), logx))
    y0, y1 = float(tx(ys_all.min(), logy)), float(tx(ys_all.max(), logy))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(v):
        return _PAD + (tx(max(v, floor) if logx else v, logx) - x0) / (x1 - x0) * (_W - 2 * _PAD)

    def py(v):
        return _H - _PAD - (tx(max(v, floor) if logy else v, logy) - y0) / (y1 - y0) * (_H - 2 * _PAD)

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(_W), height=str(_H),
                     viewBox=f"0 0 {_W} {_H}")
    ET.SubElement(svg, "title").text = title
    ET.SubElement(svg, "metadata").text = source_csv
    ET.SubElement(svg, "rect", x="0", y="0", width=str(_W), height=str(_H), fill="white")
    ET.SubElement(svg, "rect", x=str(_PAD), y=str(_PAD), width=str(_W - 2 * _PAD),
                  height=str(_H - 2 * _PAD), fill="none", stroke="black")
    ET.SubElement(svg, "text", {"x": str(_W / 2), "y": str(_PAD / 2), "text-anchor": "middle"}).text = title
    ET.SubElement(svg, "text", {"x": str(_W / 2), "y": str(_H - 12), "text-anchor": "middle"}).text = (
        xlabel + (" (log10)" if logx else ""))
    ET.SubElement(svg, "text", {"x": "14", "y": str(_H / 2), "text-anchor": "middle",
                                "transform": f"rotate(-90 14 {_H / 2})"}).text = ylabel + (" (log10)" if logy else "")
    for v, anchor in ((x0, "start"), (x1, "end")):
        ET.SubElement(svg, "text", {"x": str(_PAD if anchor == "start" else _W - _PAD), "y": str(_H - _PAD + 16),
                                    "text-anchor": anchor, "font-size": "10"}).text = _fmt(v)
    for v, y in ((y0, _H - _PAD), (y1, _PAD)):
        ET.SubElement(svg, "text", {"x": str(_PAD - 4), "y": str(y), "text-anchor": "end",
                                    "font-size": "10"}).text = _fmt(v)
    for k, (label, xs, ys) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))
        ET.SubElement(svg, "polyline", points=pts, fill="none", stroke=color, **{"stroke-width": "1.5"})
        ET.SubElement(svg, "text", {"x": str(_W - _PAD - 4), "y": str(_PAD + 14 + 14 * k), "fill": color,
                                    "text-anchor": "end", "font-size": "11"}).text = label
    return ET.ElementTree(svg)


def _step_xy(e: np.ndarray, p: np.ndarray):
    # right-continuous steps: (e_1, 0) -> (e_1, 1/N) -> (e_2, 1/N) -> ...
    xs = np.repeat(e, 2)
    ys = np.concatenate([[0.0], np.repeat(p, 2)[:-1]])
    return xs, ys


def emit_svg_plots(report: EvalReport, out_dir, curve=None) -> List[str]:
    """Render the CDF panels (and the loss curve if given) as standalone SVG."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for j, name in enumerate(report.components):
        e, p = report.cdf_rows(j)
        xs, ys = _step_xy(e, p)
        tree = _svg_panel(f"CDF of squared error, {name}", "squared error", "CDF",
                          [(name, xs, ys)], logx=True, logy=False, source_csv=_cdf_csv(e, p))
        path = os.path.join(out_dir, f"cdf_{name}.svg")
        tree.write(path, encoding="utf-8", xml_declaration=True)
        paths.append(path)
    if curve is not None:
        from .trainer import CURVE_COLUMNS

        epochs = curve.column("epoch")
        series = [(name, epochs, curve.column(name)) for name in CURVE_COLUMNS[1:]
                  if np.any(curve.column(name) > 0)]
        if not series:
            return paths
        tree = _svg_panel("Training losses", "epoch", "loss", series, logx=False, logy=True,
                          source_csv=curve.to_csv())
        path = os.path.join(out_dir, "loss_curve.svg")
        tree.write(path, encoding="utf-8", xml_declaration=True)
        paths.append(path)
    return paths
