import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from kktnet.dataset import GenConfig, generate
from kktnet.errors import DimensionMismatch, EmptyTestSet, MissingGroundTruth
from kktnet.evaluator import (COMPONENTS, emit_cdf_csv, emit_summary_json, emit_svg_plots, evaluate,
                              report_from_predictions)
from kktnet.neural import MlpModel, init_mlp
from kktnet.trainer import TrainConfig, preset_weights, train

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def test_set():
    return generate(GenConfig(30, 21))


def labels(ds):
    return np.array([np.concatenate([ex.truth.x, ex.truth.lam]) for ex in ds])


def zero_model():
    return MlpModel([np.zeros((4, 8))], [np.zeros(4)])


def test_identity_predictions(tmp_path):
    y = np.random.default_rng(0).normal(size=(5, 4))
    rep = report_from_predictions(y, y)
    assert not rep.rmse.any()
    emit_cdf_csv(rep, tmp_path)
    rows = (tmp_path / "cdf_x1.csv").read_text().splitlines()
    assert rows[0] == "sq_error,cdf"
    assert all(r.split(",")[0] == "0.0" for r in rows[1:])


def test_rmse_arithmetic():
    pred = np.zeros((2, 4))
    truth = np.array([[1.0, 0, 0, 0], [3.0, 0, 0, 0]])
    rep = report_from_predictions(pred, truth)
    assert rep.rmse[0] == math.sqrt(5)
    assert rep.components == COMPONENTS


def test_zero_model_rmse(test_set):
    rep = evaluate(zero_model(), test_set)
    y = labels(test_set)
    for j in range(4):
        assert rep.rmse[j] == pytest.approx(math.sqrt(np.mean([v * v for v in y[:, j]])), rel=1e-14)
    assert rep.count == 30


def test_cdf_rows(tmp_path):
    pred = np.zeros((3, 4))
    truth = np.zeros((3, 4))
    truth[:, 0] = [2.0, -1.0, 0.0]
    rep = report_from_predictions(pred, truth)
    emit_cdf_csv(rep, tmp_path)
    rows = [tuple(map(float, r.split(","))) for r in (tmp_path / "cdf_x1.csv").read_text().splitlines()[1:]]
    assert rows == [(0.0, 1 / 3), (1.0, 2 / 3), (4.0, 1.0)]


def test_single_example(tmp_path):
    rep = report_from_predictions(np.ones((1, 4)), np.zeros((1, 4)))
    emit_cdf_csv(rep, tmp_path)
    assert (tmp_path / "cdf_lambda2.csv").read_text() == "sq_error,cdf\n1.0,1.0\n"


def test_output_files(tmp_path, test_set):
    rep = evaluate(init_mlp([8], 0), test_set)
    paths = emit_cdf_csv(rep, tmp_path)
    names = sorted(p.rsplit("/", 1)[-1] for p in map(str, paths))
    assert names == ["cdf_lambda1.csv", "cdf_lambda2.csv", "cdf_x1.csv", "cdf_x2.csv", "rmse.csv"]
    rows = (tmp_path / "rmse.csv").read_text().splitlines()
    assert rows[0] == "component,rmse" and [r.split(",")[0] for r in rows[1:]] == list(COMPONENTS)
    for name in COMPONENTS:
        data = np.loadtxt(tmp_path / f"cdf_{name}.csv", delimiter=",", skiprows=1)
        assert np.all(np.diff(data[:, 0]) >= 0) and np.all(np.diff(data[:, 1]) > 0)
        assert data[-1, 1] == 1.0
    emit_summary_json(rep, tmp_path)
    summary = json.loads((tmp_path / "report.json").read_text())
    assert summary["count"] == 30 and set(summary["rmse"]) == set(COMPONENTS)


def test_rmse_is_order_invariant(test_set):
    m = init_mlp([8], 1)
    a = evaluate(m, test_set).rmse
    b = evaluate(m, test_set[::-1]).rmse
    assert a.tobytes() == b.tobytes()


def test_errors(test_set):
    with pytest.raises(EmptyTestSet):
        evaluate(zero_model(), [])
    with pytest.raises(MissingGroundTruth):
        evaluate(zero_model(), [test_set[0].without_truth()])
    with pytest.raises(DimensionMismatch):
        evaluate(MlpModel([np.zeros((3, 8))], [np.zeros(3)]), test_set)
    with pytest.raises(DimensionMismatch):
        report_from_predictions(np.zeros((2, 4)), np.zeros((3, 4)))


def test_svg_panels(tmp_path, test_set):
    model, curve = train(test_set, TrainConfig("kkt", preset_weights("kkt"), epochs=3, hidden_dims=(4,)))
    rep = evaluate(model, test_set)
    emit_cdf_csv(rep, tmp_path)
    paths = emit_svg_plots(rep, tmp_path, curve)
    assert len(paths) == 5
    for name in COMPONENTS:
        root = ET.parse(tmp_path / f"cdf_{name}.svg").getroot()
        assert root.tag == SVG + "svg"
        assert root.find(SVG + "metadata").text == (tmp_path / f"cdf_{name}.csv").read_text()
        assert root.find(SVG + "polyline") is not None
    root = ET.parse(tmp_path / "loss_curve.svg").getroot()
    assert root.find(SVG + "metadata").text == curve.to_csv()


def test_no_svg_without_request(tmp_path, test_set):
    rep = evaluate(zero_model(), test_set)
    emit_cdf_csv(rep, tmp_path)
    emit_summary_json(rep, tmp_path)
    assert not list(tmp_path.glob("*.svg"))
