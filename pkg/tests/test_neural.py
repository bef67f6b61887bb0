import numpy as np
import pytest

from kktnet.dataset import GenConfig, generate
from kktnet.errors import EmptyBatch, MissingGroundTruth, ShapeMismatch, ValidationError
from kktnet.neural import (AdamState, LPBatch, MlpModel, adam_step, finite_difference_grad, forward, gradcheck,
                           init_mlp, loss_and_grad, loss_value, max_relative_error, predict)
from kktnet.dataset import LabeledExample
from kktnet.problem import KktPoint, LossWeights, combined_loss, normalize
from kktnet.trainer import preset_weights


@pytest.fixture(scope="module")
def examples():
    return generate(GenConfig(16, 4))


def zero_model(hidden=(3,)):
    m = init_mlp(hidden, 0)
    return MlpModel([np.zeros_like(w) for w in m.weights], [np.zeros_like(b) for b in m.biases])


def test_init_shapes_and_determinism():
    a, b = init_mlp([64, 64], 7), init_mlp([64, 64], 7)
    assert a == b
    assert [w.shape for w in a.weights] == [(64, 8), (64, 64), (4, 64)]
    assert all(not b.any() for b in a.biases)
    assert not a == init_mlp([64, 64], 8)
    # Glorot-uniform bound
    assert np.abs(a.weights[1]).max() <= np.sqrt(6 / 128)
    with pytest.raises(ValidationError):
        init_mlp([], 0)


def test_zero_network_outputs_zero():
    x, lam = forward(zero_model(), np.arange(8.0))
    assert not x.any() and not lam.any()


def test_single_affine_layer():
    rng = np.random.default_rng(0)
    W, u, v = rng.normal(size=(4, 8)), rng.normal(size=4), rng.normal(size=8)
    x, lam = forward(MlpModel([W], [u]), v)
    np.testing.assert_allclose(np.concatenate([x, lam]), W @ v + u, rtol=1e-15)


def test_forward_is_deterministic():
    a = predict(init_mlp([64, 64], 3), np.ones((1, 8)))
    b = predict(init_mlp([64, 64], 3), np.ones((1, 8)))
    assert a.tobytes() == b.tobytes()


def test_model_rejects_broken_chain():
    with pytest.raises(ValidationError):
        MlpModel([np.zeros((3, 8)), np.zeros((4, 2))], [np.zeros(3), np.zeros(4)])


def test_serialization_round_trip(tmp_path):
    m = init_mlp([5, 6], 2)
    m = MlpModel(m.weights, [b + 0.1 * k for k, b in enumerate(m.biases)])
    m.save(tmp_path / "m.json")
    back = MlpModel.load(tmp_path / "m.json")
    assert back == m
    m.save(tmp_path / "m2.json")
    assert (tmp_path / "m.json").read_bytes() == (tmp_path / "m2.json").read_bytes()


def test_zero_network_stationarity_loss(box_lp):
    inst, theta = normalize(box_lp)
    ex = LabeledExample(inst, KktPoint([1, 1], [1, 1]), theta, 0)
    r = loss_and_grad(zero_model(), [ex], LossWeights(0, 0, 0, 1, beta=0))
    assert r.loss == 1.0
    assert r.terms.as_tuple() == (0.0, 0.0, 0.0, 1.0)


def test_perfect_prediction_has_zero_data_loss(examples):
    # a single affine layer with zero weights whose bias equals the label
    ex = examples[0]
    y = np.concatenate([ex.truth.x, ex.truth.lam])
    m = MlpModel([np.zeros((4, 8))], [y])
    r = loss_and_grad(m, [ex, ex], LossWeights(0, 0, 0, 0, beta=1))
    assert r.loss == 0.0
    assert all(not g.any() for g in r.grad)


def test_loss_matches_problem_core(examples):
    m = init_mlp([6], 1)
    for mode in ("kkt", "data", "combined"):
        w = preset_weights(mode)
        r = loss_and_grad(m, examples, w)
        preds = [KktPoint(*forward(m, ex.features())) for ex in examples]
        ref = combined_loss([ex.instance for ex in examples], preds,
                            [ex.truth for ex in examples], w)
        assert r.loss == pytest.approx(ref, rel=1e-13, abs=1e-15)
        assert loss_value(m, examples, w) == r.loss


@pytest.mark.parametrize("mode", ["kkt", "data", "combined"])
def test_gradient_matches_finite_differences(examples, mode):
    m = init_mlp([5], 2)
    rng = np.random.default_rng(9)
    m = MlpModel(m.weights, [rng.normal(scale=0.1, size=b.shape) for b in m.biases])
    batch = LPBatch.from_examples(examples[:6])
    w = preset_weights(mode)
    err = max_relative_error(loss_and_grad(m, batch, w).grad, finite_difference_grad(m, batch, w))
    assert err < (1e-7 if mode == "data" else 1e-5)


def test_gradcheck_defaults():
    assert gradcheck(0) < 1e-5
    assert gradcheck(1, preset_weights("data")) < 1e-7
    assert gradcheck(2, preset_weights("kkt")) < 1e-5


def test_gradient_shapes(examples):
    m = init_mlp([7, 3], 0)
    g = loss_and_grad(m, examples, preset_weights("combined")).grad
    assert [a.shape for a in g] == [p.shape for p in m.params()]


def test_missing_labels_and_empty(examples):
    batch = LPBatch.from_examples(examples, labels=False)
    with pytest.raises(MissingGroundTruth):
        loss_and_grad(init_mlp([4], 0), batch, preset_weights("data"))
    loss_and_grad(init_mlp([4], 0), batch, preset_weights("kkt"))
    with pytest.raises(EmptyBatch):
        loss_and_grad(init_mlp([4], 0), [], preset_weights("kkt"))


def scalar_model(v):
    return MlpModel([np.array([[v]])], [np.zeros(1)])


def test_adam_first_step():
    m = scalar_model(0.5)
    st = AdamState.for_model(m, lr=1e-3)
    new, st2 = adam_step(m, [np.array([[2.0]]), np.zeros(1)], st)
    # bias-corrected moments at t=1 are g and g^2
    assert 0.5 - new.weights[0][0, 0] == pytest.approx(1e-3 * 2 / (2 + 1e-8), rel=1e-12)
    assert st2.step == 1
    assert st2.m[0][0, 0] == pytest.approx(0.2) and st2.v[0][0, 0] == pytest.approx(0.004)


def test_adam_zero_gradient_decays_moments():
    m = scalar_model(0.5)
    st = AdamState([np.array([[1.0]]), np.zeros(1)], [np.array([[4.0]]), np.zeros(1)], 3)
    zero = [np.zeros((1, 1)), np.zeros(1)]
    new, st2 = adam_step(m, zero, st)
    assert st2.m[0][0, 0] == pytest.approx(0.9) and st2.v[0][0, 0] == pytest.approx(4 * 0.999)
    # parameters still move along the stored momentum; with fresh moments they do not
    new0, _ = adam_step(m, zero, AdamState.for_model(m))
    assert new0 == m


def test_adam_deterministic_and_shape_checked():
    m = init_mlp([3], 0)
    g = [np.ones_like(p) for p in m.params()]
    a = adam_step(m, g, AdamState.for_model(m))[0]
    b = adam_step(m, g, AdamState.for_model(m))[0]
    assert a == b
    with pytest.raises(ShapeMismatch):
        adam_step(m, g[:-1], AdamState.for_model(m))
    with pytest.raises(ShapeMismatch):
        adam_step(m, [np.ones((2, 2))] + g[1:], AdamState.for_model(m))
