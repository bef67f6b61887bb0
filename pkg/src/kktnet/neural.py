"""Fully connected tanh network, exact gradients of the combined loss, and Adam.

The network maps the flattened LP parameters ``(A row-major, b, c)`` to the
predicted primal and dual variables ``(x_hat, lam_hat)``. The dual head is
linear and unconstrained; negative duals are only penalized by the loss.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import EmptyBatch, MissingGroundTruth, ShapeMismatch, ValidationError
from .problem import LossTerms, LossWeights, combine, residuals, squared_error_sums, weighted_kkt

INPUT_DIM = 8
OUTPUT_DIM = 4
N_VARS = 2


@dataclass(eq=False)
class MlpModel:
    """Layer ``k`` computes ``weights[k] @ a + biases[k]``; tanh between layers."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation != "tanh":
            raise ValidationError(f"unsupported activation {self.activation!r}")
        if not self.weights or len(self.weights) != len(self.biases):
            raise ShapeMismatch("need one bias per weight matrix and at least one layer")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ShapeMismatch(f"layer {k}: weight {W.shape} and bias {b.shape} disagree")
            if k and W.shape[1] != self.weights[k - 1].shape[0]:
                raise ShapeMismatch(f"layer {k} expects {W.shape[1]} inputs, "
                                    f"previous layer gives {self.weights[k - 1].shape[0]}")
            if not (np.isfinite(W).all() and np.isfinite(b).all()):
                raise ValidationError(f"layer {k} has non-finite parameters")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    def params(self) -> List[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    @classmethod
    def from_params(cls, params: Sequence[np.ndarray], activation: str = "tanh") -> "MlpModel":
        return cls(list(params[0::2]), list(params[1::2]), activation)

    def astype(self, dtype) -> "MlpModel":
        return MlpModel.from_params([p.astype(dtype) for p in self.params()], self.activation)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "activation": self.activation,
            "layers": [{"rows": W.shape[0], "cols": W.shape[1], "w": W.ravel().tolist(), "b": b.tolist()}
                       for W, b in zip(self.weights, self.biases)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MlpModel":
        try:
            weights = [np.array(L["w"], dtype=np.float64).reshape(L["rows"], L["cols"]) for L in doc["layers"]]
            biases = [np.array(L["b"], dtype=np.float64) for L in doc["layers"]]
            model = cls(weights, biases, doc.get("activation", "tanh"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed model document: {exc}") from None
        if model.input_dim != doc["input_dim"] or model.output_dim != doc["output_dim"]:
            raise ShapeMismatch("declared input/output dims disagree with the layers")
        return model

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, allow_nan=False)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "MlpModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def __eq__(self, other):
        if not isinstance(other, MlpModel):
            return NotImplemented
        mine, theirs = self.params(), other.params()
        return (self.activation == other.activation and len(mine) == len(theirs)
                and all(a.shape == b.shape and np.array_equal(a, b) for a, b in zip(mine, theirs)))


def init_mlp(hidden_dims: Sequence[int], seed: int, input_dim: int = INPUT_DIM,
             output_dim: int = OUTPUT_DIM) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    if not hidden_dims or any(int(d) < 1 for d in hidden_dims):
        raise ValidationError("hidden_dims must be a nonempty list of positive sizes")
    rng = np.random.default_rng(seed)
    dims = [input_dim, *map(int, hidden_dims), output_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases)


def _activations(model: MlpModel, X: np.ndarray) -> List[np.ndarray]:
    acts = [X]
    last = len(model.weights) - 1
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ W.T + b
        acts.append(z if k == last else np.tanh(z))
    return acts


def predict(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Batched forward pass: (K, input_dim) -> (K, output_dim)."""
    return _activations(model, X)[-1]


def forward(model: MlpModel, features) -> Tuple[np.ndarray, np.ndarray]:
    """Single forward pass returning ``(x_hat, lam_hat)``."""
    out = predict(model, np.asarray(features, dtype=np.float64).reshape(1, -1))[0]
    return out[:N_VARS], out[N_VARS:]


class LPBatch(NamedTuple):
    """Stacked LP batch. ``targets`` holds (x*, lam*) rows or is None."""

    features: np.ndarray
    G: np.ndarray
    h: np.ndarray
    c: np.ndarray
    targets: Optional[np.ndarray]

    @classmethod
    def from_examples(cls, examples, labels: bool = True) -> "LPBatch":
        from .dataset import stack

        if len(examples) == 0:
            raise EmptyBatch("empty batch")
        return cls(*stack(examples, labels))

    def take(self, idx) -> "LPBatch":
        return LPBatch(self.features[idx], self.G[idx], self.h[idx], self.c[idx],
                       None if self.targets is None else self.targets[idx])

    def astype(self, dtype) -> "LPBatch":
        return LPBatch(*(None if a is None else a.astype(dtype) for a in self))

    def __len__(self):
        return self.features.shape[0]


class LossAndGrad(NamedTuple):
    loss: float
    grad: List[np.ndarray]
    terms: LossTerms
    l_kkt: float
    l_data: float


def _as_batch(batch: Union[LPBatch, Sequence]) -> LPBatch:
    if isinstance(batch, LPBatch):
        if len(batch) == 0:
            raise EmptyBatch("empty batch")
        return batch
    return LPBatch.from_examples(batch)


def _loss_pieces(model: MlpModel, b: LPBatch, w: LossWeights):
    acts = _activations(model, b.features)
    out = acts[-1]
    n = b.c.shape[1]
    res = residuals(b.c, b.G, b.h, out[:, :n], out[:, n:])
    per_example = weighted_kkt(res.terms, w)
    sq_err = None
    if w.beta > 0:
        if b.targets is None:
            raise MissingGroundTruth("beta > 0 requires ground-truth solutions in the batch")
        sq_err = squared_error_sums(out, b.targets)
    return acts, res, per_example, sq_err


def loss_value(model: MlpModel, batch, w: LossWeights) -> float:
    """Combined loss only; dtype follows the model and batch arrays."""
    b = _as_batch(batch)
    _, _, per_example, sq_err = _loss_pieces(model, b, w)
    return combine(per_example, w, sq_err)


def loss_and_grad(model: MlpModel, batch, w: LossWeights) -> LossAndGrad:
    """Combined loss on a batch and its exact gradient w.r.t. every parameter.

    ``grad`` lists arrays in ``model.params()`` order. The hinge
    ``max(0, z)`` has subgradient 0 at ``z = 0``.
    """
    b = _as_batch(batch)
    acts, res, per_example, sq_err = _loss_pieces(model, b, w)
    out = acts[-1]
    K, n = b.c.shape
    m = b.G.shape[1]
    x, lam = out[:, :n], out[:, n:]
    s, r = res.slack, res.stat

    loss = combine(per_example, w, sq_err)
    l_data = float(sq_err.mean()) if sq_err is not None else 0.0

    # d(loss)/d(out), the batch mean folded into 1/K.
    dx = np.zeros_like(x)
    dlam = np.zeros_like(lam)
    if m > 0:
        viol = np.maximum(s, 0.0)
        neg = np.maximum(-lam, 0.0)
        # coefficient on G rows for the x-gradient: a1*viol + a3*lam^2*s
        row_coef = w.alpha1 * viol + w.alpha3 * (lam * lam) * s
        dx += (2.0 / m) * np.einsum("ki,kij->kj", row_coef, b.G)
        dlam += (2.0 / m) * (w.alpha3 * lam * s * s - w.alpha2 * neg)
    dlam += (2.0 * w.alpha4 / n) * np.einsum("kij,kj->ki", b.G, r)
    dout = np.concatenate([dx, dlam], axis=1) / K
    if sq_err is not None:
        dout += (2.0 * w.beta / K) * (out - b.targets)

    grads: List[np.ndarray] = []
    delta = dout
    for k in range(len(model.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))
        grads.append(delta.T @ acts[k])
        if k:
            a = acts[k]
            delta = (delta @ model.weights[k]) * (1.0 - a * a)
    grads.reverse()

    mean_terms = res.terms.mean(axis=0)
    terms = LossTerms(*(float(t) for t in mean_terms))
    return LossAndGrad(float(loss), grads, terms, float(per_example.mean()), l_data)


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_model(cls, model: MlpModel, lr: float = 1e-3, beta1: float = 0.9,
                  beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        params = model.params()
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params],
                   0, lr, beta1, beta2, eps)


def adam_step(model: MlpModel, grad: Sequence[np.ndarray], state: AdamState):
    """One bias-corrected Adam update. Returns ``(new_model, new_state)``."""
    params = model.params()
    if len(grad) != len(params) or len(state.m) != len(params):
        raise ShapeMismatch("gradient/state do not match the model's parameter list")
    for p, g, mo in zip(params, grad, state.m):
        if p.shape != g.shape or p.shape != mo.shape:
            raise ShapeMismatch(f"parameter {p.shape} vs gradient {g.shape} vs moment {mo.shape}")
    t = state.step + 1
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, mo, ve in zip(params, grad, state.m, state.v):
        mo = state.beta1 * mo + (1.0 - state.beta1) * g
        ve = state.beta2 * ve + (1.0 - state.beta2) * (g * g)
        new_p.append(p - state.lr * (mo / c1) / (np.sqrt(ve / c2) + state.eps))
        new_m.append(mo)
        new_v.append(ve)
    new_state = AdamState(new_m, new_v, t, state.lr, state.beta1, state.beta2, state.eps)
    return MlpModel.from_params(new_p, model.activation), new_state


def finite_difference_grad(model: MlpModel, batch, w: LossWeights, h: float = 1e-5) -> List[np.ndarray]:
    """Central differences of the combined loss, evaluated in extended precision.

    Each coordinate costs two loss evaluations; meant for small models.
    """
    b = _as_batch(batch).astype(np.longdouble)
    params = [p.astype(np.longdouble) for p in model.params()]
    out = []
    for p in params:
        g = np.zeros(p.shape)
        flat = p.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_value(MlpModel.from_params(params), b, w)
            flat[i] = orig - h
            down = loss_value(MlpModel.from_params(params), b, w)
            flat[i] = orig
            g.reshape(-1)[i] = float((up - down) / (2 * h))
        out.append(g)
    return out


def max_relative_error(analytic: Sequence[np.ndarray], numeric: Sequence[np.ndarray],
                       floor: float = 1e-6) -> float:
    """Largest ``|g - fd| / max(|g|, |fd|)`` over coordinates with ``|g| > floor``."""
    worst = 0.0
    for g, fd in zip(analytic, numeric):
        mask = np.abs(g) > floor
        if mask.any():
            rel = np.abs(g[mask] - fd[mask]) / np.maximum(np.abs(g[mask]), np.abs(fd[mask]))
            worst = max(worst, float(rel.max()))
    return worst


def gradcheck(seed: int = 0, weights: Optional[LossWeights] = None, hidden=(8,),
              n_examples: int = 4, h: float = 1e-5) -> float:
    """Compare ``loss_and_grad`` against central differences on a tiny random problem.

    Builds an 8->8->4 model with random weights and biases and a batch of
    generated LPs; returns the maximum relative error over coordinates with
    ``|g| > 1e-6``. Defaults to the combined-loss weights.
    """
    from .dataset import GenConfig, generate

    if weights is None:
        weights = LossWeights(0.1, 0.1, 0.2, 0.6, 1.0)
    model = init_mlp(hidden, seed)
    rng = np.random.default_rng([seed & ((1 << 64) - 1), 1])
    model = MlpModel(model.weights, [rng.normal(scale=0.1, size=b.shape) for b in model.biases])
    batch = LPBatch.from_examples(generate(GenConfig(n_examples, seed)))
    analytic = loss_and_grad(model, batch, weights).grad
    numeric = finite_difference_grad(model, batch, weights, h)
    return max_relative_error(analytic, numeric)
