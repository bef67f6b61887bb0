"""Minibatch Adam training under the three loss configurations."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyDataset, InvalidConfig, MissingGroundTruth
from .neural import AdamState, LPBatch, MlpModel, adam_step, init_mlp, loss_and_grad
from .problem import LossWeights

log = logging.getLogger(__name__)

MODES = ("kkt", "data", "combined")
CURVE_COLUMNS = ("epoch", "L_PF", "L_DF", "L_CS", "L_S", "L_KKT", "L_Data", "L_total")

KKT_ALPHAS = (0.1, 0.1, 0.2, 0.6)


@dataclass(frozen=True)
class TrainConfig:
    mode: str
    weights: LossWeights
    epochs: int = 200
    batch_size: int = 1024
    lr: float = 1e-3
    hidden_dims: Tuple[int, ...] = (64, 64)
    seed: int = 0
    model_path: Optional[str] = None
    curve_path: Optional[str] = None

    def __post_init__(self):
        w = self.weights
        any_alpha = any(a > 0 for a in w.alphas) or w.alpha_eq > 0
        if self.mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "kkt" and w.beta != 0:
            raise InvalidConfig("kkt mode requires beta = 0")
        if self.mode == "data" and (any_alpha or w.beta <= 0):
            raise InvalidConfig("data mode requires all alphas = 0 and beta > 0")
        if self.mode == "combined" and not (any_alpha and w.beta > 0):
            raise InvalidConfig("combined mode requires some alpha > 0 and beta > 0")
        if self.mode == "kkt" and not any_alpha:
            raise InvalidConfig("kkt mode requires some alpha > 0")
        if int(self.epochs) < 1 or int(self.batch_size) < 1:
            raise InvalidConfig("epochs and batch_size must be at least 1")
        if not (math.isfinite(self.lr) and self.lr > 0):
            raise InvalidConfig("learning rate must be positive")
        if not self.hidden_dims or any(int(d) < 1 for d in self.hidden_dims):
            raise InvalidConfig("hidden_dims must be a nonempty list of positive sizes")


def preset_weights(mode: str) -> LossWeights:
    if mode == "data":
        return LossWeights(0.0, 0.0, 0.0, 0.0, beta=1.0)
    if mode == "kkt":
        return LossWeights(*KKT_ALPHAS, beta=0.0)
    if mode == "combined":
        return LossWeights(*KKT_ALPHAS, beta=1.0)
    raise InvalidConfig(f"unknown mode {mode!r}")


def preset_configs(**overrides) -> Dict[str, TrainConfig]:
    """The data-only, KKT-only and combined configurations.

    ``overrides`` (epochs, lr, seed, ...) apply to all three; they share one
    seed so runs start from the same initialization.
    """
    return {mode: TrainConfig(mode, preset_weights(mode), **overrides) for mode in ("data", "kkt", "combined")}


@dataclass
class TrainingCurve:
    """Per-epoch means of the minibatch losses, one row per epoch."""

    rows: np.ndarray = field(default_factory=lambda: np.zeros((0, len(CURVE_COLUMNS))))

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, CURVE_COLUMNS.index(name)]

    def to_csv(self) -> str:
        lines = [",".join(CURVE_COLUMNS)]
        for row in self.rows:
            lines.append(",".join([str(int(row[0]))] + [repr(float(v)) for v in row[1:]]))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read(cls, path) -> "TrainingCurve":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            if tuple(header) != CURVE_COLUMNS:
                raise ValueError(f"unexpected curve header {header}")
            rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
        return cls(np.array(rows).reshape(-1, len(CURVE_COLUMNS)))


def _training_batch(dataset, cfg: TrainConfig) -> LPBatch:
    if cfg.weights.beta > 0 and any(ex.truth is None for ex in dataset):
        raise MissingGroundTruth(f"{cfg.mode} mode needs ground-truth labels on every example")
    # The KKT-only objective never touches labels.
    return LPBatch.from_examples(dataset, labels=cfg.weights.beta > 0)


def train(dataset: Sequence, cfg: TrainConfig) -> Tuple[MlpModel, TrainingCurve]:
    """Train a fresh network on ``dataset`` (a list of LabeledExample).

    Each epoch reshuffles with a generator seeded from ``cfg.seed`` and takes
    one Adam step per minibatch. The curve's L_Data column is the data loss
    actually optimized, so it reads 0 when ``beta = 0``.
    """
    if len(dataset) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    data = _training_batch(dataset, cfg)
    N = len(data)
    model = init_mlp(cfg.hidden_dims, cfg.seed, data.features.shape[1], data.G.shape[2] + data.G.shape[1])
    state = AdamState.for_model(model, lr=cfg.lr)
    rng = np.random.default_rng([cfg.seed & ((1 << 64) - 1), 2])

    rows = np.zeros((cfg.epochs, len(CURVE_COLUMNS)))
    for epoch in range(cfg.epochs):
        order = rng.permutation(N)
        acc = np.zeros(len(CURVE_COLUMNS) - 1)
        n_batches = 0
        for start in range(0, N, cfg.batch_size):
            r = loss_and_grad(model, data.take(order[start:start + cfg.batch_size]), cfg.weights)
            model, state = adam_step(model, r.grad, state)
            acc += (*r.terms.as_tuple(), r.l_kkt, r.l_data, r.loss)
            n_batches += 1
        rows[epoch, 0] = epoch + 1
        rows[epoch, 1:] = acc / n_batches
        log.debug("epoch %d: L_KKT=%.6g L_Data=%.6g total=%.6g", epoch + 1, *rows[epoch, 5:])
    curve = TrainingCurve(rows)

    if cfg.model_path:
        model.save(cfg.model_path)
    if cfg.curve_path:
        curve.write(cfg.curve_path)
    return model, curve


def with_paths(cfg: TrainConfig, model_path=None, curve_path=None) -> TrainConfig:
    return replace(cfg, model_path=model_path, curve_path=curve_path)
