"""Random LP instances with exact primal/dual labels, JSONL persistence, splits."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import GenerationExhausted, MalformedRecord, TooFewExamples, ValidationError
from .oracle import _accepted_outcome, verify_kkt
from .problem import KktPoint, ProblemInstance, normalize

log = logging.getLogger(__name__)

_U64 = (1 << 64) - 1
RECORD_KEYS = ("A", "b", "c", "theta", "x_star", "lambda_star", "seed_tag")


@dataclass
class LabeledExample:
    """A normalized LP, its normalization constant and (optionally) its solution.

    ``truth`` is None when labels have been withheld.
    """

    instance: ProblemInstance
    truth: Optional[KktPoint]
    theta: float
    seed_tag: int

    def __post_init__(self):
        if not (math.isfinite(self.theta) and self.theta > 0):
            raise ValidationError(f"theta must be positive, got {self.theta}")
        if any(b.size and np.abs(b).max() > 1.0 for b in self.instance.blocks()):
            raise ValidationError("normalized instance has entries outside [-1, 1]")
        if self.truth is not None:
            self.truth.check_dims(self.instance)

    def features(self) -> np.ndarray:
        """Network input: A row-major, then b, then c."""
        inst = self.instance
        return np.concatenate([inst.g_mat.ravel(), inst.h_vec, inst.q_vec])

    def without_truth(self) -> "LabeledExample":
        return replace(self, truth=None)


@dataclass(frozen=True)
class GenConfig:
    count: int
    seed: int
    entry_range: float = 10.0
    max_attempts_per_example: int = 1000

    def __post_init__(self):
        if int(self.count) < 1:
            raise ValidationError("count must be at least 1")
        if not (math.isfinite(self.entry_range) and self.entry_range > 0):
            raise ValidationError("entry_range must be positive")
        if int(self.max_attempts_per_example) < 1:
            raise ValidationError("max_attempts_per_example must be at least 1")


def example_tag(seed: int, index: int) -> int:
    """Counter-based 64-bit sub-seed for example ``index`` of a run."""
    ss = np.random.SeedSequence([seed & _U64, index])
    return int(ss.generate_state(1, np.uint64)[0])


def raw_draws(seed_tag: int, entry_range: float):
    """Generator of raw (unnormalized) LP draws for one example slot."""
    rng = np.random.default_rng(seed_tag)
    zeros = np.zeros((2, 2))
    empty = np.zeros((0, 2))
    while True:
        v = rng.uniform(-entry_range, entry_range, size=8)
        yield ProblemInstance._trusted(zeros, v[6:8], 0.0, v[:4].reshape(2, 2), v[4:6], empty, np.zeros(0))


def _make_example(cfg: GenConfig, index: int) -> Tuple[LabeledExample, int]:
    tag = example_tag(cfg.seed, index)
    draws = raw_draws(tag, cfg.entry_range)
    for attempt in range(1, cfg.max_attempts_per_example + 1):
        raw = next(draws)
        inst, theta = normalize(raw)
        out = _accepted_outcome(inst)
        if out is not None:
            return LabeledExample(inst, out.point, theta, tag), attempt
    raise GenerationExhausted(
        f"example {index}: no acceptable instance in {cfg.max_attempts_per_example} draws")


def _make_range(args):
    cfg, start, stop = args
    return [_make_example(cfg, i) for i in range(start, stop)]


def generate(cfg: GenConfig, workers: int = 1) -> List[LabeledExample]:
    """Draw, normalize, filter and label ``cfg.count`` LP instances.

    Output depends only on ``cfg``; the worker count does not change it.
    """
    if workers > 1:
        step = math.ceil(cfg.count / workers)
        chunks = [(cfg, s, min(s + step, cfg.count)) for s in range(0, cfg.count, step)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pairs = [p for part in pool.map(_make_range, chunks) for p in part]
    else:
        pairs = _make_range((cfg, 0, cfg.count))
    examples = [ex for ex, _ in pairs]
    attempts = sum(a for _, a in pairs)
    _log_audit(examples, attempts)
    return examples


def _log_audit(examples: Sequence[LabeledExample], attempts: int) -> None:
    if not examples or not log.isEnabledFor(logging.INFO):
        return
    thetas = np.array([ex.theta for ex in examples])
    lams = np.concatenate([ex.truth.lam for ex in examples])
    qs = (0.0, 0.25, 0.5, 0.75, 1.0)
    log.info("accepted %d of %d draws (rate %.4f)", len(examples), attempts, len(examples) / attempts)
    log.info("theta quantiles %s: %s", qs, np.quantile(thetas, qs).round(6).tolist())
    log.info("lambda* quantiles %s: %s", qs, np.quantile(lams, qs).round(6).tolist())


# -- persistence ----------------------------------------------------------------

def to_record(ex: LabeledExample) -> dict:
    inst = ex.instance
    rec = {"A": inst.g_mat.tolist(), "b": inst.h_vec.tolist(), "c": inst.q_vec.tolist(),
           "theta": float(ex.theta)}
    if ex.truth is not None:
        rec["x_star"] = ex.truth.x.tolist()
        rec["lambda_star"] = ex.truth.lam.tolist()
    rec["seed_tag"] = int(ex.seed_tag)
    return rec


def from_record(rec: dict, line: int = 0) -> LabeledExample:
    if not isinstance(rec, dict):
        raise MalformedRecord(line, "record is not a JSON object")
    missing = [k for k in ("A", "b", "c", "theta", "seed_tag") if k not in rec]
    if missing:
        raise MalformedRecord(line, f"missing keys {missing}")
    extra = set(rec) - set(RECORD_KEYS)
    if extra:
        raise MalformedRecord(line, f"unknown keys {sorted(extra)}")
    if ("x_star" in rec) != ("lambda_star" in rec):
        raise MalformedRecord(line, "x_star and lambda_star must appear together")
    try:
        inst = ProblemInstance.lp(rec["A"], rec["b"], rec["c"])
        truth = None
        if "x_star" in rec:
            truth = KktPoint(rec["x_star"], rec["lambda_star"])
        tag = rec["seed_tag"]
        if not isinstance(tag, int) or isinstance(tag, bool):
            raise ValidationError("seed_tag must be an integer")
        ex = LabeledExample(inst, truth, float(rec["theta"]), tag)
    except (ValidationError, TypeError, ValueError) as exc:
        raise MalformedRecord(line, str(exc)) from None
    if truth is not None and not verify_kkt(inst, truth, 1e-8).passed:
        raise MalformedRecord(line, "stored solution fails the KKT check at 1e-8")
    return ex


def write_jsonl(examples: Iterable[LabeledExample], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(json.dumps(to_record(ex), allow_nan=False))
            fh.write("\n")


def read_jsonl(path) -> List[LabeledExample]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(lineno, f"invalid JSON: {exc.msg}") from None
            out.append(from_record(rec, lineno))
    return out


def split(examples: Sequence[LabeledExample], test_fraction: float, seed: int):
    """Seeded shuffle, then a ``(train, test)`` partition.

    The test part has ``ceil(fraction * N)`` items, clipped so that neither
    part is empty.
    """
    n = len(examples)
    if n < 2:
        raise TooFewExamples(f"need at least 2 examples to split, got {n}")
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError("test_fraction must lie in (0, 1)")
    n_test = min(max(math.ceil(test_fraction * n - 1e-9), 1), n - 1)
    order = np.random.default_rng(seed & _U64).permutation(n)
    test = [examples[i] for i in order[:n_test]]
    train = [examples[i] for i in order[n_test:]]
    return train, test


def stack(examples: Sequence[LabeledExample], labels: bool = True):
    """Arrays ``(features, G, h, c, targets)`` for a list of examples.

    ``targets`` (x*, lambda*) is None if ``labels`` is false or any example
    lacks labels.
    """
    feats = np.stack([ex.features() for ex in examples])
    G = np.stack([ex.instance.g_mat for ex in examples])
    h = np.stack([ex.instance.h_vec for ex in examples])
    c = np.stack([ex.instance.q_vec for ex in examples])
    if labels and all(ex.truth is not None for ex in examples):
        y = np.stack([ex.truth.flat() for ex in examples])
    else:
        y = None
    return feats, G, h, c, y
