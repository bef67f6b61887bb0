"""Problem and solution types, parameter normalization, and KKT residual losses.

Problems are stored in the QP standard form

    minimize    1/2 x'Px + q'x + r
    subject to  Gx <= h
                Aeq x = beq

A linear program ``min c'x s.t. Ax <= b`` is the special case ``P = 0``,
``r = 0``, ``q = c``, ``G = A``, ``h = b`` with no equality rows.

All residual computations are written once over a stacked batch (leading
axis ``K``) so that single-instance losses, batch losses and the training
objective share the same arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import AllZeroInstance, DimensionMismatch, EmptyBatch, MissingGroundTruth, ValidationError


def _as_matrix(a, rows: Optional[int], cols: int, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.size == 0:
        arr = arr.reshape(0 if rows is None else rows, cols)
    if arr.ndim != 2 or arr.shape[1] != cols or (rows is not None and arr.shape[0] != rows):
        raise DimensionMismatch(f"{name} has shape {arr.shape}, expected ({rows if rows is not None else 'k'}, {cols})")
    return arr


def _as_vector(a, length: Optional[int], name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64).reshape(-1) if np.size(a) else np.zeros(0)
    if length is not None and arr.shape[0] != length:
        raise DimensionMismatch(f"{name} has length {arr.shape[0]}, expected {length}")
    return arr


@dataclass(eq=False)
class ProblemInstance:
    """A parameterized convex QP/LP instance (see module docstring)."""

    p_mat: np.ndarray
    q_vec: np.ndarray
    r_const: float
    g_mat: np.ndarray
    h_vec: np.ndarray
    aeq_mat: np.ndarray
    beq_vec: np.ndarray

    def __post_init__(self):
        self.q_vec = _as_vector(self.q_vec, None, "q_vec")
        n = self.q_vec.shape[0]
        if n < 1:
            raise DimensionMismatch("problem needs at least one variable")
        self.p_mat = _as_matrix(self.p_mat, n, n, "p_mat")
        self.r_const = float(self.r_const)
        self.g_mat = _as_matrix(self.g_mat, None, n, "g_mat")
        self.h_vec = _as_vector(self.h_vec, self.g_mat.shape[0], "h_vec")
        self.aeq_mat = _as_matrix(self.aeq_mat, None, n, "aeq_mat")
        self.beq_vec = _as_vector(self.beq_vec, self.aeq_mat.shape[0], "beq_vec")
        for name in ("p_mat", "q_vec", "g_mat", "h_vec", "aeq_mat", "beq_vec"):
            if not np.isfinite(getattr(self, name)).all():
                raise ValidationError(f"{name} has non-finite entries")
        if not np.isfinite(self.r_const):
            raise ValidationError("r_const is not finite")
        if n > 1 and (np.abs(self.p_mat - self.p_mat.T) > 1e-12).any():
            raise ValidationError("p_mat is not symmetric")

    @classmethod
    def _trusted(cls, p_mat, q_vec, r_const, g_mat, h_vec, aeq_mat, beq_vec) -> "ProblemInstance":
        # Skips validation; only for arrays derived from an already valid instance.
        self = object.__new__(cls)
        self.p_mat, self.q_vec, self.r_const = p_mat, q_vec, r_const
        self.g_mat, self.h_vec = g_mat, h_vec
        self.aeq_mat, self.beq_vec = aeq_mat, beq_vec
        return self

    @classmethod
    def lp(cls, a, b, c) -> "ProblemInstance":
        """Build ``min c'x s.t. a x <= b``."""
        c = _as_vector(c, None, "c")
        n = c.shape[0]
        return cls(np.zeros((n, n)), c, 0.0, a, b, np.zeros((0, n)), np.zeros(0))

    @property
    def n(self) -> int:
        return self.q_vec.shape[0]

    @property
    def m(self) -> int:
        return self.g_mat.shape[0]

    @property
    def p(self) -> int:
        return self.aeq_mat.shape[0]

    @property
    def is_lp(self) -> bool:
        return self.p == 0 and self.r_const == 0.0 and not np.any(self.p_mat)

    def blocks(self):
        return (self.p_mat, self.q_vec, np.array([self.r_const]), self.g_mat,
                self.h_vec, self.aeq_mat, self.beq_vec)

    def scaled(self, factor: float) -> "ProblemInstance":
        """Every parameter block divided by ``factor``."""
        if not (np.isfinite(factor) and factor > 0):
            raise ValidationError(f"scale factor must be positive, got {factor}")
        return ProblemInstance._trusted(self.p_mat / factor, self.q_vec / factor, self.r_const / factor,
                                        self.g_mat / factor, self.h_vec / factor,
                                        self.aeq_mat / factor, self.beq_vec / factor)

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return all(a.shape == b.shape and np.array_equal(a, b)
                   for a, b in zip(self.blocks(), other.blocks()))


@dataclass(eq=False)
class KktPoint:
    """Candidate primal/dual variables. ``lam`` may be negative."""

    x: np.ndarray
    lam: np.ndarray
    nu: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.x = _as_vector(self.x, None, "x")
        self.lam = _as_vector(self.lam, None, "lam")
        self.nu = _as_vector(self.nu, None, "nu")
        if not all(np.all(np.isfinite(v)) for v in (self.x, self.lam, self.nu)):
            raise ValidationError("KKT point has non-finite entries")

    def flat(self) -> np.ndarray:
        return np.concatenate([self.x, self.lam, self.nu])

    def check_dims(self, inst: ProblemInstance) -> None:
        got = (self.x.shape[0], self.lam.shape[0], self.nu.shape[0])
        want = (inst.n, inst.m, inst.p)
        if got != want:
            raise DimensionMismatch(f"point dims (n, m, p)={got} do not match instance {want}")

    def __eq__(self, other):
        if not isinstance(other, KktPoint):
            return NotImplemented
        return all(a.shape == b.shape and np.array_equal(a, b)
                   for a, b in ((self.x, other.x), (self.lam, other.lam), (self.nu, other.nu)))


@dataclass(frozen=True)
class LossTerms:
    l_pf: float
    l_df: float
    l_cs: float
    l_s: float
    l_eq: Optional[float] = None

    def as_tuple(self):
        return (self.l_pf, self.l_df, self.l_cs, self.l_s)


@dataclass(frozen=True)
class LossWeights:
    """Weights of the combined objective.

    ``alpha_eq`` weights the optional equality-feasibility term and is zero
    by default.
    """

    alpha1: float = 0.0
    alpha2: float = 0.0
    alpha3: float = 0.0
    alpha4: float = 0.0
    beta: float = 0.0
    alpha_eq: float = 0.0

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "alpha3", "alpha4", "beta", "alpha_eq"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValidationError(f"weight {name}={v} must be finite and non-negative")

    @property
    def alphas(self):
        return (self.alpha1, self.alpha2, self.alpha3, self.alpha4)


class Residuals(NamedTuple):
    """Stacked residual pieces for a batch of K problems.

    slack: (K, m) values ``g_i.x - h_i``; stat: (K, n) stationarity vector;
    eq: (K, p) equality residual or None; terms: (K, 4) columns
    (l_pf, l_df, l_cs, l_s); l_eq: (K,) or None.
    """

    slack: np.ndarray
    stat: np.ndarray
    eq: Optional[np.ndarray]
    terms: np.ndarray
    l_eq: Optional[np.ndarray]


def residuals(q, G, h, x, lam, P=None, Aeq=None, beq=None, nu=None) -> Residuals:
    """KKT residual losses over a stacked batch.

    ``q``, ``x``: (K, n); ``G``: (K, m, n); ``h``, ``lam``: (K, m).
    ``P`` (K, n, n) and the equality blocks are optional; pass None when
    they are absent. Dtype follows the inputs.
    """
    K, n = x.shape
    m = G.shape[1]
    slack = np.einsum("kij,kj->ki", G, x) - h
    stat = q + np.einsum("kij,ki->kj", G, lam)
    if P is not None:
        stat = stat + np.einsum("kij,kj->ki", P, x)
    eq = l_eq = None
    if Aeq is not None and Aeq.shape[1] > 0:
        stat = stat + np.einsum("kij,ki->kj", Aeq, nu)
        eq = np.einsum("kij,kj->ki", Aeq, x) - beq
        l_eq = (eq * eq).sum(axis=1) / Aeq.shape[1]

    terms = np.zeros((K, 4), dtype=np.result_type(x, lam, G))
    if m > 0:
        viol = np.maximum(slack, 0.0)
        neg = np.maximum(-lam, 0.0)
        comp = lam * slack
        terms[:, 0] = (viol * viol).sum(axis=1) / m
        terms[:, 1] = (neg * neg).sum(axis=1) / m
        terms[:, 2] = (comp * comp).sum(axis=1) / m
    terms[:, 3] = (stat * stat).sum(axis=1) / n
    return Residuals(slack, stat, eq, terms, l_eq)


def weighted_kkt(terms: np.ndarray, w: LossWeights, l_eq=None):
    """Per-row KKT loss ``a1*l_pf + a2*l_df + a3*l_cs + a4*l_s`` (+ eq term)."""
    out = (w.alpha1 * terms[..., 0] + w.alpha2 * terms[..., 1]
           + w.alpha3 * terms[..., 2] + w.alpha4 * terms[..., 3])
    if l_eq is not None:
        out = out + w.alpha_eq * l_eq
    return out


def squared_error_sums(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    diff = pred - truth
    return (diff * diff).sum(axis=1)


def combine(kkt_per_example: np.ndarray, w: LossWeights, sq_err: Optional[np.ndarray] = None):
    """Batch objective: mean KKT loss plus ``beta`` times mean squared error."""
    total = kkt_per_example.mean()
    if w.beta > 0:
        total = total + w.beta * sq_err.mean()
    return total


# -- operations on instances ---------------------------------------------------

def normalize(inst: ProblemInstance):
    """Divide every parameter block by the largest absolute entry.

    Returns ``(normalized_instance, theta)``. The minimizer and the dual
    variables are unchanged by this positive rescaling.
    """
    theta = max((float(np.abs(b).max()) for b in inst.blocks() if b.size), default=0.0)
    if theta == 0.0:
        raise AllZeroInstance("every parameter is zero; normalization constant undefined")
    return inst.scaled(theta), theta


def stack_instances(insts: Sequence[ProblemInstance]):
    """Stack same-shaped instances into batch arrays ``(P, q, G, h, Aeq, beq)``.

    ``P`` is None when every instance has a zero quadratic term; ``Aeq`` and
    ``beq`` are None when there are no equality rows.
    """
    if not insts:
        raise EmptyBatch("empty instance batch")
    dims = {(i.n, i.m, i.p) for i in insts}
    if len(dims) != 1:
        raise DimensionMismatch(f"instances in a batch must share (n, m, p), got {sorted(dims)}")
    P = np.stack([i.p_mat for i in insts])
    if not np.any(P):
        P = None
    q = np.stack([i.q_vec for i in insts])
    G = np.stack([i.g_mat for i in insts])
    h = np.stack([i.h_vec for i in insts])
    if insts[0].p:
        Aeq = np.stack([i.aeq_mat for i in insts])
        beq = np.stack([i.beq_vec for i in insts])
    else:
        Aeq = beq = None
    return P, q, G, h, Aeq, beq


def _stack_points(points: Sequence[KktPoint]):
    return (np.stack([pt.x for pt in points]), np.stack([pt.lam for pt in points]),
            np.stack([pt.nu for pt in points]))


def _batch_residuals(insts, points) -> Residuals:
    if len(insts) != len(points):
        raise DimensionMismatch(f"{len(insts)} instances but {len(points)} points")
    for inst, pt in zip(insts, points):
        pt.check_dims(inst)
    P, q, G, h, Aeq, beq = stack_instances(insts)
    x, lam, nu = _stack_points(points)
    return residuals(q, G, h, x, lam, P=P, Aeq=Aeq, beq=beq, nu=nu)


def kkt_residual_losses(inst: ProblemInstance, pt: KktPoint) -> LossTerms:
    """Primal feasibility, dual feasibility, complementary slackness and
    stationarity losses of ``pt`` on ``inst``.

    With no inequality rows the first three terms are zero. ``l_eq`` is
    reported only when the instance has equality rows.
    """
    res = _batch_residuals([inst], [pt])
    t = res.terms[0]
    l_eq = None if res.l_eq is None else float(res.l_eq[0])
    return LossTerms(float(t[0]), float(t[1]), float(t[2]), float(t[3]), l_eq)


def kkt_loss(terms: LossTerms, w: LossWeights) -> float:
    arr = np.array(terms.as_tuple())
    return float(weighted_kkt(arr, w, terms.l_eq))


def data_loss(pred: Sequence[KktPoint], truth: Sequence[KktPoint]) -> float:
    """Mean over examples of the squared 2-norm between stacked (x, lam, nu)."""
    if len(pred) == 0 or len(truth) == 0:
        raise EmptyBatch("data loss needs at least one example")
    if len(pred) != len(truth):
        raise DimensionMismatch(f"{len(pred)} predictions but {len(truth)} targets")
    yp = [p.flat() for p in pred]
    yt = [t.flat() for t in truth]
    if any(a.shape != b.shape for a, b in zip(yp, yt)) or len({a.shape for a in yp}) != 1:
        raise DimensionMismatch("prediction and target vectors differ in length")
    return float(squared_error_sums(np.stack(yp), np.stack(yt)).mean())


def combined_loss(inst_batch: Sequence[ProblemInstance], pred_batch: Sequence[KktPoint],
                  truth_batch: Optional[Sequence[KktPoint]], w: LossWeights) -> float:
    """Mean KKT loss over the batch plus ``beta`` times the data loss.

    ``truth_batch`` may be None only when ``w.beta == 0``.
    """
    if len(inst_batch) == 0:
        raise EmptyBatch("empty batch")
    res = _batch_residuals(inst_batch, pred_batch)
    per_example = weighted_kkt(res.terms, w, res.l_eq)
    sq_err = None
    if w.beta > 0:
        if truth_batch is None:
            raise MissingGroundTruth("beta > 0 requires ground-truth solutions")
        if len(truth_batch) != len(pred_batch):
            raise DimensionMismatch(f"{len(pred_batch)} predictions but {len(truth_batch)} targets")
        sq_err = squared_error_sums(np.stack([p.flat() for p in pred_batch]),
                                    np.stack([t.flat() for t in truth_batch]))
    return float(combine(per_example, w, sq_err))
