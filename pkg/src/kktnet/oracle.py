"""Exact solver for two-variable linear programs ``min c'x s.t. Ax <= b``.

Vertices are enumerated by intersecting every pair of constraint rows. The
best feasible vertex is certified through the stationarity system
``A_active' lam = -c`` on an active pair, which also yields the duals.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional

import numpy as np

from .errors import UnsupportedShape
from .problem import KktPoint, ProblemInstance

FEAS_TOL = 1e-9
DUAL_TOL = 1e-9
SINGULAR_REL = 1e-9
TIE_TOL = 1e-12

ACCEPT_DET_REL = 1e-6
ACCEPT_MIN_DUAL = 1e-9
ACCEPT_X_MAX = 1e3


class Status(enum.Enum):
    OPTIMAL = "optimal"
    UNBOUNDED = "unbounded"
    INFEASIBLE = "infeasible"
    DEGENERATE = "degenerate"


@dataclass
class SolveOutcome:
    status: Status
    point: Optional[KktPoint] = None
    active_set: List[int] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass(frozen=True)
class KktReport:
    max_residual: float
    passed: bool


def _solve2(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # Cramer's rule; callers have already screened out singular pairs.
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    return np.array([(rhs[0] * M[1, 1] - M[0, 1] * rhs[1]) / det,
                     (M[0, 0] * rhs[1] - rhs[0] * M[1, 0]) / det])


def _check_shape(inst: ProblemInstance) -> None:
    if inst.n != 2 or inst.p != 0 or np.any(inst.p_mat):
        raise UnsupportedShape(
            f"oracle handles 2-variable LPs without equalities (got n={inst.n}, p={inst.p}, "
            f"quadratic={bool(np.any(inst.p_mat))})")


def _pair_det(A: np.ndarray, i: int, j: int) -> float:
    return A[i, 0] * A[j, 1] - A[i, 1] * A[j, 0]


def solve_lp(inst: ProblemInstance) -> SolveOutcome:
    """Solve a 2-variable LP by vertex enumeration.

    Ties between optimal vertices (objective within 1e-12) go to the
    lexicographically smallest x.
    """
    _check_shape(inst)
    A, b, c = inst.g_mat, inst.h_vec, inst.q_vec
    m = A.shape[0]
    scale = float(np.abs(A).max()) if m else 0.0
    cutoff = SINGULAR_REL * scale * scale

    vertices = []
    for i, j in combinations(range(m), 2):
        if abs(_pair_det(A, i, j)) <= cutoff:
            continue
        vertices.append(_solve2(A[[i, j]], b[[i, j]]))
    if not vertices:
        return SolveOutcome(Status.DEGENERATE)

    feasible = [v for v in vertices if (A @ v <= b + FEAS_TOL).all()]
    if not feasible:
        return SolveOutcome(Status.INFEASIBLE)

    values = np.array([c @ v for v in feasible])
    best = values.min()
    ties = [v for v, val in zip(feasible, values) if val <= best + TIE_TOL]
    x = min(ties, key=lambda v: (v[0], v[1]))

    slack = A @ x - b
    active = [i for i in range(m) if abs(slack[i]) <= FEAS_TOL * max(1.0, abs(b[i]))]
    for i, j in combinations(active, 2):
        if abs(_pair_det(A, i, j)) <= cutoff:
            continue
        lam_pair = _solve2(A[[i, j]].T, -c)
        if lam_pair.min() >= -DUAL_TOL:
            lam = np.zeros(m)
            lam[[i, j]] = lam_pair
            # Re-solve x on the certified pair so it matches the dual exactly.
            x_pair = _solve2(A[[i, j]], b[[i, j]])
            return SolveOutcome(Status.OPTIMAL, KktPoint(x_pair, lam), [i, j])
    # No nonnegative multipliers at the best vertex: a feasible ray descends.
    return SolveOutcome(Status.UNBOUNDED)


def verify_kkt(inst: ProblemInstance, pt: KktPoint, tol: float) -> KktReport:
    """Largest violation of the KKT conditions at ``pt``."""
    pt.check_dims(inst)
    slack = inst.g_mat @ pt.x - inst.h_vec
    stat = inst.p_mat @ pt.x + inst.q_vec + inst.g_mat.T @ pt.lam + inst.aeq_mat.T @ pt.nu
    parts = [
        np.maximum(slack, 0.0),
        np.abs(inst.aeq_mat @ pt.x - inst.beq_vec),
        np.maximum(-pt.lam, 0.0),
        np.abs(pt.lam * slack),
        np.abs(stat),
    ]
    worst = max((float(p.max()) for p in parts if p.size), default=0.0)
    return KktReport(worst, worst <= tol)


def _accepted_outcome(inst: ProblemInstance, x_max: float = ACCEPT_X_MAX) -> Optional[SolveOutcome]:
    _check_shape(inst)
    out = solve_lp(inst)
    if not out.optimal:
        return None
    A = inst.g_mat
    rows = [0, 1] if A.shape[0] == 2 else out.active_set
    i, j = rows
    if abs(_pair_det(A, i, j)) < ACCEPT_DET_REL * float(np.abs(A[rows]).max()) ** 2:
        return None
    # With more than two rows the inactive duals are zero by construction.
    if out.point.lam[out.active_set].min() < ACCEPT_MIN_DUAL:
        return None
    if float(np.abs(out.point.x).max()) > x_max:
        return None
    return out


def accept_instance(inst: ProblemInstance, x_max: float = ACCEPT_X_MAX) -> bool:
    """Whether an LP yields a well-conditioned, strictly complementary optimum.

    Requires an optimal outcome, ``|det A| >= 1e-6 * max|A|^2`` (on the
    active pair when A has more than two rows), every active dual at least
    1e-9 and ``||x*||_inf <= x_max``.
    """
    return _accepted_outcome(inst, x_max) is not None
