"""
Benchmark estimators that are told the true subgroup labels.
oracle_fit also takes the true rank; oracle_s_fit picks the rank by cross-validation.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core import Dataset
from .errors import DimensionMismatch, EmptyGroup, RankOutOfRange
from .rrr import ProjectionDesign, rrr_fit

logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-10
ORACLE_MAX_ITER = 500


@dataclass
class OracleFit:
    B: np.ndarray
    C: np.ndarray
    objective: float
    iterations: int
    rank: int
    objective_trace: List[float] = field(default_factory=list)


def _check_indicator(W: np.ndarray, n: int) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != n:
        raise DimensionMismatch(f"W must have {n} rows, got shape {W.shape}")
    if not np.all((W == 0) | (W == 1)) or not np.all(W.sum(axis=1) == 1):
        raise DimensionMismatch("W must hold exactly one 1 per row")
    empty = np.flatnonzero(W.sum(axis=0) == 0)
    if empty.size:
        raise EmptyGroup(f"groups {list(empty + 1)} have no members")
    return W


def _group_means(W: np.ndarray, Z: np.ndarray) -> np.ndarray:
    return (W.T @ Z) / W.sum(axis=0)[:, None]


def _objective(data: Dataset, W: np.ndarray, B: np.ndarray, C: np.ndarray) -> float:
    return float(np.sum((data.Y - data.X @ B - W @ C) ** 2))


def oracle_fit(
    data: Dataset,
    W: np.ndarray,
    r_star: int,
    tol: float = ORACLE_TOL,
    max_iter: int = ORACLE_MAX_ITER,
) -> OracleFit:
    """
    Minimize ||Y - X B - W C||_F^2 subject to rank(B) <= r_star.

    Alternates the groupwise mean solve for C and the rank-r RRR solve for B,
    starting from C = group means of Y and B = 0. At full rank the stacked
    least-squares problem on (X, W) is solved directly.

    Args:
        data: Dataset
        W: n x K indicator matrix of the true groups
        r_star: Rank bound
        tol: Stop once one full sweep lowers the objective by less than tol
        max_iter: Sweep limit

    Returns:
        OracleFit with the objective after every half-step in objective_trace
    """
    W = _check_indicator(W, data.n)
    if not 1 <= r_star <= min(data.p, data.q):
        raise RankOutOfRange(f"rank {r_star} outside 1..{min(data.p, data.q)}")

    if r_star == min(data.p, data.q):
        coef, *_ = np.linalg.lstsq(np.hstack([data.X, W]), data.Y, rcond=None)
        B, C = coef[: data.p], coef[data.p :]
        obj = _objective(data, W, B, C)
        return OracleFit(B=B, C=C, objective=obj, iterations=1, rank=r_star, objective_trace=[obj])

    design = ProjectionDesign.build(data.X)
    B = np.zeros((data.p, data.q))
    C = _group_means(W, data.Y)
    trace = [_objective(data, W, B, C)]
    iterations = 0

    for iterations in range(1, max_iter + 1):
        B = rrr_fit(data.X, data.Y - W @ C, r_star, design=design, warn_ties=False).B_hat
        trace.append(_objective(data, W, B, C))
        C = _group_means(W, data.Y - data.X @ B)
        trace.append(_objective(data, W, B, C))
        if trace[-3] - trace[-1] < tol:
            break

    logger.debug("oracle fit finished", extra={"rank": r_star, "iterations": iterations})
    return OracleFit(B=B, C=C, objective=trace[-1], iterations=iterations, rank=r_star, objective_trace=trace)


def oracle_s_fit(
    data: Dataset,
    W: np.ndarray,
    r_max: Optional[int] = None,
    folds: int = 5,
    seed: int = 0,
) -> OracleFit:
    """Oracle fit with the true labels and a cross-validated rank."""
    from .selection import cv_rank

    W = _check_indicator(W, data.n)
    r_max = min(data.p, data.q) if r_max is None else r_max
    rank = cv_rank(data, r_max, folds=folds, seed=seed, assignment=W.argmax(axis=1))
    return oracle_fit(data, W, rank)
