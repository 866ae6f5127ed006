"""
The estimators compared on simulated and real data, behind one fit_method call.
"""

import logging
from enum import Enum
from typing import Optional

import numpy as np

from .core import Dataset, FitResult, PenaltyKind, PenaltySpec
from .errors import AnalysisError
from .oracle import OracleFit, oracle_fit, oracle_s_fit
from .rrr import rrr_with_intercept
from .selection import DEFAULT_FOLDS, Criterion, SelectionConfig, cv_rank, select_model
from .simulate import GroundTruth
from .subgroup import partition_from_labels

logger = logging.getLogger(__name__)


class MethodId(str, Enum):
    SR_MCP = "sr-mcp"
    SR_SCAD = "sr-scad"
    SR_L1 = "sr-l1"
    S_MCP = "s-mcp"
    S_SCAD = "s-scad"
    S_L1 = "s-l1"
    RRR = "rrr"
    ORACLE_S = "oracle-s"
    ORACLE_SR = "oracle-sr"

    @property
    def needs_truth(self) -> bool:
        return self in (MethodId.ORACLE_S, MethodId.ORACLE_SR)

    @property
    def fuses(self) -> bool:
        return self.value.startswith(("sr-", "s-"))

    @property
    def reduced_rank(self) -> bool:
        return not self.value.startswith("s-")

    @property
    def has_subgroups(self) -> bool:
        return self is not MethodId.RRR

    @property
    def penalty(self) -> Optional[PenaltyKind]:
        if not self.fuses:
            return None
        return PenaltyKind(self.value.split("-", 1)[1])

    @property
    def label(self) -> str:
        """Name as printed in result tables."""
        return {
            MethodId.SR_L1: "SR-Lasso",
            MethodId.S_L1: "S-Lasso",
            MethodId.ORACLE_S: "Oracle.s",
            MethodId.ORACLE_SR: "Oracle.sr",
        }.get(self, self.value.upper())


def parse_methods(text: str):
    """Comma-separated method ids, e.g. 'sr-mcp,oracle-sr,rrr'."""
    return [MethodId(item.strip().lower()) for item in text.split(",") if item.strip()]


def _from_oracle(fit: OracleFit, labels: np.ndarray) -> FitResult:
    partition = partition_from_labels(labels, fit.C[labels])
    return FitResult(
        A_hat=partition.implied_intercepts(),
        B_hat=fit.B,
        partition=partition,
        rank_used=fit.rank,
        lambda_used=0.0,
        converged=True,
        iterations=fit.iterations,
    )


def rrr_result(data: Dataset, rank: int) -> FitResult:
    """Rank-r RRR with one common intercept row, as a single-group FitResult."""
    B, c = rrr_with_intercept(data.X, data.Y, rank)
    partition = partition_from_labels(np.zeros(data.n, dtype=int), np.tile(c, (data.n, 1)))
    return FitResult(
        A_hat=partition.implied_intercepts(),
        B_hat=B,
        partition=partition,
        rank_used=rank,
        lambda_used=0.0,
        converged=True,
        iterations=0,
    )


def fit_method(
    method: MethodId,
    data: Dataset,
    selection: Optional[SelectionConfig] = None,
    gamma: Optional[float] = None,
    truth: Optional[GroundTruth] = None,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
) -> FitResult:
    """
    Fit one method and return its result in the common FitResult shape.

    SR-* search rank and lambda by PIC; S-* drop the rank constraint and search
    lambda by the modified BIC; RRR takes a cross-validated rank and one common
    intercept; the oracles use the true labels (and, for ORACLE-SR, the true rank).

    Raises:
        AnalysisError: ORACLE-* without ground truth, or any failure of the fit
    """
    selection = selection or SelectionConfig()

    if method.fuses:
        config = selection.model_copy(
            update={
                "reduced_rank": method.reduced_rank,
                "criterion": Criterion.PIC if method.reduced_rank else Criterion.BIC,
            }
        )
        spec = PenaltySpec(kind=method.penalty, gamma=gamma)
        return select_model(data, spec, config).best_fit

    if method is MethodId.RRR:
        rank = cv_rank(data, min(data.p, data.q), folds=folds, seed=seed, intercept=True)
        return rrr_result(data, rank)

    if truth is None:
        raise AnalysisError(f"{method.value} needs ground-truth subgroup labels")
    W, present = truth.observed_indicator()
    labels = np.searchsorted(present, truth.assignment)
    if method is MethodId.ORACLE_SR:
        fit = oracle_fit(data, W, truth.r_star)
    else:
        fit = oracle_s_fit(data, W, folds=folds, seed=seed)
    return _from_oracle(fit, labels)
