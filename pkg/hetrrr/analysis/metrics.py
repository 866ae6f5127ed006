"""
Performance measures for simulated fits and their Monte Carlo summary.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment

from .core import FitResult
from .errors import DimensionMismatch, EmptyInput
from .simulate import GroundTruth, TestSet

ABSENT = -1


@dataclass(frozen=True)
class GroupAlignment:
    """mapping[k] is the estimated group matched to true group k, or ABSENT."""

    mapping: np.ndarray
    cost: float

    @property
    def absent(self) -> np.ndarray:
        return self.mapping == ABSENT


@dataclass
class EvalRecord:
    err_B: float
    err_A: float
    pre: float
    rank_hat: int
    K_hat: int
    per_group_err: np.ndarray
    group_absent: np.ndarray
    converged: bool
    same_partition: bool
    failed: bool = False
    message: str = ""

    @classmethod
    def failure(cls, K: int, message: str) -> "EvalRecord":
        return cls(
            err_B=float("nan"),
            err_A=float("nan"),
            pre=float("nan"),
            rank_hat=0,
            K_hat=0,
            per_group_err=np.full(K, np.nan),
            group_absent=np.ones(K, dtype=bool),
            converged=False,
            same_partition=False,
            failed=True,
            message=message,
        )


def align_groups(C_hat: np.ndarray, C_star: np.ndarray) -> GroupAlignment:
    """
    Match true to estimated groups minimizing the summed intercept distance.

    Args:
        C_hat: K_hat x q estimated intercepts
        C_star: K x q true intercepts

    Returns:
        GroupAlignment; min(K, K_hat) true groups are matched, the rest are ABSENT
    """
    C_hat = np.atleast_2d(C_hat)
    C_star = np.atleast_2d(C_star)
    if C_hat.shape[1] != C_star.shape[1]:
        raise DimensionMismatch(f"intercept widths differ: {C_hat.shape[1]} vs {C_star.shape[1]}")
    cost = np.linalg.norm(C_star[:, None, :] - C_hat[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    mapping = np.full(C_star.shape[0], ABSENT, dtype=int)
    mapping[rows] = cols
    return GroupAlignment(mapping=mapping, cost=float(cost[rows, cols].sum()))


def same_partition(a: np.ndarray, b: np.ndarray) -> bool:
    """True when two label vectors describe the same partition up to relabeling."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        return False
    pairs = set(zip(a.tolist(), b.tolist()))
    return len(pairs) == len(set(a.tolist())) == len(set(b.tolist()))


def _relative(err: float, scale: float) -> float:
    return err / scale if scale > 0 else err


def evaluate_fit(fit: FitResult, truth: GroundTruth, test: TestSet) -> EvalRecord:
    """
    Err(B), Err(A), Pre and per-group intercept errors of one fit.

    Err(A) uses the partition-implied intercepts W_hat C_hat. Pre uses the true
    test labels, each mapped to its aligned estimated intercept; true groups
    without a match use the nearest estimated intercept and are flagged absent.
    """
    B_star, A_star = truth.B_star, truth.A_star
    if fit.B_hat.shape != B_star.shape:
        raise DimensionMismatch(f"B_hat shape {fit.B_hat.shape} differs from B* shape {B_star.shape}")
    if fit.A_hat.shape != A_star.shape:
        raise DimensionMismatch(f"A_hat shape {fit.A_hat.shape} differs from A* shape {A_star.shape}")
    if test.X.shape[1] != B_star.shape[0] or test.Y.shape[1] != B_star.shape[1]:
        raise DimensionMismatch("test set dimensions do not match the model")

    q = B_star.shape[1]
    C_hat = fit.partition.C_hat
    alignment = align_groups(C_hat, truth.C_star)

    nearest = np.linalg.norm(truth.C_star[:, None, :] - C_hat[None, :, :], axis=2).argmin(axis=1)
    chosen = np.where(alignment.absent, nearest, alignment.mapping)
    C_for_truth = C_hat[chosen]

    err_B = _relative(float(np.sum((B_star - fit.B_hat) ** 2)), float(np.sum(B_star ** 2)))
    A_est = fit.partition.implied_intercepts()
    err_A = _relative(float(np.sum((A_star - A_est) ** 2)), float(np.sum(A_star ** 2)))

    pred = test.X @ fit.B_hat + C_for_truth[test.assignment]
    pre = float(np.sum((test.Y - pred) ** 2) / (test.Y.shape[0] * q))
    per_group = np.sum((truth.C_star - C_for_truth) ** 2, axis=1) / q

    return EvalRecord(
        err_B=err_B,
        err_A=err_A,
        pre=pre,
        rank_hat=int(fit.rank_used),
        K_hat=int(fit.partition.K_hat),
        per_group_err=per_group,
        group_absent=alignment.absent.copy(),
        converged=bool(fit.converged),
        same_partition=same_partition(fit.partition.assignment, truth.assignment),
    )


def _mean_std(values: Sequence[float]) -> tuple:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return float("nan"), float("nan")
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def aggregate(
    records: Sequence[EvalRecord],
    truth_rank: int,
    truth_K: int,
    method: Optional[str] = None,
    subgroups: bool = True,
) -> Dict[str, float]:
    """
    Summary row: mean and across-replication std per measure, Rank% and K%.

    Failed records are counted in n_failed and left out of every other column.
    With subgroups False the per-group, K_hat and K% columns are NaN.

    Raises:
        EmptyInput: if records is empty
    """
    if not records:
        raise EmptyInput("no records to aggregate")
    ok = [r for r in records if not r.failed]
    row: Dict[str, float] = {}
    if method is not None:
        row["method"] = method

    for name in ("err_B", "err_A", "pre"):
        row[f"{name}_mean"], row[f"{name}_std"] = _mean_std([getattr(r, name) for r in ok])
    row["rank_mean"], row["rank_std"] = _mean_std([r.rank_hat for r in ok])
    row["rank_pct"] = 100.0 * np.mean([r.rank_hat == truth_rank for r in ok]) if ok else float("nan")

    for k in range(truth_K):
        key = f"err_a{k + 1}"
        if subgroups:
            row[f"{key}_mean"], row[f"{key}_std"] = _mean_std([r.per_group_err[k] for r in ok])
        else:
            row[f"{key}_mean"], row[f"{key}_std"] = float("nan"), float("nan")

    if subgroups and ok:
        row["K_hat_mean"], row["K_hat_std"] = _mean_std([r.K_hat for r in ok])
        row["K_pct"] = 100.0 * np.mean([r.K_hat == truth_K for r in ok])
        row["agree_pct"] = 100.0 * np.mean([r.same_partition for r in ok])
    else:
        row["K_hat_mean"] = row["K_hat_std"] = row["K_pct"] = row["agree_pct"] = float("nan")

    row["converged_pct"] = 100.0 * np.mean([r.converged for r in ok]) if ok else float("nan")
    row["n_reps"] = len(records)
    row["n_failed"] = len(records) - len(ok)
    return row


def summary_frame(rows: List[Dict[str, float]]) -> pd.DataFrame:
    """Stack aggregate rows into one table, columns in the order aggregate emits them."""
    columns: List[str] = []
    for row in rows:
        columns.extend(c for c in row if c not in columns)
    return pd.DataFrame(rows, columns=columns)
