"""
Shared data types for subgroup-aware reduced-rank regression.
Holds the dataset container, solver configuration, pair ordering of the
fusion terms, and the fit/partition result types.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import (
    DimensionMismatch,
    InvalidGamma,
    InvalidPair,
    NonFiniteEntry,
    RankOutOfRange,
    SingularDesign,
    TooFewRows,
)

if TYPE_CHECKING:
    from .admm import Trace


DEFAULT_THETA = 1.0
DEFAULT_EPSILON = 1e-4
DEFAULT_MAX_ITER = 1000
MCP_GAMMA = 3.0
SCAD_GAMMA = 3.7


class PenaltyKind(str, Enum):
    L1 = "l1"
    MCP = "mcp"
    SCAD = "scad"


class PenaltySpec(BaseModel):
    """Fusion penalty choice. gamma defaults to 3 (MCP) or 3.7 (SCAD) and is unused for L1."""

    model_config = ConfigDict(frozen=True)

    kind: PenaltyKind = PenaltyKind.MCP
    gamma: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _default_gamma(cls, values):
        if isinstance(values, dict) and values.get("gamma") is None:
            kind = PenaltyKind(values.get("kind", PenaltyKind.MCP))
            values = dict(values)
            values["gamma"] = {PenaltyKind.MCP: MCP_GAMMA, PenaltyKind.SCAD: SCAD_GAMMA}.get(kind)
        return values

    def check_gamma(self, theta: Optional[float] = None) -> None:
        """
        Validate gamma for the penalty definition and, when theta is given,
        for the closed-form delta update.

        Raises:
            InvalidGamma: if a constraint is violated
        """
        if self.kind is PenaltyKind.L1:
            return
        gamma = self.gamma
        if self.kind is PenaltyKind.MCP:
            if gamma is None or gamma <= 1:
                raise InvalidGamma(f"MCP requires gamma > 1, got {gamma}")
            if theta is not None and gamma <= 1.0 / theta:
                raise InvalidGamma(f"MCP update requires gamma > 1/theta = {1.0 / theta}, got {gamma}")
        else:
            if gamma is None or gamma <= 2:
                raise InvalidGamma(f"SCAD requires gamma > 2, got {gamma}")
            if theta is not None and gamma <= 1.0 / theta + 1.0:
                raise InvalidGamma(
                    f"SCAD update requires gamma > 1/theta + 1 = {1.0 / theta + 1.0}, got {gamma}"
                )


class AdmmConfig(BaseModel):
    """Settings of one ADMM solve at a fixed (rank, lambda) point."""

    model_config = ConfigDict(frozen=True)

    theta: float = Field(default=DEFAULT_THETA, gt=0)
    epsilon: float = Field(default=DEFAULT_EPSILON, gt=0)
    max_iter: int = Field(default=DEFAULT_MAX_ITER, ge=1)
    lam: float = Field(default=0.0, ge=0)
    rank: int = Field(default=1, ge=1)

    def check_rank(self, p: int, q: int) -> None:
        if not 1 <= self.rank <= min(p, q):
            raise RankOutOfRange(f"rank {self.rank} outside 1..{min(p, q)}")

    def at(self, rank: int, lam: float) -> "AdmmConfig":
        """Copy of this config moved to a new grid point."""
        return self.model_copy(update={"rank": int(rank), "lam": float(lam)})


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Y.shape[1]


def _as_matrix(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a matrix, got {arr.ndim} dimensions")
    return arr


def validate_dataset(X, Y) -> Dataset:
    """
    Check shapes and finiteness and wrap (X, Y) in a read-only Dataset.

    Args:
        X: n x p predictor matrix (array-like or DataFrame)
        Y: n x q response matrix (array-like or DataFrame)

    Returns:
        Dataset holding private read-only copies of X and Y
    """
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")

    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if X.shape[0] < 2:
        raise TooFewRows(f"need at least 2 rows, got {X.shape[0]}")
    for name, arr in (("X", X), ("Y", Y)):
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise NonFiniteEntry(f"{name}[{bad[0]}, {bad[1]}] is not finite")

    X.setflags(write=False)
    Y.setflags(write=False)
    return Dataset(X=X, Y=Y)


def preprocess(data: Dataset, log_y: bool = False, standardize_x: bool = False) -> Dataset:
    """Log-transform responses and/or standardize predictor columns."""
    X = np.array(data.X)
    Y = np.array(data.Y)
    if log_y:
        if np.any(Y <= 0):
            raise NonFiniteEntry("log transform needs strictly positive responses")
        Y = np.log(Y)
    if standardize_x:
        scale = X.std(axis=0, ddof=1)
        if np.any(scale == 0):
            raise SingularDesign("constant predictor column cannot be standardized")
        X = (X - X.mean(axis=0)) / scale
    return validate_dataset(X, Y)


def n_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(i: int, j: int, n: int) -> int:
    """
    Flat position of the 1-based pair (i, j), i < j, in lexicographic order.

    Raises:
        InvalidPair: unless 1 <= i < j <= n
    """
    if not (1 <= i < j <= n):
        raise InvalidPair(f"pair ({i}, {j}) invalid for n={n}")
    return (i - 1) * (2 * n - i) // 2 + (j - i - 1)


@lru_cache(maxsize=32)
def pair_indices(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """0-based row arrays (I, J) of all pairs i < j in lexicographic order."""
    I, J = np.triu_indices(n, k=1)
    I.setflags(write=False)
    J.setflags(write=False)
    return I, J


def difference_operator(n: int) -> np.ndarray:
    """Dense Delta with rows e_i - e_j; for checks only, the solver never builds it."""
    I, J = pair_indices(n)
    D = np.zeros((n_pairs(n), n))
    rows = np.arange(n_pairs(n))
    D[rows, I] = 1.0
    D[rows, J] = -1.0
    return D


def pairwise_differences(A: np.ndarray) -> np.ndarray:
    """Delta @ A, row (i, j) equal to a_i - a_j."""
    I, J = pair_indices(A.shape[0])
    return A[I] - A[J]


def delta_transpose(M: np.ndarray, n: int) -> np.ndarray:
    """Delta^T @ M accumulated pairwise in O(n^2 q)."""
    I, J = pair_indices(n)
    out = np.empty((n, M.shape[1]))
    for c in range(M.shape[1]):
        out[:, c] = np.bincount(I, weights=M[:, c], minlength=n) - np.bincount(J, weights=M[:, c], minlength=n)
    return out


@dataclass
class AdmmState:
    """Mutable iterate of one ADMM run; owned by a single solve."""

    A: np.ndarray
    B: np.ndarray
    delta: np.ndarray
    V: np.ndarray
    iter: int = 0
    primal_res: float = 0.0
    dual_res: float = 0.0

    def copy(self) -> "AdmmState":
        return AdmmState(
            A=self.A.copy(),
            B=self.B.copy(),
            delta=self.delta.copy(),
            V=self.V.copy(),
            iter=0,
            primal_res=self.primal_res,
            dual_res=self.dual_res,
        )


@dataclass(frozen=True)
class SubgroupPartition:
    """
    Partition of the n rows into K_hat groups.

    assignment holds 0-based labels; files written by the CLI use 1-based labels.
    """

    assignment: np.ndarray
    K_hat: int
    C_hat: np.ndarray

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.K_hat)

    def implied_intercepts(self) -> np.ndarray:
        """W C_hat: row i equals the intercept of the group of row i."""
        return self.C_hat[self.assignment]


@dataclass
class FitResult:
    A_hat: np.ndarray
    B_hat: np.ndarray
    partition: SubgroupPartition
    rank_used: int
    lambda_used: float
    converged: bool
    iterations: int
    residual_trace: Optional["Trace"] = None
    state: Optional[AdmmState] = field(default=None, repr=False)

    def fitted(self, X: np.ndarray) -> np.ndarray:
        """X B_hat + W C_hat."""
        return X @ self.B_hat + self.partition.implied_intercepts()

    def in_sample_mse(self, data: Dataset) -> float:
        """||Y - X B_hat - A_hat||_F^2 / (n q)."""
        resid = data.Y - data.X @ self.B_hat - self.A_hat
        return float(np.sum(resid ** 2) / (data.n * data.q))
