"""
Tuning-parameter selection for the fusion fit.
Builds the lambda path per rank, scores every grid point with PIC (or the
modified BIC for rank-unconstrained fits) and keeps the best converged fit.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import pdist

from .admm import DEFAULT_LAMBDA_STAR, admm_fit
from .core import (
    DEFAULT_EPSILON,
    DEFAULT_MAX_ITER,
    DEFAULT_THETA,
    AdmmConfig,
    Dataset,
    FitResult,
    PenaltySpec,
)
from .errors import (
    AllFitsDiverged,
    AnalysisError,
    DegenerateGrid,
    InvalidParameter,
    NonPositiveRSS,
    RankOutOfRange,
    TooFewRows,
)
from .rrr import ProjectionDesign, rrr_fit, rrr_with_intercept

logger = logging.getLogger(__name__)

DEFAULT_N_LAMBDA = 20
DEFAULT_LAMBDA_RATIO = 1e-3
DEFAULT_FOLDS = 5
PIC_A1 = 7.0
PIC_A2 = 2.0
GRID_ZERO_TOL = 1e-10
CV_TIE_TOL = 1e-12


class Criterion(str, Enum):
    PIC = "pic"
    BIC = "bic"


class SelectionConfig(BaseModel):
    """Grid and solver settings for select_model."""

    model_config = ConfigDict(frozen=True)

    n_lambda: int = Field(default=DEFAULT_N_LAMBDA, ge=2)
    lambda_ratio: float = Field(default=DEFAULT_LAMBDA_RATIO, gt=0, lt=1)
    r_max: Optional[int] = Field(default=None, ge=1)
    fixed_rank: Optional[int] = Field(default=None, ge=1)
    criterion: Criterion = Criterion.PIC
    a1: float = Field(default=PIC_A1, gt=0)
    a2: float = Field(default=PIC_A2, gt=0)
    c_n: Optional[float] = Field(default=None, gt=0)
    warm_start: bool = True
    jobs: int = Field(default=1, ge=1)
    reduced_rank: bool = True
    theta: float = Field(default=DEFAULT_THETA, gt=0)
    epsilon: float = Field(default=DEFAULT_EPSILON, gt=0)
    max_iter: int = Field(default=DEFAULT_MAX_ITER, ge=1)
    lambda_star: float = Field(default=DEFAULT_LAMBDA_STAR, gt=0)
    tol_merge: Optional[float] = Field(default=None, ge=0)

    def admm_config(self, rank: int, lam: float) -> AdmmConfig:
        return AdmmConfig(theta=self.theta, epsilon=self.epsilon, max_iter=self.max_iter, lam=lam, rank=rank)

    def ranks(self, p: int, q: int) -> List[int]:
        """Candidate ranks: 1..r_max, the fixed rank, or min(p, q) when the rank constraint is off."""
        full = min(p, q)
        if not self.reduced_rank:
            return [full]
        if self.fixed_rank is not None:
            if self.fixed_rank > full:
                raise RankOutOfRange(f"rank {self.fixed_rank} exceeds min(p, q) = {full}")
            return [self.fixed_rank]
        r_max = full if self.r_max is None else self.r_max
        if r_max > full:
            raise RankOutOfRange(f"r_max {r_max} exceeds min(p, q) = {full}")
        return list(range(1, r_max + 1))


@dataclass(frozen=True)
class GridPoint:
    rank: int
    lam: float
    score: float
    K_hat: int
    converged: bool
    iterations: int
    rss: float


@dataclass
class SelectionReport:
    grid: List[GridPoint]
    best_rank: int
    best_lambda: float
    best_fit: FitResult
    criterion: Criterion

    def to_frame(self) -> pd.DataFrame:
        """Score surface, one row per (rank, lambda)."""
        return pd.DataFrame([asdict(point) for point in self.grid])


def lambda_grid(
    data: Dataset, r: int, n_lambda: int = DEFAULT_N_LAMBDA, ratio: float = DEFAULT_LAMBDA_RATIO
) -> np.ndarray:
    """
    Ascending log-spaced lambda values from ratio * lambda_J to lambda_J.

    lambda_J is the largest pairwise distance between rows of the rank-r RRR
    residual Y - X B_R.

    Raises:
        DegenerateGrid: if every residual row is the same
    """
    if n_lambda < 2:
        raise InvalidParameter("n_lambda must be at least 2")
    resid = data.Y - data.X @ rrr_fit(data.X, data.Y, r, warn_ties=False).B_hat
    lam_max = float(np.max(pdist(resid)))
    if lam_max <= GRID_ZERO_TOL * (1.0 + float(np.max(np.abs(data.Y)))):
        raise DegenerateGrid("RRR residual rows are identical; no fusion path to search")
    lam_min = ratio * lam_max
    grid = np.exp(np.linspace(math.log(lam_min), math.log(lam_max), n_lambda))
    grid[0], grid[-1] = lam_min, lam_max
    return grid


def pic_score(rss: float, n: int, p: int, q: int, r: int, K_hat: int, a1: float = PIC_A1, a2: float = PIC_A2) -> float:
    """ln(rss) + {a1[(p + q - r)(r + K) + K q] + a2 ln n} / (n q)."""
    if rss <= 0:
        raise NonPositiveRSS(f"rss must be positive, got {rss}")
    complexity = a1 * ((p + q - r) * (r + K_hat) + K_hat * q) + a2 * math.log(n)
    return math.log(rss) + complexity / (n * q)


def default_c_n(n: int, p: int, q: int) -> float:
    return math.log(math.log(n + p * q))


def modified_bic(rss_mean: float, n: int, p: int, q: int, K_hat: int, C_n: Optional[float] = None) -> float:
    """ln(rss_mean) + C_n (K + p q) ln(n) / n with rss_mean = rss / (n q); C_n defaults to ln(ln(n + p q))."""
    if rss_mean <= 0:
        raise NonPositiveRSS(f"mean rss must be positive, got {rss_mean}")
    c_n = default_c_n(n, p, q) if C_n is None else C_n
    return math.log(rss_mean) + c_n * (K_hat + p * q) * math.log(n) / n


def _fold_ids(n: int, folds: int, seed: int) -> np.ndarray:
    perm = np.random.default_rng(seed).permutation(n)
    ids = np.empty(n, dtype=int)
    ids[perm] = np.arange(n) % folds
    return ids


def cv_rank(
    data: Dataset,
    r_max: int,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    intercept: bool = False,
    assignment: Optional[np.ndarray] = None,
) -> int:
    """
    Pick the rank with the smallest K-fold validation error.

    Args:
        data: Dataset
        r_max: Largest rank tried
        folds: Number of folds (>= 2)
        seed: Seed of the fold shuffle
        intercept: Fit one common intercept row (RRR baseline)
        assignment: 0-based group labels; when given, each fold is fit with the
            group intercepts as in the oracle design

    Returns:
        Rank in 1..r_max; near-ties go to the smaller rank
    """
    if folds < 2:
        raise InvalidParameter("folds must be at least 2")
    if data.n < folds:
        raise TooFewRows(f"{data.n} rows cannot be split into {folds} folds")
    if not 1 <= r_max <= min(data.p, data.q):
        raise RankOutOfRange(f"r_max {r_max} outside 1..{min(data.p, data.q)}")

    ids = _fold_ids(data.n, folds, seed)
    errors = np.zeros(r_max)
    for fold in range(folds):
        train, val = ids != fold, ids == fold
        X_tr, Y_tr = data.X[train], data.Y[train]
        for r in range(1, r_max + 1):
            errors[r - 1] += _validation_error(X_tr, Y_tr, data.X[val], data.Y[val], r, intercept, assignment, train, val)
    errors /= folds

    tol = CV_TIE_TOL * (1.0 + float(np.sum(data.Y ** 2)))
    return int(np.flatnonzero(errors <= errors.min() + tol)[0]) + 1


def _validation_error(X_tr, Y_tr, X_val, Y_val, r, intercept, assignment, train, val) -> float:
    if assignment is not None:
        from .oracle import oracle_fit

        labels = np.asarray(assignment)
        K = int(labels.max()) + 1
        W_tr = np.eye(K)[labels[train]]
        fit = oracle_fit(Dataset(X=X_tr, Y=Y_tr), W_tr, r)
        pred = X_val @ fit.B + fit.C[labels[val]]
    elif intercept:
        B, c = rrr_with_intercept(X_tr, Y_tr, r)
        pred = X_val @ B + c
    else:
        pred = X_val @ rrr_fit(X_tr, Y_tr, r, warn_ties=False).B_hat
    return float(np.sum((Y_val - pred) ** 2))


def _score(fit: FitResult, data: Dataset, config: SelectionConfig) -> Tuple[float, float]:
    resid = data.Y - data.X @ fit.B_hat - fit.partition.implied_intercepts()
    rss = max(float(np.sum(resid ** 2)), np.finfo(float).tiny)
    K_hat = fit.partition.K_hat
    if config.criterion is Criterion.BIC:
        score = modified_bic(rss / (data.n * data.q), data.n, data.p, data.q, K_hat, config.c_n)
    else:
        score = pic_score(rss, data.n, data.p, data.q, fit.rank_used, K_hat, config.a1, config.a2)
    return score, rss


def _better(a: GridPoint, b: Optional[GridPoint]) -> bool:
    # converged first, then lower score, then smaller rank, then larger lambda
    if b is None:
        return True
    if a.converged != b.converged:
        return a.converged
    if a.score != b.score:
        return a.score < b.score
    if a.rank != b.rank:
        return a.rank < b.rank
    return a.lam > b.lam


def fit_rank_path(data: Dataset, spec: PenaltySpec, config: SelectionConfig, rank: int) -> Tuple[List[GridPoint], FitResult]:
    """
    Fit the whole lambda path at one rank; returns its grid points and its best fit.

    Lambdas ascend; with warm_start each fit starts from the previous solution.
    """
    design = ProjectionDesign.build(data.X)
    grid = lambda_grid(data, rank, config.n_lambda, config.lambda_ratio)
    points: List[GridPoint] = []
    best_point: Optional[GridPoint] = None
    best_fit: Optional[FitResult] = None
    previous: Optional[FitResult] = None

    for lam in grid:
        init = previous.state if (config.warm_start and previous is not None) else None
        fit = admm_fit(
            data,
            config.admm_config(rank, float(lam)),
            spec,
            init=init,
            design=design,
            reduced_rank=config.reduced_rank,
            lambda_star=config.lambda_star,
            tol_merge=config.tol_merge,
        )
        score, rss = _score(fit, data, config)
        point = GridPoint(
            rank=fit.rank_used,
            lam=float(lam),
            score=score,
            K_hat=fit.partition.K_hat,
            converged=fit.converged,
            iterations=fit.iterations,
            rss=rss,
        )
        points.append(point)
        if _better(point, best_point):
            best_point, best_fit = point, fit
        previous = fit
    return points, best_fit


def select_model(data: Dataset, spec: PenaltySpec, config: Optional[SelectionConfig] = None) -> SelectionReport:
    """
    Search ranks and lambdas and return the best-scoring converged fit.

    Ranks run in separate processes when config.jobs > 1; the report does not
    depend on the number of workers.

    Raises:
        AllFitsDiverged: if no grid point converged
    """
    config = config or SelectionConfig()
    spec.check_gamma(config.theta)
    ranks = config.ranks(data.p, data.q)

    if config.jobs > 1 and len(ranks) > 1:
        with ProcessPoolExecutor(max_workers=min(config.jobs, len(ranks))) as executor:
            futures = [executor.submit(fit_rank_path, data, spec, config, r) for r in ranks]
            paths = [future.result() for future in futures]
    else:
        paths = [fit_rank_path(data, spec, config, r) for r in ranks]

    grid: List[GridPoint] = []
    best_point: Optional[GridPoint] = None
    best_fit: Optional[FitResult] = None
    for points, fit in paths:
        grid.extend(points)
        candidate = min_point(points)
        if _better(candidate, best_point):
            best_point, best_fit = candidate, fit

    if best_point is None or not best_point.converged:
        raise AllFitsDiverged(f"none of the {len(grid)} grid points converged")

    logger.info(
        "model selected",
        extra={
            "rank": best_point.rank,
            "lam": best_point.lam,
            "K_hat": best_point.K_hat,
            "score": best_point.score,
            "n_converged": sum(p.converged for p in grid),
        },
    )
    return SelectionReport(
        grid=grid,
        best_rank=best_point.rank,
        best_lambda=best_point.lam,
        best_fit=best_fit,
        criterion=config.criterion,
    )


def min_point(points: List[GridPoint]) -> GridPoint:
    """Best grid point under the selection order."""
    best: Optional[GridPoint] = None
    for point in points:
        if _better(point, best):
            best = point
    if best is None:
        raise AnalysisError("empty grid")
    return best
