"""
Rank-constrained pairwise-fusion ADMM.
Initialization by ridge fusion, the A/B block step, the delta proximal step,
the dual ascent step, and the outer loop for one (rank, lambda) point.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve

from .core import (
    AdmmConfig,
    AdmmState,
    Dataset,
    FitResult,
    PenaltySpec,
    delta_transpose,
    pairwise_differences,
)
from .errors import InvalidParameter, SingularDesign
from .penalty import delta_prox_rows, penalty_value
from .rrr import ProjectionDesign, hat_projection, rrr_fit
from .subgroup import extract_partition

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_STAR = 1e-3
# converged also requires dual_res below this multiple of epsilon
DUAL_TOL_FACTOR = 10.0


@dataclass
class Trace:
    """Per-iteration primal residual, dual residual and objective L0."""

    primal: List[float] = field(default_factory=list)
    dual: List[float] = field(default_factory=list)
    objective: List[float] = field(default_factory=list)

    def append(self, primal: float, dual: float, objective: float) -> None:
        self.primal.append(float(primal))
        self.dual.append(float(dual))
        self.objective.append(float(objective))

    def __len__(self) -> int:
        return len(self.primal)

    def summary(self) -> Dict[str, float]:
        if not self.primal:
            return {"iterations": 0}
        return {
            "iterations": len(self),
            "first_primal_res": self.primal[0],
            "final_primal_res": self.primal[-1],
            "final_dual_res": self.dual[-1],
            "max_dual_res": max(self.dual),
            "first_objective": self.objective[0],
            "final_objective": self.objective[-1],
        }


def ridge_fusion_intercepts(Y: np.ndarray, Q: np.ndarray, lambda_star: float) -> np.ndarray:
    """
    A0 = [I - Q + lambda* Delta^T Delta]^-1 (I - Q) Y with Delta^T Delta = n I - 1 1^T.
    """
    n = Y.shape[0]
    system = np.eye(n) - Q + lambda_star * (n * np.eye(n) - np.ones((n, n)))
    try:
        return solve(system, Y - Q @ Y, assume_a="pos", check_finite=False)
    except LinAlgError as exc:
        raise SingularDesign(f"ridge fusion system is singular: {exc}") from exc


def init_ridge_fusion(
    data: Dataset, lambda_star: float = DEFAULT_LAMBDA_STAR, design: Optional[ProjectionDesign] = None
) -> AdmmState:
    """
    Starting point from the ridge fusion criterion.

    Returns:
        AdmmState with A0, B0 = OLS of Y - A0, delta0 = Delta A0 and V0 = 0
    """
    if lambda_star <= 0:
        raise InvalidParameter("lambda_star must be positive")
    design = design or ProjectionDesign.build(data.X)
    A0 = ridge_fusion_intercepts(data.Y, hat_projection(data.X, design), lambda_star)
    B0 = design.ols(data.Y - A0)
    delta0 = pairwise_differences(A0)
    return AdmmState(A=A0, B=B0, delta=delta0, V=np.zeros_like(delta0))


def update_A(state: AdmmState, data: Dataset, config: AdmmConfig) -> np.ndarray:
    """
    Exact minimizer of f(A, B) over A using (I + theta Delta^T Delta)^-1 = (I + theta 1 1^T) / (1 + n theta).
    """
    theta = config.theta
    R = data.Y - data.X @ state.B + delta_transpose(theta * state.delta - state.V, data.n)
    return (R + theta * R.sum(axis=0, keepdims=True)) / (1.0 + data.n * theta)


def update_B(
    state: AdmmState,
    data: Dataset,
    config: AdmmConfig,
    design: Optional[ProjectionDesign] = None,
    reduced_rank: bool = True,
) -> np.ndarray:
    """Reduced-rank regression of Y - A on X (plain OLS when reduced_rank is False)."""
    design = design or ProjectionDesign.build(data.X)
    Z = data.Y - state.A
    if not reduced_rank:
        return design.ols(Z)
    return rrr_fit(data.X, Z, config.rank, design=design, warn_ties=False).B_hat


def fusion_objective(A: np.ndarray, B: np.ndarray, delta: np.ndarray, data: Dataset, lam: float, spec: PenaltySpec) -> float:
    """L0 = 1/2 ||Y - X B - A||_F^2 + sum_ij p(||delta_ij||, lambda)."""
    loss = 0.5 * float(np.sum((data.Y - data.X @ B - A) ** 2))
    return loss + float(np.sum(penalty_value(np.linalg.norm(delta, axis=1), lam, spec)))


def augmented_lagrangian(state: AdmmState, data: Dataset, config: AdmmConfig, spec: PenaltySpec) -> float:
    """L(A, B, delta, V) including the multiplier and quadratic coupling terms."""
    gap = pairwise_differences(state.A) - state.delta
    base = fusion_objective(state.A, state.B, state.delta, data, config.lam, spec)
    return base + float(np.sum(state.V * gap)) + 0.5 * config.theta * float(np.sum(gap ** 2))


def _unpenalized_limit(
    state: AdmmState,
    data: Dataset,
    config: AdmmConfig,
    spec: PenaltySpec,
    design: ProjectionDesign,
    reduced_rank: bool,
) -> Tuple[AdmmState, Trace]:
    # lambda = 0: the delta step is the identity and V stays zero, so the
    # iteration only drifts towards A = Y - X B; return that limit directly.
    B = update_B(state, data, config, design, reduced_rank)
    A = data.Y - data.X @ B
    delta = pairwise_differences(A)
    final = AdmmState(A=A, B=B, delta=delta, V=np.zeros_like(delta), iter=1)
    trace = Trace()
    trace.append(0.0, 0.0, fusion_objective(A, B, delta, data, 0.0, spec))
    return final, trace


def admm_fit(
    data: Dataset,
    config: AdmmConfig,
    spec: PenaltySpec,
    init: Optional[AdmmState] = None,
    design: Optional[ProjectionDesign] = None,
    reduced_rank: bool = True,
    lambda_star: float = DEFAULT_LAMBDA_STAR,
    tol_merge: Optional[float] = None,
) -> FitResult:
    """
    Run the fusion ADMM at one (rank, lambda) point.

    Args:
        data: Validated dataset
        config: theta, epsilon, max_iter, lambda and rank
        spec: Fusion penalty
        init: Warm start; ridge fusion initialization when None
        design: Prebuilt factorization of X
        reduced_rank: Use the rank-constrained B step; plain OLS otherwise
        lambda_star: Ridge level of the default initialization
        tol_merge: Threshold on ||delta_ij|| for merging rows into one group

    Returns:
        FitResult; converged needs primal_res < epsilon and dual_res <
        DUAL_TOL_FACTOR * epsilon, and is False (not an error) when max_iter is reached
    """
    spec.check_gamma(config.theta)
    if reduced_rank:
        config.check_rank(data.p, data.q)
    design = design or ProjectionDesign.build(data.X)
    state = init.copy() if init is not None else init_ridge_fusion(data, lambda_star, design)

    theta = config.theta
    converged = False

    if config.lam == 0:
        state, trace = _unpenalized_limit(state, data, config, spec, design, reduced_rank)
        converged = True
    else:
        trace = Trace()
        for m in range(1, config.max_iter + 1):
            state.A = update_A(state, data, config)
            state.B = update_B(state, data, config, design, reduced_rank)

            diffs = pairwise_differences(state.A)
            delta_new = delta_prox_rows(diffs + state.V / theta, config.lam, theta, spec)
            gap = diffs - delta_new
            state.V = state.V + theta * gap

            primal = float(np.linalg.norm(gap))
            dual = theta * float(np.linalg.norm(delta_transpose(state.delta - delta_new, data.n)))
            state.delta = delta_new
            state.iter, state.primal_res, state.dual_res = m, primal, dual
            trace.append(primal, dual, fusion_objective(state.A, state.B, state.delta, data, config.lam, spec))

            if primal < config.epsilon and dual < DUAL_TOL_FACTOR * config.epsilon:
                converged = True
                break

    partition = extract_partition(state.A, state.delta, tol_merge)
    logger.debug(
        "admm fit finished",
        extra={
            "rank": config.rank,
            "lam": config.lam,
            "iterations": state.iter,
            "converged": converged,
            "primal_res": state.primal_res,
            "dual_res": state.dual_res,
            "K_hat": partition.K_hat,
        },
    )
    return FitResult(
        A_hat=state.A,
        B_hat=state.B,
        partition=partition,
        rank_used=config.rank if reduced_rank else min(data.p, data.q),
        lambda_used=config.lam,
        converged=converged,
        iterations=state.iter,
        residual_trace=trace,
        state=state,
    )
