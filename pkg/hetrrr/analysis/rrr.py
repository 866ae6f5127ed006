"""
Reduced-rank regression primitives.
The hat projection Q_X and the rank-constrained least-squares solve used by the
RRR baseline and by the B-step of the fusion solver.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh

from .core import Dataset
from .errors import DimensionMismatch, RankOutOfRange, SingularDesign, TieWarning

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
RANK_TOL = 1e-8
TIE_TOL = 1e-10


@dataclass(frozen=True)
class ProjectionDesign:
    """Least-squares solver (X^T X)^-1 X^T from a Cholesky solve, built once per X."""

    X: np.ndarray
    solver: np.ndarray

    @classmethod
    def build(cls, X: np.ndarray) -> "ProjectionDesign":
        X = np.asarray(X, dtype=float)
        gram = X.T @ X
        eigvals = np.linalg.eigvalsh(gram)
        if eigvals[0] <= 0 or eigvals[-1] / eigvals[0] > MAX_CONDITION:
            raise SingularDesign(
                f"X^T X is numerically singular (eigenvalue range {eigvals[0]:.3g}..{eigvals[-1]:.3g})"
            )
        factor = cho_factor(gram, lower=False, check_finite=False)
        solver = cho_solve(factor, X.T, check_finite=False)
        return cls(X=X, solver=solver)

    def ols(self, Z: np.ndarray) -> np.ndarray:
        return self.solver @ Z


@dataclass(frozen=True)
class RrrFit:
    B_hat: np.ndarray
    rank: int
    eigvecs: np.ndarray
    eigvals: np.ndarray
    tie: bool = False


def hat_projection(X: np.ndarray, design: Optional[ProjectionDesign] = None) -> np.ndarray:
    """
    Orthogonal projector Q_X = X (X^T X)^-1 X^T onto the column space of X.

    Raises:
        SingularDesign: if X^T X is singular or its condition number exceeds 1e12
    """
    design = design or ProjectionDesign.build(X)
    Q = design.X @ design.solver
    return (Q + Q.T) / 2


def rrr_fit(
    X: np.ndarray,
    Z: np.ndarray,
    r: int,
    design: Optional[ProjectionDesign] = None,
    warn_ties: bool = True,
) -> RrrFit:
    """
    Minimize ||Z - X B||_F^2 subject to rank(B) <= r.

    B = (X^T X)^-1 X^T Z V V^T with V the leading r eigenvectors of Z^T Q_X Z.

    Args:
        X: n x p design
        Z: n x q (adjusted) responses
        r: Rank bound, 1 <= r <= min(p, q)
        design: Prebuilt factorization of X, reused across calls
        warn_ties: Emit TieWarning when the r-th and (r+1)-th eigenvalues tie

    Returns:
        RrrFit with the coefficient matrix and the kept eigenpairs
    """
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    p, q = X.shape[1], Z.shape[1]
    if Z.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows but Z has {Z.shape[0]}")
    if not 1 <= r <= min(p, q):
        raise RankOutOfRange(f"rank {r} outside 1..{min(p, q)}")

    design = design or ProjectionDesign.build(X)
    B_ols = design.ols(Z)
    fitted = design.X @ B_ols
    M = fitted.T @ fitted

    vals, vecs = eigh((M + M.T) / 2, check_finite=False)
    vals = np.clip(vals[::-1], 0.0, None)
    vecs = vecs[:, ::-1]

    tie = False
    if r < q and vals[r - 1] > TIE_TOL * max(vals[0], 1.0):
        tie = bool(vals[r - 1] - vals[r] <= TIE_TOL * max(vals[0], 1.0))
        if tie and warn_ties:
            warnings.warn(
                f"eigenvalues {r} and {r + 1} tie ({vals[r - 1]:.6g}); keeping the first {r}",
                TieWarning,
                stacklevel=2,
            )

    V = vecs[:, :r]
    B_hat = (B_ols @ V) @ V.T
    return RrrFit(B_hat=B_hat, rank=r, eigvecs=V, eigvals=vals[:r], tie=tie)


def ols_fit(X: np.ndarray, Z: np.ndarray, design: Optional[ProjectionDesign] = None) -> np.ndarray:
    """Unconstrained least squares (X^T X)^-1 X^T Z."""
    design = design or ProjectionDesign.build(X)
    return design.ols(np.asarray(Z, dtype=float))


def rrr_with_intercept(X: np.ndarray, Y: np.ndarray, r: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rank-r regression with one unpenalized common intercept row.

    Returns:
        (B, c) minimizing ||Y - 1 c^T - X B||_F^2 subject to rank(B) <= r
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    x_bar = X.mean(axis=0)
    y_bar = Y.mean(axis=0)
    fit = rrr_fit(X - x_bar, Y - y_bar, r)
    c = y_bar - x_bar @ fit.B_hat
    return fit.B_hat, c


def numerical_rank(B: np.ndarray, tol: float = RANK_TOL) -> int:
    """Number of singular values above tol times the largest one."""
    s = np.linalg.svd(B, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def ols_residual_row_norms(data: Dataset) -> np.ndarray:
    """
    Per-row residual size ||e_i||_2 / sqrt(q) of the homogeneous fit Y = X B + E.

    Several modes in their distribution point at latent subgroups.
    """
    resid = data.Y - data.X @ ols_fit(data.X, data.Y)
    return np.linalg.norm(resid, axis=1) / np.sqrt(data.q)
