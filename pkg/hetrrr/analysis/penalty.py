"""
Fusion penalties (L1, MCP, SCAD) and their exact delta-update maps.
The delta update is the groupwise proximal map of the penalty at scale 1/theta.
"""

from typing import Union

import numpy as np

from .core import PenaltyKind, PenaltySpec
from .errors import AnalysisError

ArrayLike = Union[float, np.ndarray]


def penalty_value(t: ArrayLike, lam: float, spec: PenaltySpec) -> ArrayLike:
    """
    Evaluate p_gamma(t, lambda) for t >= 0.

    Args:
        t: Nonnegative argument (scalar or array)
        lam: Penalty level lambda >= 0
        spec: Penalty kind and gamma

    Returns:
        Penalty value with the same shape as t
    """
    spec.check_gamma()
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or lam < 0:
        raise AnalysisError("penalty_value needs t >= 0 and lambda >= 0")

    if spec.kind is PenaltyKind.L1:
        out = lam * t_arr
    elif spec.kind is PenaltyKind.MCP:
        g = spec.gamma
        out = np.where(t_arr <= g * lam, lam * t_arr - t_arr ** 2 / (2 * g), g * lam ** 2 / 2)
    else:
        g = spec.gamma
        inner = lam * t_arr
        middle = (2 * g * lam * t_arr - t_arr ** 2 - lam ** 2) / (2 * (g - 1))
        flat = lam ** 2 * (g + 1) / 2
        out = np.where(t_arr <= lam, inner, np.where(t_arr <= g * lam, middle, flat))

    return float(out) if np.ndim(out) == 0 else out


def group_soft_threshold(z: np.ndarray, t: float) -> np.ndarray:
    """S(z, t) = (1 - t/||z||)_+ z; zero when ||z|| <= t."""
    z = np.asarray(z, dtype=float)
    norm = np.linalg.norm(z)
    if norm <= t:
        return np.zeros_like(z)
    return (1.0 - t / norm) * z


def prox_scale(norms: np.ndarray, lam: float, theta: float, spec: PenaltySpec) -> np.ndarray:
    """
    Multiplier s(||zeta||) so that the delta update of row zeta is s * zeta.

    Rows with zero norm get 0. Branch boundaries follow the closed-form rules:
    MCP splits at gamma*lambda, SCAD at lambda + lambda/theta and gamma*lambda.
    """
    spec.check_gamma(theta)
    norms = np.asarray(norms, dtype=float)
    safe = np.where(norms > 0, norms, 1.0)

    def soft(t: float) -> np.ndarray:
        return np.where(norms > t, 1.0 - t / safe, 0.0)

    if spec.kind is PenaltyKind.L1:
        scale = soft(lam / theta)
    elif spec.kind is PenaltyKind.MCP:
        g = spec.gamma
        shrunk = soft(lam / theta) / (1.0 - 1.0 / (g * theta))
        scale = np.where(norms <= g * lam, shrunk, 1.0)
    else:
        g = spec.gamma
        first = soft(lam / theta)
        second = soft(g * lam / ((g - 1.0) * theta)) / (1.0 - 1.0 / ((g - 1.0) * theta))
        scale = np.where(norms <= lam + lam / theta, first, np.where(norms <= g * lam, second, 1.0))

    return np.where(norms > 0, scale, 0.0)


def delta_prox_rows(Z: np.ndarray, lam: float, theta: float, spec: PenaltySpec) -> np.ndarray:
    """Apply the delta update to every row of Z (rows are the zeta_ij)."""
    scale = prox_scale(np.linalg.norm(Z, axis=1), lam, theta, spec)
    return Z * scale[:, None]


def delta_prox(zeta: np.ndarray, lam: float, theta: float, spec: PenaltySpec) -> np.ndarray:
    """
    Minimize (theta/2)||zeta - delta||^2 + p_gamma(||delta||, lambda) over delta.

    Args:
        zeta: Length-q vector
        lam: Penalty level
        theta: ADMM penalty parameter (> 0)
        spec: Penalty kind and gamma

    Returns:
        Minimizer, parallel to zeta
    """
    zeta = np.asarray(zeta, dtype=float)
    return delta_prox_rows(zeta.reshape(1, -1), lam, theta, spec).reshape(zeta.shape)


if __name__ == "__main__":
    mcp = PenaltySpec(kind="mcp", gamma=3.0)
    print("MCP flat value:", penalty_value(5.0, 1.0, mcp))
    print("MCP prox of (2, 0):", delta_prox(np.array([2.0, 0.0]), 1.0, 1.0, mcp))
