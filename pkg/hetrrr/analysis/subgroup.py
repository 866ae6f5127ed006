"""
Turn a fitted intercept matrix into a discrete subgroup partition.
Rows are merged when the fusion variable of their pair is (numerically) zero;
groups are the connected components of that merge graph.
"""

from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import SubgroupPartition, n_pairs, pair_indices, pairwise_differences
from .errors import DimensionMismatch

MERGE_REL_TOL = 1e-6
MERGE_ABS_FLOOR = 1e-8


def default_merge_tol(A_hat: np.ndarray) -> float:
    """1e-6 * (1 + largest pairwise row distance of A_hat), floored at 1e-8."""
    if A_hat.shape[0] < 2:
        return MERGE_ABS_FLOOR
    scale = float(np.max(np.linalg.norm(pairwise_differences(A_hat), axis=1)))
    return max(MERGE_REL_TOL * (1.0 + scale), MERGE_ABS_FLOOR)


def partition_from_labels(labels: np.ndarray, A: np.ndarray) -> SubgroupPartition:
    """
    Build a partition from arbitrary labels, relabeling groups by smallest member.

    Group intercepts are the within-group means of the rows of A.
    """
    labels = np.asarray(labels)
    _, first_seen, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first_seen, kind="stable")
    relabel = np.empty_like(order)
    relabel[order] = np.arange(order.size)
    assignment = relabel[inverse].astype(int)

    K_hat = int(order.size)
    counts = np.bincount(assignment, minlength=K_hat)
    C_hat = np.zeros((K_hat, A.shape[1]))
    np.add.at(C_hat, assignment, A)
    C_hat /= counts[:, None]
    return SubgroupPartition(assignment=assignment, K_hat=K_hat, C_hat=C_hat)


def extract_partition(
    A_hat: np.ndarray, delta_hat: np.ndarray, tol_merge: Optional[float] = None
) -> SubgroupPartition:
    """
    Group rows whose pair difference delta_ij has norm <= tol_merge.

    Args:
        A_hat: n x q fitted intercepts
        delta_hat: n(n-1)/2 x q fusion variables in lexicographic pair order
        tol_merge: Merge threshold; defaults to default_merge_tol(A_hat)

    Returns:
        SubgroupPartition with labels ordered by smallest member index
    """
    n = A_hat.shape[0]
    if delta_hat.shape[0] != n_pairs(n):
        raise DimensionMismatch(f"expected {n_pairs(n)} pair rows, got {delta_hat.shape[0]}")
    tol = default_merge_tol(A_hat) if tol_merge is None else tol_merge

    I, J = pair_indices(n)
    merged = np.linalg.norm(delta_hat, axis=1) <= tol
    graph = coo_matrix((np.ones(int(merged.sum())), (I[merged], J[merged])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return partition_from_labels(labels, A_hat)


def indicator_matrix(partition: SubgroupPartition, n: int) -> np.ndarray:
    """n x K_hat 0/1 matrix W with w_ik = 1 iff row i is in group k."""
    if partition.assignment.shape[0] != n:
        raise DimensionMismatch(f"partition covers {partition.assignment.shape[0]} rows, not {n}")
    W = np.zeros((n, partition.K_hat))
    W[np.arange(n), partition.assignment] = 1.0
    return W
