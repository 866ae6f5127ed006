"""
Unit tests for fit evaluation and Monte Carlo aggregation.
"""

import itertools

import numpy as np
import pytest

from analysis.core import FitResult
from analysis.errors import DimensionMismatch, EmptyInput
from analysis.metrics import (
    ABSENT,
    EvalRecord,
    aggregate,
    align_groups,
    evaluate_fit,
    same_partition,
    summary_frame,
)
from analysis.simulate import GroundTruth, TestSet
from analysis.subgroup import partition_from_labels


def _truth(seed=0, n=12, p=3, q=2):
    rng = np.random.default_rng(seed)
    B = np.outer(rng.normal(size=p), rng.normal(size=q))
    C = np.array([[1.0, 1.0], [-1.0, -1.0], [0.0, 0.0]])[:, :q]
    labels = np.arange(n) % 3
    truth = GroundTruth(B_star=B, C_star=C, assignment=labels, sigma=1.0, mu=1.0, b_n=None, seed=seed)
    X_test = rng.normal(size=(9, p))
    test_labels = np.arange(9) % 3
    test = TestSet(X=X_test, Y=X_test @ B + C[test_labels], assignment=test_labels)
    return truth, test


def _fit_from(labels, C_rows, B, converged=True):
    partition = partition_from_labels(np.asarray(labels), np.asarray(C_rows, dtype=float))
    return FitResult(
        A_hat=partition.implied_intercepts(),
        B_hat=B,
        partition=partition,
        rank_used=1,
        lambda_used=0.1,
        converged=converged,
        iterations=5,
    )


def _record(rank_hat=3, K_hat=3, err=0.1, failed=False):
    return EvalRecord(
        err_B=err,
        err_A=err,
        pre=err,
        rank_hat=rank_hat,
        K_hat=K_hat,
        per_group_err=np.full(3, err),
        group_absent=np.zeros(3, dtype=bool),
        converged=True,
        same_partition=K_hat == 3,
        failed=failed,
    )


class TestAlignGroups:
    """Test matching estimated to true groups."""

    def test_permutation_recovered(self):
        """Test a permuted copy maps back with zero cost."""
        C = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
        alignment = align_groups(C[[2, 0, 1]], C)
        np.testing.assert_array_equal(alignment.mapping, [1, 2, 0])
        assert alignment.cost == pytest.approx(0.0)

    def test_fewer_estimated_groups(self):
        """Test one estimated group leaves two true groups absent."""
        C = np.array([[1.0], [-1.0], [0.0]])
        alignment = align_groups(np.array([[0.1]]), C)
        assert alignment.absent.sum() == 2
        assert alignment.mapping[2] == 0

    def test_matches_brute_force(self):
        """Test the assignment cost is minimal against all injections."""
        rng = np.random.default_rng(1)
        for _ in range(40):
            K, K_hat = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            C_star = rng.normal(size=(K, 2))
            C_hat = rng.normal(size=(K_hat, 2))
            cost = np.linalg.norm(C_star[:, None, :] - C_hat[None, :, :], axis=2)
            if K <= K_hat:
                best = min(cost[range(K), list(cols)].sum() for cols in itertools.permutations(range(K_hat), K))
            else:
                best = min(cost[list(rows), range(K_hat)].sum() for rows in itertools.permutations(range(K), K_hat))
            alignment = align_groups(C_hat, C_star)
            assert alignment.cost == pytest.approx(best)
            assert np.sum(alignment.mapping != ABSENT) == min(K, K_hat)

    def test_width_mismatch(self):
        """Test intercepts of different widths are rejected."""
        with pytest.raises(DimensionMismatch):
            align_groups(np.zeros((2, 3)), np.zeros((2, 2)))


class TestSamePartition:
    """Test label agreement up to relabeling."""

    def test_relabeled(self):
        """Test relabeled partitions agree."""
        assert same_partition([0, 0, 1, 2], [5, 5, 3, 9])

    def test_split_and_merge(self):
        """Test a merged or split group disagrees."""
        assert not same_partition([0, 0, 1, 1], [0, 0, 0, 1])
        assert not same_partition([0, 1], [0, 1, 2])


class TestEvaluateFit:
    """Test per-fit error measures."""

    def test_perfect_fit(self):
        """Test the true parameters give zero errors."""
        truth, test = _truth()
        fit = _fit_from(truth.assignment, truth.A_star, truth.B_star)
        record = evaluate_fit(fit, truth, test)
        assert record.err_B == pytest.approx(0.0)
        assert record.err_A == pytest.approx(0.0)
        assert record.pre == pytest.approx(0.0, abs=1e-20)
        assert record.K_hat == 3
        assert record.same_partition
        assert not record.group_absent.any()

    def test_zero_coefficients(self):
        """Test B_hat = 0 has relative error 1."""
        truth, test = _truth(seed=1)
        fit = _fit_from(truth.assignment, truth.A_star, np.zeros_like(truth.B_star))
        assert evaluate_fit(fit, truth, test).err_B == pytest.approx(1.0)

    def test_merged_groups(self):
        """Test a one-group fit flags two absent groups and uses the nearest intercept."""
        truth, test = _truth(seed=2)
        n = truth.assignment.size
        fit = _fit_from(np.zeros(n, dtype=int), np.zeros((n, 2)), truth.B_star)
        record = evaluate_fit(fit, truth, test)
        assert record.K_hat == 1
        assert record.group_absent.sum() == 2
        np.testing.assert_allclose(record.per_group_err, [1.0, 1.0, 0.0])
        assert record.err_A == pytest.approx(1.0)

    def test_shape_mismatch(self):
        """Test a coefficient matrix of the wrong shape is rejected."""
        truth, test = _truth(seed=3)
        fit = _fit_from(truth.assignment, truth.A_star, np.zeros((2, 2)))
        with pytest.raises(DimensionMismatch):
            evaluate_fit(fit, truth, test)


class TestAggregate:
    """Test the Monte Carlo summary row."""

    def test_identical_records(self):
        """Test identical records have zero spread."""
        row = aggregate([_record(), _record()], truth_rank=3, truth_K=3, method="SR-MCP")
        assert row["method"] == "SR-MCP"
        assert row["err_B_mean"] == pytest.approx(0.1)
        assert row["err_B_std"] == 0.0
        assert row["K_pct"] == 100.0

    def test_rank_percentage(self):
        """Test ranks (3, 3, 4, 3) give Rank% = 75."""
        records = [_record(rank_hat=r) for r in (3, 3, 4, 3)]
        assert aggregate(records, truth_rank=3, truth_K=3)["rank_pct"] == pytest.approx(75.0)

    def test_single_record(self):
        """Test one record reports zero dispersion."""
        row = aggregate([_record(err=0.4)], truth_rank=3, truth_K=3)
        assert row["pre_std"] == 0.0
        assert row["n_reps"] == 1

    def test_failures_counted(self):
        """Test failed records are counted and left out of the means."""
        records = [_record(err=0.2), EvalRecord.failure(3, "diverged")]
        row = aggregate(records, truth_rank=3, truth_K=3)
        assert row["n_failed"] == 1
        assert row["err_B_mean"] == pytest.approx(0.2)

    def test_without_subgroups(self):
        """Test a method without subgroups reports NaN for the subgroup columns."""
        row = aggregate([_record()], truth_rank=3, truth_K=3, subgroups=False)
        assert np.isnan(row["K_pct"])
        assert np.isnan(row["err_a1_mean"])

    def test_empty(self):
        """Test an empty record list is rejected."""
        with pytest.raises(EmptyInput):
            aggregate([], truth_rank=3, truth_K=3)

    def test_summary_frame_columns(self):
        """Test the summary table keeps the aggregate column order."""
        rows = [aggregate([_record()], 3, 3, method=m) for m in ("SR-MCP", "RRR")]
        frame = summary_frame(rows)
        assert list(frame.columns[:3]) == ["method", "err_B_mean", "err_B_std"]
        assert list(frame["method"]) == ["SR-MCP", "RRR"]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
