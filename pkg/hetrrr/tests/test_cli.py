"""
End-to-end tests of the command line: simulate, fit and replicate.
"""

import json
import math

import numpy as np
import pandas as pd
import pytest

from cli import EXIT_DIVERGED, EXIT_INVALID, EXIT_OK, main

SMALL_SIM = ["--n", "30", "--p", "4", "--q", "3", "--r-star", "2", "--n-test", "10"]


@pytest.fixture
def sim_dir(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", *SMALL_SIM, "--seed", "5", "--out-dir", str(out)]) == EXIT_OK
    return out


class TestSimulateCommand:
    """Test the simulate subcommand."""

    def test_writes_files(self, sim_dir):
        """Test the dataset files and their shapes."""
        for name in ("X.csv", "Y.csv", "Xtest.csv", "Ytest.csv", "truth.json"):
            assert (sim_dir / name).exists()
        X = pd.read_csv(sim_dir / "X.csv")
        assert X.shape == (30, 4)
        assert list(X.columns) == ["x1", "x2", "x3", "x4"]

    def test_setting_ii_gap(self, tmp_path):
        """Test the reported minimum gap for mu = 2 in setting ii."""
        out = tmp_path / "ii"
        assert main(["simulate", "--setting", "ii", "--mu", "2", "--out-dir", str(out)]) == EXIT_OK
        truth = json.loads((out / "truth.json").read_text())
        assert truth["b_n"] == pytest.approx(2 * math.sqrt(8), abs=1e-12)
        assert truth["K"] == 3

    def test_example2(self, tmp_path):
        """Test example 2 writes a single group and a null gap."""
        out = tmp_path / "ex2"
        assert main(["simulate", "--example", "2", *SMALL_SIM, "--out-dir", str(out)]) == EXIT_OK
        truth = json.loads((out / "truth.json").read_text())
        assert truth["K"] == 1
        assert truth["b_n"] is None
        assert set(truth["assignments"]) == {1}

    def test_true_rank_flag(self, sim_dir, tmp_path):
        """Test the true rank is --r-star; --rank belongs to fit only."""
        truth = json.loads((sim_dir / "truth.json").read_text())
        assert truth["r_star"] == 2
        assert main(["simulate", "--rank", "2", "--out-dir", str(tmp_path / "old")]) == EXIT_INVALID

    def test_invalid_design(self, tmp_path):
        """Test example 2 with setting ii is an invalid argument."""
        code = main(["simulate", "--example", "2", "--setting", "ii", "--out-dir", str(tmp_path / "bad")])
        assert code == EXIT_INVALID


class TestFitCommand:
    """Test the fit subcommand."""

    def _fit(self, sim_dir, out, *extra):
        return main(["fit", "--x", str(sim_dir / "X.csv"), "--y", str(sim_dir / "Y.csv"), "--out", str(out), *extra])

    def test_pinned_point(self, sim_dir, tmp_path):
        """Test a pinned rank and lambda write a complete report."""
        out = tmp_path / "fit.json"
        assert self._fit(sim_dir, out, "--rank", "2", "--lambda", "0.5") == EXIT_OK
        report = json.loads(out.read_text())
        assert set(report) == {"config", "fit", "selection", "diagnostics"}
        fit = report["fit"]
        assert fit["rank"] == 2
        assert np.array(fit["B_hat"]).shape == (4, 3)
        assert len(fit["assignments"]) == 30
        assert min(fit["assignments"]) == 1
        assert len(fit["C_hat"]) == fit["K_hat"]
        assert report["selection"] is None
        assert report["diagnostics"]["trace"]["iterations"] == fit["iterations"]

    def test_grid_search(self, sim_dir, tmp_path):
        """Test the selection block lists every grid point."""
        out = tmp_path / "grid.json"
        assert self._fit(sim_dir, out, "--rank-max", "2", "--n-lambda", "5") == EXIT_OK
        selection = json.loads(out.read_text())["selection"]
        assert selection["criterion"] == "pic"
        assert len(selection["grid"]) == 10
        assert selection["best_rank"] in (1, 2)

    def test_deterministic_output(self, sim_dir, tmp_path):
        """Test two identical runs write identical reports."""
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        args = ("--rank-max", "2", "--n-lambda", "4", "--penalty", "scad")
        assert self._fit(sim_dir, first, *args) == EXIT_OK
        assert self._fit(sim_dir, second, *args, "--jobs", "2") == EXIT_OK
        assert json.loads(first.read_text())["fit"] == json.loads(second.read_text())["fit"]

    def test_oracle_with_truth(self, sim_dir, tmp_path):
        """Test Oracle.sr runs when truth.json is supplied and fails without it."""
        out = tmp_path / "oracle.json"
        assert self._fit(sim_dir, out, "--method", "oracle-sr") == EXIT_INVALID
        assert self._fit(sim_dir, out, "--method", "oracle-sr", "--truth", str(sim_dir / "truth.json")) == EXIT_OK
        assert json.loads(out.read_text())["fit"]["rank"] == 2

    def test_rrr_pinned_rank(self, sim_dir, tmp_path):
        """Test the RRR baseline at a pinned rank has one group."""
        out = tmp_path / "rrr.json"
        assert self._fit(sim_dir, out, "--method", "rrr", "--rank", "1") == EXIT_OK
        fit = json.loads(out.read_text())["fit"]
        assert fit["K_hat"] == 1
        assert fit["rank"] == 1

    def test_lambda_needs_rank(self, sim_dir, tmp_path):
        """Test pinning lambda alone is rejected."""
        assert self._fit(sim_dir, tmp_path / "x.json", "--lambda", "0.5") == EXIT_INVALID

    def test_all_diverged_exit_code(self, sim_dir, tmp_path):
        """Test a search with no converged point exits with code 3."""
        args = ("--penalty", "l1", "--max-iter", "1", "--epsilon", "1e-12", "--rank-max", "1", "--n-lambda", "2")
        assert self._fit(sim_dir, tmp_path / "div.json", *args) == EXIT_DIVERGED

    def test_bad_inputs(self, sim_dir, tmp_path):
        """Test missing files, non-finite data and unknown flags exit with code 2."""
        out = tmp_path / "bad.json"
        missing = main(["fit", "--x", str(tmp_path / "nope.csv"), "--y", str(sim_dir / "Y.csv"), "--out", str(out)])
        assert missing == EXIT_INVALID

        Y = pd.read_csv(sim_dir / "Y.csv")
        Y.iloc[3, 1] = np.nan
        Y.to_csv(tmp_path / "Ynan.csv", index=False)
        nan_code = main(["fit", "--x", str(sim_dir / "X.csv"), "--y", str(tmp_path / "Ynan.csv"), "--out", str(out)])
        assert nan_code == EXIT_INVALID

        assert main(["fit", "--bogus"]) == EXIT_INVALID
        assert self._fit(sim_dir, out, "--method", "nope") == EXIT_INVALID

    @pytest.mark.parametrize(
        "extra",
        [
            ("--method", "rrr", "--folds", "1"),
            ("--rank-max", "1", "--n-lambda", "1"),
            ("--lambda-star", "0", "--rank", "1", "--lambda", "0.5"),
        ],
    )
    def test_bad_parameters_exit_code(self, sim_dir, tmp_path, extra):
        """Test out-of-range tuning parameters exit with code 2 instead of a traceback."""
        assert self._fit(sim_dir, tmp_path / "p.json", *extra) == EXIT_INVALID


class TestReplicateCommand:
    """Test the replicate subcommand."""

    def test_summary_and_sidecar(self, tmp_path, monkeypatch):
        """Test the CSV has one row per method and the sidecar holds every record."""
        monkeypatch.delenv("HETRRR_THREADS", raising=False)
        out = tmp_path / "summary.csv"
        code = main(["replicate", *SMALL_SIM, "--reps", "2", "--methods", "rrr,oracle-sr", "--out", str(out)])
        assert code == EXIT_OK
        table = pd.read_csv(out)
        assert list(table["method"]) == ["RRR", "Oracle.sr"]
        sidecar = json.loads(out.with_suffix(".json").read_text())
        assert len(sidecar["records"]) == 4
        assert "jobs" not in sidecar["config"]

    def test_worker_count_invariance(self, tmp_path, monkeypatch):
        """Test one and two workers write byte-identical summaries."""
        monkeypatch.delenv("HETRRR_THREADS", raising=False)
        outputs = []
        for jobs in ("1", "2"):
            out = tmp_path / f"summary_{jobs}.csv"
            args = ["replicate", *SMALL_SIM, "--reps", "3", "--methods", "rrr,oracle-sr", "--jobs", jobs]
            assert main([*args, "--out", str(out)]) == EXIT_OK
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
