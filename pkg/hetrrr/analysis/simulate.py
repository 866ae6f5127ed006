"""
Synthetic data for the subgroup + reduced-rank model.
Example 1 draws three intercept groups (mu, -mu, 0); example 2 is homogeneous.
Each draw uses its own counter-based stream so training and test data never
share random numbers.
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .core import Dataset, validate_dataset
from .errors import InvalidParameter, NotPositiveDefinite, RankDeficientSignal
from .matrix_io import write_json, write_matrix_csv

logger = logging.getLogger(__name__)

DEFAULT_RHO = 0.5
DEFAULT_N_TEST = 90
SETTING_II_SNR = 1.25
DEFAULT_SNR = 1.5
DEFAULT_MU = 1.0
SIGNAL_TOL = 1e-8

STREAMS = ("x", "e", "b", "groups", "mu", "test")


class Setting(str, Enum):
    I = "i"
    II = "ii"


class SimulationSpec(BaseModel):
    """Design of one simulated dataset; K is 3 for example 1 and 1 for example 2."""

    model_config = ConfigDict(frozen=True)

    example: int = Field(default=1, ge=1, le=2)
    setting: Setting = Setting.I
    n: int = Field(default=100, ge=2)
    p: int = Field(default=12, ge=1)
    q: int = Field(default=8, ge=1)
    r_star: int = Field(default=3, ge=1)
    snr: Optional[float] = Field(default=None, gt=0)
    mu: Optional[float] = None
    n_test: int = Field(default=DEFAULT_N_TEST, ge=1)
    seed: int = Field(default=0, ge=0)
    rho: float = DEFAULT_RHO

    @model_validator(mode="after")
    def _check_design(self):
        if self.r_star > min(self.p, self.q):
            raise ValueError(f"r_star {self.r_star} exceeds min(p, q) = {min(self.p, self.q)}")
        if self.example == 2 and self.setting is Setting.II:
            raise ValueError("setting ii only applies to example 1")
        return self

    @property
    def K(self) -> int:
        return 3 if self.example == 1 else 1

    @property
    def resolved_snr(self) -> float:
        if self.snr is not None:
            return self.snr
        return SETTING_II_SNR if self.setting is Setting.II else DEFAULT_SNR

    def for_replication(self, index: int) -> "SimulationSpec":
        """Same design with seed XOR replication index."""
        return self.model_copy(update={"seed": self.seed ^ index})


@dataclass(frozen=True)
class GroundTruth:
    B_star: np.ndarray
    C_star: np.ndarray
    assignment: np.ndarray
    sigma: float
    mu: float
    b_n: Optional[float]
    seed: int

    @property
    def K(self) -> int:
        return self.C_star.shape[0]

    @property
    def r_star(self) -> int:
        return int(np.linalg.matrix_rank(self.B_star))

    @property
    def W(self) -> np.ndarray:
        return np.eye(self.K)[self.assignment]

    @property
    def A_star(self) -> np.ndarray:
        return self.C_star[self.assignment]

    def observed_indicator(self) -> Tuple[np.ndarray, np.ndarray]:
        """Indicator restricted to groups that actually occur, and the kept group ids."""
        present = np.flatnonzero(np.bincount(self.assignment, minlength=self.K) > 0)
        return self.W[:, present], present

    def to_dict(self) -> Dict:
        return {
            "K": self.K,
            "r_star": self.r_star,
            "B_star": self.B_star.tolist(),
            "C_star": self.C_star.tolist(),
            "assignments": (self.assignment + 1).tolist(),
            "sigma": self.sigma,
            "mu": self.mu,
            "b_n": self.b_n,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TestSet:
    __test__ = False

    X: np.ndarray
    Y: np.ndarray
    assignment: np.ndarray

    def W(self, K: int) -> np.ndarray:
        return np.eye(K)[self.assignment]


def compound_symmetry(d: int, rho: float) -> np.ndarray:
    """
    d x d matrix with unit diagonal and rho off the diagonal.

    Raises:
        NotPositiveDefinite: unless -1/(d-1) < rho < 1 (any rho works for d = 1)
    """
    if d < 1:
        raise InvalidParameter("d must be positive")
    if d > 1 and not (-1.0 / (d - 1) < rho < 1.0):
        raise NotPositiveDefinite(f"rho={rho} is not positive definite for d={d}")
    return np.full((d, d), rho) + (1.0 - rho) * np.eye(d)


def _sqrt_psd(sigma: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(sigma)
    return (vecs * np.sqrt(vals)) @ vecs.T


def calibrate_noise(XB_star: np.ndarray, E0: np.ndarray, r_star: int, snr: float) -> float:
    """
    Noise scale sigma with sigma_{r*}(X B*) / ||sigma E0||_F = snr.

    Raises:
        RankDeficientSignal: if X B* has fewer than r_star nonzero singular values
    """
    if snr <= 0:
        raise InvalidParameter("snr must be positive")
    s = np.linalg.svd(XB_star, compute_uv=False)
    if s.size < r_star or s[r_star - 1] <= SIGNAL_TOL * max(s[0], 1.0):
        raise RankDeficientSignal(f"X B* has fewer than {r_star} nonzero singular values")
    return float(s[r_star - 1] / (snr * np.linalg.norm(E0)))


def _streams(seed: int) -> Dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.Philox(child)) for name, child in zip(STREAMS, children)}


def _gaussian_rows(rng: np.random.Generator, n: int, root: np.ndarray) -> np.ndarray:
    return rng.standard_normal((n, root.shape[0])) @ root


def _generate(spec: SimulationSpec, C_star: np.ndarray, mu: float, rngs: Dict[str, np.random.Generator]):
    K = C_star.shape[0]
    root_x = _sqrt_psd(compound_symmetry(spec.p, spec.rho))
    root_e = _sqrt_psd(compound_symmetry(spec.q, spec.rho))

    X = _gaussian_rows(rngs["x"], spec.n, root_x)
    B_star = rngs["b"].standard_normal((spec.p, spec.r_star)) @ rngs["b"].standard_normal((spec.q, spec.r_star)).T
    assignment = rngs["groups"].integers(0, K, size=spec.n)
    E0 = _gaussian_rows(rngs["e"], spec.n, root_e)

    sigma = calibrate_noise(X @ B_star, E0, spec.r_star, spec.resolved_snr)
    Y = C_star[assignment] + X @ B_star + sigma * E0

    test_rng = rngs["test"]
    X_test = _gaussian_rows(test_rng, spec.n_test, root_x)
    test_assignment = test_rng.integers(0, K, size=spec.n_test)
    Y_test = C_star[test_assignment] + X_test @ B_star + sigma * _gaussian_rows(test_rng, spec.n_test, root_e)

    b_n = None
    if K >= 2:
        diffs = C_star[:, None, :] - C_star[None, :, :]
        dist = np.linalg.norm(diffs, axis=2)
        b_n = float(dist[np.triu_indices(K, k=1)].min())

    truth = GroundTruth(
        B_star=B_star, C_star=C_star, assignment=assignment, sigma=sigma, mu=mu, b_n=b_n, seed=spec.seed
    )
    test = TestSet(X=X_test, Y=Y_test, assignment=test_assignment)
    logger.debug("simulated dataset", extra={"seed": spec.seed, "sigma": sigma, "K": K})
    return validate_dataset(X, Y), truth, test


def gen_example1(spec: SimulationSpec) -> Tuple[Dataset, GroundTruth, TestSet]:
    """
    Three groups with intercepts (mu,..,mu), -(mu,..,mu) and 0, drawn with equal probability.

    Setting i draws mu from N(0, 1) unless spec.mu pins it; setting ii uses
    spec.mu (default 1.0).
    """
    if spec.example != 1:
        raise InvalidParameter("gen_example1 needs example=1")
    rngs = _streams(spec.seed)
    if spec.mu is not None:
        mu = float(spec.mu)
    elif spec.setting is Setting.II:
        mu = DEFAULT_MU
    else:
        mu = float(rngs["mu"].standard_normal())
    c1 = np.full(spec.q, mu)
    C_star = np.vstack([c1, -c1, np.zeros(spec.q)])
    return _generate(spec, C_star, mu, rngs)


def gen_example2(spec: SimulationSpec) -> Tuple[Dataset, GroundTruth, TestSet]:
    """Homogeneous model: a single intercept (mu,..,mu) with mu ~ N(0, 1)."""
    if spec.example != 2:
        raise InvalidParameter("gen_example2 needs example=2")
    rngs = _streams(spec.seed)
    mu = float(spec.mu) if spec.mu is not None else float(rngs["mu"].standard_normal())
    return _generate(spec, np.full((1, spec.q), mu), mu, rngs)


def generate(spec: SimulationSpec) -> Tuple[Dataset, GroundTruth, TestSet]:
    return gen_example1(spec) if spec.example == 1 else gen_example2(spec)


def write_simulation(
    out_dir: Union[str, Path], spec: SimulationSpec, data: Dataset, truth: GroundTruth, test: TestSet
) -> Dict[str, Path]:
    """Write X.csv, Y.csv, Xtest.csv, Ytest.csv and truth.json; labels in files are 1-based."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "X": out / "X.csv",
        "Y": out / "Y.csv",
        "Xtest": out / "Xtest.csv",
        "Ytest": out / "Ytest.csv",
        "truth": out / "truth.json",
    }
    write_matrix_csv(paths["X"], data.X, prefix="x")
    write_matrix_csv(paths["Y"], data.Y, prefix="y")
    write_matrix_csv(paths["Xtest"], test.X, prefix="x")
    write_matrix_csv(paths["Ytest"], test.Y, prefix="y")
    payload = {"spec": spec.model_dump(mode="json"), **truth.to_dict(), "test_assignments": (test.assignment + 1).tolist()}
    write_json(paths["truth"], payload)
    return paths


def read_truth(path: Union[str, Path]) -> Tuple[GroundTruth, Optional[np.ndarray]]:
    """Load truth.json; returns the ground truth and the 0-based test labels when present."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    truth = GroundTruth(
        B_star=np.asarray(payload["B_star"], dtype=float),
        C_star=np.asarray(payload["C_star"], dtype=float),
        assignment=np.asarray(payload["assignments"], dtype=int) - 1,
        sigma=float(payload["sigma"]),
        mu=float(payload["mu"]),
        b_n=payload.get("b_n"),
        seed=int(payload.get("seed", 0)),
    )
    test_labels = payload.get("test_assignments")
    return truth, (np.asarray(test_labels, dtype=int) - 1 if test_labels is not None else None)
