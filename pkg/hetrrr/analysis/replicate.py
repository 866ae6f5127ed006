"""
Seeded Monte Carlo replications: simulate, fit every method, evaluate, summarize.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Dict, List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from .errors import AnalysisError
from .methods import MethodId, fit_method
from .metrics import EvalRecord, aggregate, evaluate_fit, summary_frame
from .selection import DEFAULT_FOLDS, SelectionConfig
from .simulate import SimulationSpec, generate

logger = logging.getLogger(__name__)

THREADS_ENV = "HETRRR_THREADS"


def resolve_jobs(requested: int) -> int:
    """Worker count: HETRRR_THREADS when set to a positive integer, else requested."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
        else:
            if value >= 1:
                return value
    return max(1, requested)


class ReplicationSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    simulation: SimulationSpec = SimulationSpec()
    reps: int = Field(default=100, ge=1)
    methods: List[MethodId] = Field(default_factory=lambda: [MethodId.SR_MCP], min_length=1)
    selection: SelectionConfig = SelectionConfig()
    gamma: Optional[float] = Field(default=None, gt=0)
    folds: int = Field(default=DEFAULT_FOLDS, ge=2)
    jobs: int = Field(default=1, ge=1)


def run_replication(index: int, settings: ReplicationSettings) -> List[Tuple[MethodId, EvalRecord]]:
    """
    One replication: data from seed XOR index, then every method in order.

    Failures of a single method are recorded on its EvalRecord and do not stop
    the others.
    """
    spec = settings.simulation.for_replication(index)
    try:
        data, truth, test = generate(spec)
    except AnalysisError as exc:
        logger.warning("replication data failed", extra={"replication": index, "error": str(exc)})
        message = f"{type(exc).__name__}: {exc}"
        return [(method, EvalRecord.failure(spec.K, message)) for method in settings.methods]
    selection = settings.selection.model_copy(update={"jobs": 1})
    out: List[Tuple[MethodId, EvalRecord]] = []
    for method in settings.methods:
        try:
            fit = fit_method(
                method, data, selection, gamma=settings.gamma, truth=truth, folds=settings.folds, seed=spec.seed
            )
            record = evaluate_fit(fit, truth, test)
        except AnalysisError as exc:
            logger.warning(
                "replication failed",
                extra={"replication": index, "method": method.value, "error": str(exc)},
            )
            record = EvalRecord.failure(truth.K, f"{type(exc).__name__}: {exc}")
        out.append((method, record))
    return out


def run_replications(settings: ReplicationSettings) -> Dict[MethodId, List[EvalRecord]]:
    """
    Run settings.reps replications, in worker processes when jobs > 1.

    Records are ordered by replication index, so the result does not depend on
    the number of workers.
    """
    jobs = resolve_jobs(settings.jobs)
    by_index: Dict[int, List[Tuple[MethodId, EvalRecord]]] = {}

    if jobs > 1 and settings.reps > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, settings.reps)) as executor:
            futures = {executor.submit(run_replication, i, settings): i for i in range(settings.reps)}
            for future in as_completed(futures):
                by_index[futures[future]] = future.result()
    else:
        for i in range(settings.reps):
            by_index[i] = run_replication(i, settings)

    results: Dict[MethodId, List[EvalRecord]] = {m: [] for m in settings.methods}
    for i in sorted(by_index):
        for method, record in by_index[i]:
            results[method].append(record)
    logger.info("replications finished", extra={"reps": settings.reps, "jobs": jobs})
    return results


def summarize(settings: ReplicationSettings, results: Dict[MethodId, List[EvalRecord]]) -> pd.DataFrame:
    """One summary row per method, in the order the methods were requested."""
    sim = settings.simulation
    rows = [
        aggregate(results[m], truth_rank=sim.r_star, truth_K=sim.K, method=m.label, subgroups=m.has_subgroups)
        for m in settings.methods
    ]
    return summary_frame(rows)
