"""
Command-line entry point for subgroup-aware reduced-rank regression.
Subcommands: fit (CSV data -> JSON report), simulate (-> CSV + truth.json),
replicate (Monte Carlo summary CSV).
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from analysis.admm import DEFAULT_LAMBDA_STAR, admm_fit
from analysis.core import (
    DEFAULT_EPSILON,
    DEFAULT_MAX_ITER,
    DEFAULT_THETA,
    AdmmConfig,
    FitResult,
    PenaltySpec,
    preprocess,
    validate_dataset,
)
from analysis.errors import AllFitsDiverged, AnalysisError
from analysis.logs import configure_logging
from analysis.matrix_io import read_matrix_csv, write_json
from analysis.methods import MethodId, fit_method, parse_methods, rrr_result
from analysis.replicate import ReplicationSettings, resolve_jobs, run_replications, summarize
from analysis.rrr import ols_residual_row_norms
from analysis.selection import DEFAULT_FOLDS, DEFAULT_N_LAMBDA, Criterion, SelectionConfig, select_model
from analysis.simulate import SimulationSpec, generate, read_truth, write_simulation

logger = logging.getLogger("cli")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DIVERGED = 3

RESIDUAL_QUANTILES = (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0)


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--gamma", type=float, default=None, help="MCP/SCAD concavity (default 3 / 3.7)")
    parser.add_argument("--theta", type=float, default=DEFAULT_THETA, help="ADMM penalty parameter")
    parser.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="primal residual tolerance")
    parser.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    parser.add_argument("--rank-max", type=int, default=None, help="largest rank searched (default min(p, q))")
    parser.add_argument("--n-lambda", type=int, default=DEFAULT_N_LAMBDA)
    parser.add_argument("--lambda-star", type=float, default=DEFAULT_LAMBDA_STAR, help="ridge fusion level of the start")
    parser.add_argument("--cold-start", action="store_true", help="start every grid point from ridge fusion")
    parser.add_argument("--folds", type=int, default=DEFAULT_FOLDS, help="CV folds for RRR and Oracle.s ranks")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes (HETRRR_THREADS overrides)")


def _add_simulation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--example", type=int, choices=(1, 2), default=1)
    parser.add_argument("--setting", choices=("i", "ii"), default="i")
    parser.add_argument("--snr", type=float, default=None, help="default 1.5 (1.25 in setting ii)")
    parser.add_argument("--mu", type=float, default=None, help="intercept level; random N(0,1) when omitted")
    parser.add_argument("--n", type=int, default=100)
    parser.add_argument("--p", type=int, default=12)
    parser.add_argument("--q", type=int, default=8)
    parser.add_argument("--r-star", dest="r_star", type=int, default=3, help="true rank r*")
    parser.add_argument("--n-test", type=int, default=90)
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetrrr", description="Subgroup identification with reduced-rank regression")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (default: $HETRRR_LOG_LEVEL or WARNING)")
    parser.add_argument("--plain-logs", action="store_true", help="plain text instead of JSON log lines")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit X/Y CSVs and write a JSON report")
    fit.add_argument("--x", required=True, type=Path)
    fit.add_argument("--y", required=True, type=Path)
    fit.add_argument("--out", required=True, type=Path)
    fit.add_argument("--method", type=MethodId, default=None, help="default sr-<penalty>")
    fit.add_argument("--penalty", choices=("mcp", "scad", "l1"), default="mcp")
    fit.add_argument("--rank", type=int, default=None, help="pin the rank")
    fit.add_argument("--lambda", dest="lam", type=float, default=None, help="pin lambda (needs --rank)")
    fit.add_argument("--tol-merge", type=float, default=None)
    fit.add_argument("--truth", type=Path, default=None, help="truth.json; enables oracle-s / oracle-sr")
    fit.add_argument("--log-y", action="store_true", help="log-transform responses")
    fit.add_argument("--standardize-x", action="store_true", help="center and scale predictor columns")
    fit.add_argument("--seed", type=int, default=0, help="CV fold seed")
    _add_solver_flags(fit)
    fit.set_defaults(handler=cmd_fit)

    simulate = sub.add_parser("simulate", help="write one simulated dataset")
    _add_simulation_flags(simulate)
    simulate.add_argument("--out-dir", required=True, type=Path)
    simulate.set_defaults(handler=cmd_simulate)

    replicate = sub.add_parser("replicate", help="Monte Carlo comparison of methods")
    _add_simulation_flags(replicate)
    _add_solver_flags(replicate)
    replicate.add_argument("--reps", type=int, default=100)
    replicate.add_argument("--methods", type=parse_methods, default=[MethodId.SR_MCP], help="e.g. sr-mcp,oracle-sr,rrr")
    replicate.add_argument("--out", required=True, type=Path, help="summary CSV; a .json sidecar holds config and records")
    replicate.set_defaults(handler=cmd_replicate)
    return parser


def _selection_config(args: argparse.Namespace, fixed_rank: Optional[int] = None) -> SelectionConfig:
    return SelectionConfig(
        n_lambda=args.n_lambda,
        r_max=args.rank_max,
        fixed_rank=fixed_rank,
        warm_start=not args.cold_start,
        jobs=resolve_jobs(args.jobs),
        theta=args.theta,
        epsilon=args.epsilon,
        max_iter=args.max_iter,
        lambda_star=args.lambda_star,
        tol_merge=getattr(args, "tol_merge", None),
    )


def _simulation_spec(args: argparse.Namespace) -> SimulationSpec:
    return SimulationSpec(
        example=args.example,
        setting=args.setting,
        n=args.n,
        p=args.p,
        q=args.q,
        r_star=args.r_star,
        snr=args.snr,
        mu=args.mu,
        n_test=args.n_test,
        seed=args.seed,
    )


def _pinned_fit(method: MethodId, data, args, spec: Optional[PenaltySpec]) -> FitResult:
    if method is MethodId.RRR:
        return rrr_result(data, args.rank)
    rank = args.rank if method.reduced_rank else min(data.p, data.q)
    config = AdmmConfig(theta=args.theta, epsilon=args.epsilon, max_iter=args.max_iter, lam=args.lam, rank=rank)
    return admm_fit(
        data,
        config,
        spec,
        reduced_rank=method.reduced_rank,
        lambda_star=args.lambda_star,
        tol_merge=args.tol_merge,
    )


def _fit_payload(fit: FitResult, data) -> Dict:
    return {
        "B_hat": fit.B_hat,
        "C_hat": fit.partition.C_hat,
        "assignments": fit.partition.assignment + 1,
        "K_hat": fit.partition.K_hat,
        "rank": fit.rank_used,
        "lambda": fit.lambda_used,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "mse": fit.in_sample_mse(data),
    }


def cmd_fit(args: argparse.Namespace) -> int:
    method = args.method or MethodId(f"sr-{args.penalty}")
    if args.lam is not None and args.rank is None and method.reduced_rank:
        raise AnalysisError("--lambda needs --rank for reduced-rank methods")

    data = validate_dataset(read_matrix_csv(args.x), read_matrix_csv(args.y))
    if args.log_y or args.standardize_x:
        data = preprocess(data, log_y=args.log_y, standardize_x=args.standardize_x)
    truth = read_truth(args.truth)[0] if args.truth is not None else None

    spec = PenaltySpec(kind=method.penalty, gamma=args.gamma) if method.fuses else None
    selection_config = _selection_config(args, fixed_rank=args.rank)
    selection_payload = None

    if args.lam is not None and method.fuses:
        fit = _pinned_fit(method, data, args, spec)
    elif args.rank is not None and method is MethodId.RRR:
        fit = _pinned_fit(method, data, args, spec)
    elif method.fuses:
        config = selection_config.model_copy(
            update={"reduced_rank": method.reduced_rank, "criterion": Criterion.PIC if method.reduced_rank else Criterion.BIC}
        )
        report = select_model(data, spec, config)
        fit = report.best_fit
        selection_payload = {
            "criterion": report.criterion.value,
            "best_rank": report.best_rank,
            "best_lambda": report.best_lambda,
            "grid": report.to_frame().to_dict(orient="records"),
        }
    else:
        fit = fit_method(method, data, selection_config, gamma=args.gamma, truth=truth, folds=args.folds, seed=args.seed)

    norms = ols_residual_row_norms(data)
    diagnostics = {
        "n": data.n,
        "p": data.p,
        "q": data.q,
        "trace": fit.residual_trace.summary() if fit.residual_trace is not None else None,
        "residual_norm_quantiles": {str(q): float(np.quantile(norms, q)) for q in RESIDUAL_QUANTILES},
    }
    config = {
        "command": "fit",
        "x": str(args.x),
        "y": str(args.y),
        "method": method.value,
        "penalty": spec.model_dump(mode="json") if spec is not None else None,
        "selection": selection_config.model_dump(mode="json", exclude={"jobs"}),
        "pinned": {"rank": args.rank, "lambda": args.lam},
        "preprocess": {"log_y": args.log_y, "standardize_x": args.standardize_x},
        "folds": args.folds,
        "seed": args.seed,
        "truth": str(args.truth) if args.truth is not None else None,
    }
    write_json(
        args.out,
        {"config": config, "fit": _fit_payload(fit, data), "selection": selection_payload, "diagnostics": diagnostics},
    )
    print(f"wrote {args.out}: method={method.value} rank={fit.rank_used} K_hat={fit.partition.K_hat}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = _simulation_spec(args)
    data, truth, test = generate(spec)
    paths = write_simulation(args.out_dir, spec, data, truth, test)
    print(f"wrote {len(paths)} files to {args.out_dir}")
    return EXIT_OK


def cmd_replicate(args: argparse.Namespace) -> int:
    settings = ReplicationSettings(
        simulation=_simulation_spec(args),
        reps=args.reps,
        methods=args.methods,
        selection=_selection_config(args).model_copy(update={"jobs": 1}),
        gamma=args.gamma,
        folds=args.folds,
        jobs=resolve_jobs(args.jobs),
    )
    results = run_replications(settings)
    table = summarize(settings, results)
    table.to_csv(args.out, index=False)

    records: List[Dict] = []
    for method, recs in results.items():
        for index, rec in enumerate(recs):
            records.append(
                {
                    "method": method.value,
                    "replication": index,
                    "err_B": rec.err_B,
                    "err_A": rec.err_A,
                    "pre": rec.pre,
                    "rank_hat": rec.rank_hat,
                    "K_hat": rec.K_hat,
                    "per_group_err": rec.per_group_err,
                    "group_absent": rec.group_absent,
                    "converged": rec.converged,
                    "same_partition": rec.same_partition,
                    "failed": rec.failed,
                    "message": rec.message,
                }
            )
    # jobs is left out so the sidecar does not depend on the worker count
    write_json(
        args.out.with_suffix(".json"),
        {"config": settings.model_dump(mode="json", exclude={"jobs"}), "records": records},
    )
    print(f"wrote {args.out}: {len(table)} methods x {args.reps} replications")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INVALID

    try:
        configure_logging(args.log_level, json_format=not args.plain_logs)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        return args.handler(args)
    except AllFitsDiverged as exc:
        logger.error("no grid point converged", extra={"error": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (AnalysisError, ValidationError, ValueError, OSError) as exc:
        logger.error("command failed", extra={"error": str(exc), "kind": type(exc).__name__})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
