"""Command-line surface: analyze, relations, simulate, version."""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from .data_model import DatasetValidationError, ForestParams
from .dataio import (
    CsvError,
    ensure_dir,
    ingest_csv,
    write_importance_json,
    write_matrix_tsv,
    write_metrics_json,
    write_null_tsv,
    write_raw_tsv,
    write_selections_json,
)
from .pipeline import AnalysisConfig, analyze_dataset
from .simulation import ExperimentConfig, ScenarioSpec, run_experiment

USAGE_ERROR = 1
DATA_ERROR = 2

THREADS_ENV = "MUTUALFOREST_THREADS"


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors instead of argparse's 2
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _add_forest_args(sub, include_input: bool = True):
    if include_input:
        sub.add_argument("--input", required=True, help="input CSV file")
        sub.add_argument("--outcome", help="outcome column name")
        sub.add_argument(
            "--outcome-type",
            required=True,
            choices=["classification", "regression", "survival"],
        )
        sub.add_argument("--time-col", help="survival time column")
        sub.add_argument("--status-col", help="survival status column")
        sub.add_argument("--genotype-cols", default="", help="comma-separated genotype columns")
        sub.add_argument("--categorical-cols", default="", help="comma-separated categorical columns")
        sub.add_argument("--continuous-cols", default="", help="comma-separated continuous columns")
    sub.add_argument("--ntree", type=int, default=None, help="default: 500 (100 for bias scenarios)")
    sub.add_argument("--mtry", type=int, help="default: round(p^(3/4))")
    sub.add_argument("--mtry-mode", choices=["pow34", "sqrt"], default="pow34")
    sub.add_argument("--min-node-size", type=int, default=1)
    sub.add_argument("--s", type=int, help="surrogates per node; default: max(1, round(0.01 p))")
    sub.add_argument("--alpha", type=float, default=0.01)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=None)
    sub.add_argument("--null-method", choices=["auto", "janitza", "permutation"], default="auto")
    sub.add_argument("--repetitions", type=int, default=100)
    sub.add_argument("--min-nonpositive", type=int, default=100)
    sub.add_argument("--out", required=True, help="output directory")


def _build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(prog="mutualforest")
    sub = parser.add_subparsers(dest="command")

    analyze = sub.add_parser("analyze", help="importances, MFI matrix, tests and selections")
    _add_forest_args(analyze)
    analyze.add_argument("--export-nulls", action="store_true", help="write null-distribution TSVs")

    relations = sub.add_parser("relations", help="MFI matrix and related-pair selection only")
    _add_forest_args(relations)

    simulate = sub.add_parser("simulate", help="run a simulation scenario")
    simulate.add_argument(
        "--scenario", required=True, choices=["null-a", "null-b", "correlation", "null-binary"]
    )
    simulate.add_argument(
        "--outcome-type",
        choices=["classification", "regression", "survival"],
        default="classification",
    )
    simulate.add_argument("--n", type=int, default=100)
    simulate.add_argument("--p-total", type=int, default=200)
    simulate.add_argument("--n-cases", type=int, default=50)
    simulate.add_argument("--n-controls", type=int, default=50)
    simulate.add_argument("--replicates", type=int, default=100)
    _add_forest_args(simulate, include_input=False)

    sub.add_parser("version", help="print the package version")
    return parser


def _kind_overrides(args) -> dict:
    overrides = {}
    for flag, kind in (
        ("genotype_cols", "genotype"),
        ("categorical_cols", "categorical"),
        ("continuous_cols", "continuous"),
    ):
        for col in filter(None, getattr(args, flag, "").split(",")):
            overrides[col.strip()] = kind
    return overrides


def _resolve_mtry(args, p_features: int) -> int:
    if args.mtry is not None:
        return args.mtry
    if args.mtry_mode == "sqrt":
        return max(1, int(round(p_features**0.5)))
    return max(1, int(round(p_features**0.75)))


def _resolve_s(args, p_features: int) -> int:
    if args.s is not None:
        return args.s
    return max(1, int(round(0.01 * p_features)))


def _run_analysis(args, relations_only: bool) -> int:
    dataset = ingest_csv(
        args.input,
        args.outcome,
        args.outcome_type,
        time_col=args.time_col,
        status_col=args.status_col,
        kind_overrides=_kind_overrides(args),
    )
    threads = args.threads if args.threads is not None else _default_threads()
    params = ForestParams(
        ntree=args.ntree if args.ntree is not None else 500,
        mtry=_resolve_mtry(args, dataset.p),
        min_node_size=args.min_node_size,
        s=_resolve_s(args, dataset.p),
        seed=args.seed,
        threads=threads,
    )
    config = AnalysisConfig(
        alpha=args.alpha,
        null_method=args.null_method,
        repetitions=args.repetitions,
        min_nonpositive=args.min_nonpositive,
        air_min_nonpositive=args.min_nonpositive,
        compute_smd=not relations_only,
    )
    rng = np.random.default_rng(np.random.SeedSequence((args.seed & 0xFFFFFFFFFFFFFFFF, 0xA5)))
    result = analyze_dataset(dataset, params, config, rng)
    out = ensure_dir(args.out)
    write_matrix_tsv(result.mfi_result.mfi.values, dataset.names, os.path.join(out, "mfi.tsv"))
    write_selections_json(result, dataset.names, os.path.join(out, "selections.json"))
    if not relations_only:
        write_importance_json(result.report, os.path.join(out, "importance.json"))
        if getattr(args, "export_nulls", False):
            write_null_tsv(result.mir_null_dist, os.path.join(out, "mir_null.tsv"))
            write_null_tsv(result.mfi_null_dist, os.path.join(out, "mfi_null.tsv"))
    return 0


def _run_simulate(args) -> int:
    spec = ScenarioSpec(
        scenario=args.scenario,
        n=args.n,
        p_total=args.p_total,
        outcome_type=args.outcome_type,
        replicates=args.replicates,
        base_seed=args.seed,
        n_cases=args.n_cases,
        n_controls=args.n_controls,
    )
    threads = args.threads if args.threads is not None else _default_threads()
    if args.scenario in ("null-a", "null-b"):
        default_mtry, default_s, default_ntree = 3, 3, 100
    else:
        default_mtry = max(1, int(round(args.p_total**0.75)))
        default_s = max(1, int(round(0.01 * args.p_total)))
        default_ntree = 500
    config = ExperimentConfig(
        ntree=args.ntree if args.ntree is not None else default_ntree,
        mtry=args.mtry if args.mtry is not None else default_mtry,
        min_node_size=args.min_node_size,
        s=args.s if args.s is not None else default_s,
        alpha=args.alpha,
        null_method=args.null_method,
        repetitions=args.repetitions,
        min_nonpositive=args.min_nonpositive,
        air_min_nonpositive=args.min_nonpositive,
        threads=threads,
    )
    result = run_experiment(spec, config)
    out = ensure_dir(args.out)
    write_metrics_json(result.metrics, os.path.join(out, "metrics.json"))
    write_raw_tsv(result.records, os.path.join(out, "raw.tsv"))
    return 0


def cli_main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    if args.command is None:
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        if args.command == "version":
            print(__version__)
            return 0
        if args.command == "analyze":
            return _run_analysis(args, relations_only=False)
        if args.command == "relations":
            return _run_analysis(args, relations_only=True)
        if args.command == "simulate":
            return _run_simulate(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (CsvError, DatasetValidationError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    return USAGE_ERROR


def main() -> None:  # console-script entry point
    sys.exit(cli_main())
