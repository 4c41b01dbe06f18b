"""CSV ingestion and report serialization (JSON for records, TSV for matrices)."""

from __future__ import annotations

import json
import os
from dataclasses import asdict
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .data_model import (
    CATEGORICAL,
    CONTINUOUS,
    GENOTYPE,
    Classification,
    Dataset,
    Outcome,
    Regression,
    Survival,
    categorical,
    continuous,
    genotype,
    validate,
)
from .importance import ImportanceReport
from .pipeline import AnalysisResult
from .selection import NullDistribution
from .simulation import MetricsReport

AUTO_CATEGORICAL_MAX_LEVELS = 12


class CsvError(ValueError):
    """Malformed input file; message names the offending row/column."""


def _column_kind(name: str, values: np.ndarray, override: Optional[str]):
    is_integral = bool(np.all(values == np.floor(values)))
    if override == GENOTYPE:
        if not (is_integral and np.all(np.isin(values, (0.0, 1.0, 2.0)))):
            raise CsvError(f"column {name!r} declared genotype but holds values outside {{0,1,2}}")
        return genotype()
    if override == CATEGORICAL:
        if not (is_integral and values.min() >= 0):
            raise CsvError(f"column {name!r} declared categorical but holds non-integer or negative values")
        return categorical(max(int(values.max()) + 1, 2))
    if override == CONTINUOUS:
        return continuous()
    if override is not None:
        raise CsvError(f"unknown kind override {override!r} for column {name!r}")
    if is_integral and values.min() >= 0 and np.unique(values).size <= AUTO_CATEGORICAL_MAX_LEVELS:
        return categorical(max(int(values.max()) + 1, 2))
    return continuous()


def ingest_csv(
    path: str,
    outcome: str,
    outcome_type: str,
    time_col: Optional[str] = None,
    status_col: Optional[str] = None,
    kind_overrides: Optional[Dict[str, str]] = None,
) -> Dataset:
    """Read a header CSV into a Dataset; columns are auto-typed unless overridden.

    For survival outcomes pass ``time_col`` and ``status_col`` instead of
    ``outcome``. Missing cells and non-numeric values are errors.
    """
    kind_overrides = kind_overrides or {}
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise CsvError(f"cannot read {path}: {exc}") from exc
    if frame.empty:
        raise CsvError(f"{path} has no data rows")

    outcome_cols: List[str]
    if outcome_type == "survival":
        if not time_col or not status_col:
            raise CsvError("survival outcome needs both a time and a status column")
        outcome_cols = [time_col, status_col]
    else:
        outcome_cols = [outcome]
    for col in outcome_cols:
        if col not in frame.columns:
            raise CsvError(f"outcome column {col!r} not found in {path}")

    numeric = pd.DataFrame(index=frame.index)
    for col in frame.columns:
        converted = pd.to_numeric(frame[col], errors="coerce")
        bad = converted.index[converted.isna() & frame[col].notna()]
        if len(bad):
            raise CsvError(f"non-numeric value in column {col!r}, row {int(bad[0])}")
        missing = converted.index[converted.isna()]
        if len(missing):
            raise CsvError(f"missing value in column {col!r}, row {int(missing[0])} (missing data unsupported)")
        numeric[col] = converted.astype(np.float64)

    if outcome_type == "classification":
        labels = numeric[outcome].to_numpy()
        if not np.all(labels == np.floor(labels)):
            raise CsvError(f"classification outcome {outcome!r} holds non-integer labels")
        labels = labels.astype(np.int64)
        uniq = np.unique(labels)
        remap = np.searchsorted(uniq, labels)
        out: Outcome = Classification(remap, len(uniq))
    elif outcome_type == "regression":
        out = Regression(numeric[outcome].to_numpy())
    elif outcome_type == "survival":
        out = Survival(numeric[time_col].to_numpy(), numeric[status_col].to_numpy().astype(np.int64))
    else:
        raise CsvError(f"unknown outcome type {outcome_type!r}")

    feature_cols = [c for c in numeric.columns if c not in outcome_cols]
    if not feature_cols:
        raise CsvError("no feature columns left after removing the outcome")
    kinds = [
        _column_kind(c, numeric[c].to_numpy(), kind_overrides.get(c)) for c in feature_cols
    ]
    dataset = Dataset(numeric[feature_cols].to_numpy(), kinds, feature_cols, out)
    validate(dataset)
    return dataset


def export_dataset_csv(dataset: Dataset, path: str) -> None:
    """Write a dataset back to CSV (features plus outcome columns)."""
    frame = pd.DataFrame(dataset.x, columns=dataset.names)
    o = dataset.outcome
    if isinstance(o, Classification):
        frame["outcome"] = o.labels
    elif isinstance(o, Regression):
        frame["outcome"] = o.values
    else:
        frame["time"] = o.time
        frame["status"] = o.status
    frame.to_csv(path, index=False)


# ---------------------------------------------------------------------------
# report writers


def _as_float_list(values) -> Optional[list]:
    if values is None:
        return None
    return [float(v) for v in values]


def write_importance_json(report: ImportanceReport, path: str) -> None:
    rows = []
    for i, name in enumerate(report.names):
        rows.append(
            {
                "feature": name,
                "impurity": float(report.impurity[i]),
                "air": float(report.air[i]),
                "smd": float(report.smd[i]) if report.smd is not None else None,
                "mir": float(report.mir[i]),
                "p_air": float(report.p_air[i]) if report.p_air is not None else None,
                "p_mir": float(report.p_mir[i]) if report.p_mir is not None else None,
            }
        )
    payload = {"features": rows}
    if report.params is not None:
        params = asdict(report.params)
        params.pop("threads", None)  # execution detail; outputs are thread-invariant
        payload["params"] = params
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_matrix_tsv(matrix: np.ndarray, names: Sequence[str], path: str) -> None:
    """Matrix with feature names as header row and first column."""
    with open(path, "w") as fh:
        fh.write("feature\t" + "\t".join(names) + "\n")
        for name, row in zip(names, matrix):
            fh.write(name + "\t" + "\t".join(repr(float(v)) for v in row) + "\n")


def write_selections_json(result: AnalysisResult, names: Sequence[str], path: str) -> None:
    payload = {
        "alpha": result.mir_selected.alpha,
        "mir_selected": [names[int(j)] for j in result.mir_selected.selected],
        "air_selected": (
            [names[int(j)] for j in result.air_selected.selected]
            if result.air_selected is not None
            else None
        ),
        "related_pairs": [
            {"feature": names[i], "partner": names[j], "mfi": value, "p": p}
            for i, j, value, p in sorted(result.related_pairs, key=lambda t: t[3])
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_null_tsv(null: NullDistribution, path: str) -> None:
    """Single-column TSV of null samples, for diagnostic plotting."""
    with open(path, "w") as fh:
        fh.write("value\n")
        for v in null.samples:
            fh.write(repr(float(v)) + "\n")


def write_metrics_json(metrics: MetricsReport, path: str) -> None:
    payload = {
        "scenario": metrics.scenario,
        "replicates": metrics.replicates,
        "selection_frequency": metrics.selection_frequency,
        "group_frequency": metrics.group_frequency,
        "jaccard_stability": metrics.jaccard_stability,
        "empirical_power": metrics.empirical_power,
        "fpr": metrics.fpr,
        "type1_error": metrics.type1_error,
    }
    medians = {}
    for key, value in metrics.medians.items():
        if isinstance(value, np.ndarray):
            medians[key] = value.tolist()
        else:
            medians[key] = value
    if medians:
        payload["medians"] = medians
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_raw_tsv(records: List[dict], path: str) -> None:
    """Long-format per-replicate values for external plotting."""
    columns = ["replicate", "item", "method", "value", "p", "selected"]
    with open(path, "w") as fh:
        fh.write("\t".join(columns) + "\n")
        for rec in records:
            fh.write("\t".join(str(rec[c]) for c in columns) + "\n")


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
