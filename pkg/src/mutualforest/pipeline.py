"""End-to-end analysis: augmented forest, MFI, importances, tests, selections."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .data_model import Dataset, ForestParams
from .forest import Forest
from .importance import ImportanceReport, air, impurity_importance, mir, surrogate_minimal_depth
from .relations import MfiResult, compute_mfi
from .selection import (
    DEFAULT_ALPHA,
    DEFAULT_MIN_NONPOSITIVE,
    DEFAULT_REPETITIONS,
    InsufficientNonPositive,
    NullDistribution,
    SelectionResult,
    janitza_null,
    mfi_null,
    mir_null,
    pvalues,
    select,
)


@dataclass
class AnalysisConfig:
    alpha: float = DEFAULT_ALPHA
    null_method: str = "auto"  # auto | janitza | permutation
    repetitions: int = DEFAULT_REPETITIONS
    min_nonpositive: int = DEFAULT_MIN_NONPOSITIVE
    air_min_nonpositive: int = DEFAULT_MIN_NONPOSITIVE
    compute_smd: bool = True


@dataclass
class AnalysisResult:
    mfi_result: MfiResult
    report: ImportanceReport
    mfi_pvalues: np.ndarray  # p x p, diagonal 1
    air_selected: Optional[SelectionResult]
    mir_selected: SelectionResult
    related_pairs: List[Tuple[int, int, float, float]]  # (i, j, mfi, p) with p <= alpha
    mir_null_dist: Optional[NullDistribution] = None
    mfi_null_dist: Optional[NullDistribution] = None


def analyze_dataset(
    dataset: Dataset,
    params: ForestParams,
    config: AnalysisConfig,
    rng: np.random.Generator,
) -> AnalysisResult:
    """Run the full relation/importance pipeline on one dataset.

    ``rng`` drives the pseudo-data permutations and the permutation null
    for the MIR test; forest growth is seeded by ``params.seed``.
    """
    mfi_res = compute_mfi(dataset, params, rng)
    p = dataset.p
    imp = impurity_importance(mfi_res.forest, 2 * p)
    air_values = air(imp, p)
    mir_values = mir(air_values, mfi_res.mfi)
    smd_values = surrogate_minimal_depth(mfi_res.forest, 2 * p)[:p] if config.compute_smd else None

    mir_nd = mir_null(
        mir_values,
        mfi_res.mfi.m_z,
        air_values,
        method=config.null_method,
        min_nonpositive=config.min_nonpositive,
        repetitions=config.repetitions,
        rng=rng,
    )
    p_mir = pvalues(mir_values, mir_nd)
    mir_sel = select(p_mir, config.alpha, hypothesis="MIR > 0")

    p_air: Optional[np.ndarray] = None
    air_sel: Optional[SelectionResult] = None
    try:
        air_nd = janitza_null(air_values, config.air_min_nonpositive)
        p_air = pvalues(air_values, air_nd)
        air_sel = select(p_air, config.alpha, hypothesis="AIR > 0")
    except InsufficientNonPositive as exc:
        warnings.warn(f"AIR test skipped: {exc}")

    mfi_nd = mfi_null(
        mfi_res.mfi.values,
        mfi_res.mfi.m_z,
        method=config.null_method,
        min_nonpositive=config.min_nonpositive,
    )
    mfi_p = pvalues(mfi_res.mfi.values.ravel(), mfi_nd).reshape(p, p)
    np.fill_diagonal(mfi_p, 1.0)
    related = [
        (int(i), int(j), float(mfi_res.mfi.values[i, j]), float(mfi_p[i, j]))
        for i, j in zip(*np.nonzero(mfi_p <= config.alpha))
        if i != j
    ]

    report = ImportanceReport(
        names=list(dataset.names),
        impurity=imp[:p],
        air=air_values,
        mir=mir_values,
        smd=smd_values,
        p_air=p_air,
        p_mir=p_mir,
        params=params,
    )
    return AnalysisResult(mfi_res, report, mfi_p, air_sel, mir_sel, related, mir_nd, mfi_nd)
