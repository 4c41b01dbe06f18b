"""Null distributions, empirical p-values and feature selection.

Two null hypotheses are tested: a relation is selected when its MFI value
is significantly above zero, a feature when its MIR value is. The default
null is the mirrored distribution of the observed non-positive values;
when too few non-positive values exist, permutation-based nulls built from
the pseudo-data relation block are used instead.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

JANITZA = "janitza"
PERMUTATION_MFI = "permutation_mfi"
PERMUTATION_MIR = "permutation_mir"

DEFAULT_MIN_NONPOSITIVE = 100
DEFAULT_REPETITIONS = 100
DEFAULT_ALPHA = 0.01


class InsufficientNonPositive(ValueError):
    """Too few non-positive values to mirror a null distribution."""

    def __init__(self, count: int, required: int):
        self.count = count
        self.required = required
        super().__init__(
            f"only {count} non-positive values, need {required}; "
            "use a permutation-based null distribution instead"
        )


@dataclass
class NullDistribution:
    samples: np.ndarray  # sorted ascending
    method: str

    def __post_init__(self):
        self.samples = np.sort(np.asarray(self.samples, dtype=np.float64))
        if self.samples.size == 0:
            raise ValueError("null distribution must be non-empty")

    @property
    def size(self) -> int:
        return int(self.samples.size)


@dataclass
class SelectionResult:
    pvalues: np.ndarray
    selected: np.ndarray  # indices with p <= alpha
    alpha: float
    hypothesis: str


def janitza_null(values: Sequence[float], min_nonpositive: int = DEFAULT_MIN_NONPOSITIVE) -> NullDistribution:
    """Mirror the non-positive observed values into a symmetric null."""
    values = np.asarray(values, dtype=np.float64)
    nonpos = values[values <= 0]
    if nonpos.size < min_nonpositive:
        raise InsufficientNonPositive(int(nonpos.size), min_nonpositive)
    negatives = nonpos[nonpos < 0]
    return NullDistribution(np.concatenate([nonpos, -negatives]), JANITZA)


def permutation_null_mfi(m_z_block: np.ndarray) -> NullDistribution:
    """Null for MFI built from the off-diagonal pseudo-data relations.

    The non-zero entries are mirrored to provide the negative half.
    """
    m_z = np.asarray(m_z_block, dtype=np.float64)
    p = m_z.shape[0]
    off = m_z[~np.eye(p, dtype=bool)]
    nonzero = off[off != 0]
    if nonzero.size == 0:
        warnings.warn("pseudo-data relation block is all zero; degenerate MFI null {0}")
        return NullDistribution(np.zeros(1), PERMUTATION_MFI)
    return NullDistribution(np.concatenate([off, -nonzero]), PERMUTATION_MFI)


def permutation_null_mir(
    m_z_block: np.ndarray,
    air_values: np.ndarray,
    repetitions: int = DEFAULT_REPETITIONS,
    rng: np.random.Generator | None = None,
) -> NullDistribution:
    """Null for MIR from pseudo-data relations and permuted AIR assignments.

    Each repetition permutes the AIR values over the features and emits one
    null MIR per feature: the pseudo-relation-weighted sum of the permuted
    AIRs of the other features. The feature's own AIR term is left out; a
    feature under the null hypothesis has an AIR near zero, and mixing the
    raw AIR values of strong features into the null would push its upper
    tail past every realistic observation.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    if rng is None:
        rng = np.random.default_rng()
    m_z = np.asarray(m_z_block, dtype=np.float64).copy()
    np.fill_diagonal(m_z, 0.0)
    air_values = np.asarray(air_values, dtype=np.float64)
    p = air_values.shape[0]
    out = np.empty((repetitions, p))
    for r in range(repetitions):
        permuted = air_values[rng.permutation(p)]
        out[r] = m_z @ permuted
    return NullDistribution(out.ravel(), PERMUTATION_MIR)


def pvalue(observed: float, null: NullDistribution) -> float:
    """Add-one empirical upper-tail p-value; always positive."""
    greater = int(np.count_nonzero(null.samples >= observed))
    return (1 + greater) / (1 + null.size)


def pvalues(observed: np.ndarray, null: NullDistribution) -> np.ndarray:
    """Vectorized :func:`pvalue` over an array of observed values."""
    observed = np.asarray(observed, dtype=np.float64)
    # count of null samples >= obs via sorted search
    below = np.searchsorted(null.samples, observed, side="left")
    return (1 + null.size - below) / (1 + null.size)


def select(pvals: Sequence[float], alpha: float = DEFAULT_ALPHA, hypothesis: str = "") -> SelectionResult:
    """Items whose p-value is at most alpha."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    pvals = np.asarray(pvals, dtype=np.float64)
    return SelectionResult(pvals, np.flatnonzero(pvals <= alpha), alpha, hypothesis)


def benjamini_hochberg(pvals: np.ndarray) -> np.ndarray:
    """BH-adjusted p-values; optional plumbing, off by default in pipelines."""
    pvals = np.asarray(pvals, dtype=np.float64)
    n = pvals.size
    order = np.argsort(pvals, kind="stable")
    adjusted = np.empty(n)
    running = 1.0
    for rank in range(n - 1, -1, -1):
        running = min(running, pvals[order[rank]] * n / (rank + 1))
        adjusted[order[rank]] = running
    return adjusted


def mir_null(
    mir_values: np.ndarray,
    m_z_block: np.ndarray,
    air_values: np.ndarray,
    method: str = "auto",
    min_nonpositive: int = DEFAULT_MIN_NONPOSITIVE,
    repetitions: int = DEFAULT_REPETITIONS,
    rng: np.random.Generator | None = None,
) -> NullDistribution:
    """Null for the MIR test: mirrored observed values when enough are
    non-positive, otherwise the permutation construction."""
    if method == "janitza":
        return janitza_null(mir_values, min_nonpositive)
    if method == "permutation":
        return permutation_null_mir(m_z_block, air_values, repetitions, rng)
    if method != "auto":
        raise ValueError(f"unknown null method {method!r}")
    try:
        return janitza_null(mir_values, min_nonpositive)
    except InsufficientNonPositive:
        return permutation_null_mir(m_z_block, air_values, repetitions, rng)


def mfi_null(
    mfi_values: np.ndarray,
    m_z_block: np.ndarray,
    method: str = "auto",
    min_nonpositive: int = DEFAULT_MIN_NONPOSITIVE,
) -> NullDistribution:
    """Null for the MFI test; observed values are the off-diagonal MFIs."""
    p = mfi_values.shape[0]
    off = mfi_values[~np.eye(p, dtype=bool)]
    if method == "janitza":
        return janitza_null(off, min_nonpositive)
    if method == "permutation":
        return permutation_null_mfi(m_z_block)
    if method != "auto":
        raise ValueError(f"unknown null method {method!r}")
    try:
        return janitza_null(off, min_nonpositive)
    except InsufficientNonPositive:
        return permutation_null_mfi(m_z_block)
