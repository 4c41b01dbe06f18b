"""Typed datasets, outcomes and forest hyperparameters.

All estimation code works on a :class:`Dataset`: a dense numeric feature
matrix with a per-feature kind (continuous, categorical or genotype) and a
typed outcome. Datasets are immutable after construction and safe to share
across worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
GENOTYPE = "genotype"


@dataclass(frozen=True)
class FeatureKind:
    """Kind of a feature column; ``levels`` is only meaningful for categorical."""

    kind: str
    levels: int = 0

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, CATEGORICAL, GENOTYPE):
            raise ValueError(f"unknown feature kind: {self.kind!r}")
        if self.kind == CATEGORICAL and self.levels < 2:
            raise ValueError("categorical feature needs at least 2 levels")

    @property
    def is_ordered(self) -> bool:
        """Continuous and genotype features split on a threshold."""
        return self.kind != CATEGORICAL


def continuous() -> FeatureKind:
    return FeatureKind(CONTINUOUS)


def categorical(levels: int) -> FeatureKind:
    return FeatureKind(CATEGORICAL, levels)


def genotype() -> FeatureKind:
    return FeatureKind(GENOTYPE)


@dataclass(frozen=True)
class Classification:
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))


@dataclass(frozen=True)
class Regression:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))


@dataclass(frozen=True)
class Survival:
    time: np.ndarray
    status: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "time", np.asarray(self.time, dtype=np.float64))
        object.__setattr__(self, "status", np.asarray(self.status, dtype=np.int64))


Outcome = Union[Classification, Regression, Survival]


@dataclass(frozen=True)
class IndexedViolation:
    """One violated dataset invariant, pointing at the offending column/row."""

    feature: Optional[int]
    row: Optional[int]
    message: str

    def __str__(self) -> str:
        loc = []
        if self.feature is not None:
            loc.append(f"feature {self.feature}")
        if self.row is not None:
            loc.append(f"row {self.row}")
        where = ", ".join(loc)
        return f"{self.message} ({where})" if where else self.message


class DatasetValidationError(ValueError):
    """Raised by :func:`validate`; carries every violation found."""

    def __init__(self, violations: List[IndexedViolation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass(frozen=True)
class Dataset:
    """Complete-data feature matrix plus typed outcome.

    ``x`` is an (n, p) float matrix; categorical/genotype columns hold
    integer-valued floats.
    """

    x: np.ndarray
    kinds: List[FeatureKind]
    names: List[str]
    outcome: Outcome

    def __post_init__(self):
        object.__setattr__(self, "x", np.ascontiguousarray(self.x, dtype=np.float64))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.x[:, j]

    def outcome_length(self) -> int:
        o = self.outcome
        if isinstance(o, Classification):
            return len(o.labels)
        if isinstance(o, Regression):
            return len(o.values)
        return len(o.time)


@dataclass(frozen=True)
class ForestParams:
    """Hyperparameters of a forest run.

    ``min_node_size`` is the maximum size of a terminal node: nodes with at
    most this many samples are not split further. ``s`` is the number of
    surrogate splits kept per internal node.
    """

    ntree: int
    mtry: int
    min_node_size: int = 1
    s: int = 0
    seed: int = 0
    threads: int = 1

    def check(self, n_features: int) -> None:
        if self.ntree < 1:
            raise ValueError("ntree must be positive")
        if not 1 <= self.mtry <= n_features:
            raise ValueError(f"mtry must be in [1, {n_features}], got {self.mtry}")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be positive")
        if self.s < 0:
            raise ValueError("s must be non-negative")
        if self.threads < 1:
            raise ValueError("threads must be positive")


def collect_violations(dataset: Dataset) -> List[IndexedViolation]:
    """All dataset-invariant violations; empty list means the dataset is valid."""
    out: List[IndexedViolation] = []
    x = dataset.x
    n, p = x.shape
    if n < 2:
        out.append(IndexedViolation(None, None, f"need at least 2 samples, got {n}"))
    if p < 1:
        out.append(IndexedViolation(None, None, "need at least 1 feature"))
    if len(dataset.kinds) != p:
        out.append(IndexedViolation(None, None, f"{len(dataset.kinds)} kinds for {p} features"))
        return out
    if len(dataset.names) != p:
        out.append(IndexedViolation(None, None, f"{len(dataset.names)} names for {p} features"))

    for j, kind in enumerate(dataset.kinds):
        col = x[:, j]
        bad = np.flatnonzero(~np.isfinite(col))
        if bad.size:
            out.append(IndexedViolation(j, int(bad[0]), "missing or non-finite value"))
            continue
        if kind.kind == CATEGORICAL:
            ok = (col == np.floor(col)) & (col >= 0) & (col < kind.levels)
            bad = np.flatnonzero(~ok)
            if bad.size:
                out.append(
                    IndexedViolation(
                        j, int(bad[0]),
                        f"category level {col[bad[0]]!r} outside [0, {kind.levels})",
                    )
                )
        elif kind.kind == GENOTYPE:
            ok = np.isin(col, (0.0, 1.0, 2.0))
            bad = np.flatnonzero(~ok)
            if bad.size:
                out.append(
                    IndexedViolation(j, int(bad[0]), f"genotype value {col[bad[0]]!r} not in {{0,1,2}}")
                )

    m = dataset.outcome_length()
    if m != n:
        out.append(IndexedViolation(None, None, f"outcome length {m} != sample count {n}"))
    o = dataset.outcome
    if isinstance(o, Classification):
        if o.n_classes < 2:
            out.append(IndexedViolation(None, None, "need at least 2 classes"))
        bad = np.flatnonzero((o.labels < 0) | (o.labels >= o.n_classes))
        if bad.size:
            out.append(
                IndexedViolation(None, int(bad[0]), f"class label {o.labels[bad[0]]} outside [0, {o.n_classes})")
            )
    elif isinstance(o, Survival):
        bad = np.flatnonzero(o.time <= 0)
        if bad.size:
            out.append(IndexedViolation(None, int(bad[0]), "non-positive survival time"))
        bad = np.flatnonzero(~np.isin(o.status, (0, 1)))
        if bad.size:
            out.append(IndexedViolation(None, int(bad[0]), f"status {o.status[bad[0]]} not in {{0,1}}"))
    return out


def validate(dataset: Dataset) -> None:
    """Raise :class:`DatasetValidationError` listing every violated invariant."""
    violations = collect_violations(dataset)
    if violations:
        raise DatasetValidationError(violations)
