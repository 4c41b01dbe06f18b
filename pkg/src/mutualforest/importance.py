"""Importance measures: impurity importance, AIR, SMD and MIR."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .data_model import ForestParams
from .forest import Forest
from .relations import MfiMatrix


@dataclass
class ImportanceReport:
    """Per-feature importance values and, when tested, p-values."""

    names: List[str]
    impurity: np.ndarray
    air: np.ndarray
    mir: np.ndarray
    smd: Optional[np.ndarray] = None
    p_air: Optional[np.ndarray] = None
    p_mir: Optional[np.ndarray] = None
    params: Optional[ForestParams] = None


def impurity_importance(forest: Forest, feature_count: int) -> np.ndarray:
    """Sum of impurity decreases of each feature's primary nodes, per tree."""
    out = np.zeros(feature_count)
    for _, node in forest.internal_nodes():
        out[node.rule.feature] += node.impurity_decrease
    return out / forest.params.ntree


def air(impurity: np.ndarray, p_original: int) -> np.ndarray:
    """Actual impurity reduction: original-block minus permuted-block importance."""
    impurity = np.asarray(impurity, dtype=np.float64)
    if impurity.shape[0] != 2 * p_original:
        raise ValueError(
            f"expected importance over {2 * p_original} augmented features, got {impurity.shape[0]}"
        )
    return impurity[:p_original] - impurity[p_original:]


def surrogate_minimal_depth(forest: Forest, feature_count: int) -> np.ndarray:
    """Mean minimal depth at which a feature appears as primary or surrogate.

    Trees where the feature never appears contribute the tree's maximal
    depth plus one. Lower values mean more important. Requires a forest
    trained with surrogate tracking.
    """
    if forest.params.s <= 0:
        raise ValueError("surrogate minimal depth requires a forest trained with s > 0")
    total = np.zeros(feature_count)
    for tree in forest.trees:
        depth = np.full(feature_count, np.inf)
        max_depth = 0
        stack = [tree.root]
        while stack:
            node = stack.pop()
            max_depth = max(max_depth, node.depth)
            if node.rule is None:
                continue
            d = node.depth
            i = node.rule.feature
            depth[i] = min(depth[i], d)
            for sg in node.surrogates:
                depth[sg.feature] = min(depth[sg.feature], d)
            stack.append(node.left)
            stack.append(node.right)
        depth[np.isinf(depth)] = max_depth + 1
        total += depth
    return total / len(forest.trees)


def mir(air_values: np.ndarray, mfi: MfiMatrix) -> np.ndarray:
    """Mutual impurity reduction: AIR plus MFI-weighted AIR of the partners."""
    air_values = np.asarray(air_values, dtype=np.float64)
    p = air_values.shape[0]
    if mfi.values.shape != (p, p):
        raise ValueError(f"MFI matrix shape {mfi.values.shape} does not match {p} features")
    weights = mfi.values.copy()
    np.fill_diagonal(weights, 0.0)
    return air_values + weights @ air_values
