"""Pseudo-data augmentation and the mutual forest impact (MFI) matrix.

The relation analysis trains one forest on an augmented design holding the
original features next to per-feature permuted copies. The permuted block
is distribution-preserving but outcome-independent, so the difference of
the two blocks' mean adjusted agreement removes the split-point and
category-frequency bias of the raw relation matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .data_model import Dataset, ForestParams
from .forest import Forest, train_forest
from .surrogates import RelationMatrix, mean_adjusted_agreement


@dataclass
class AugmentedDesign:
    """Original features (block 0..p-1) plus permuted copies (block p..2p-1)."""

    dataset: Dataset
    permutations: List[np.ndarray]
    p_original: int

    def original_index(self, i: int) -> int:
        return i

    def permuted_index(self, i: int) -> int:
        return i + self.p_original


@dataclass
class MfiMatrix:
    """MFI values plus the relation-matrix blocks they were derived from."""

    values: np.ndarray  # p x p, diagonal 0
    m_x: np.ndarray  # original-block mean adjusted agreement
    m_z: np.ndarray  # permuted-block mean adjusted agreement
    relation: RelationMatrix  # full 2p x 2p matrix of the augmented forest


@dataclass
class MfiResult:
    mfi: MfiMatrix
    forest: Forest
    design: AugmentedDesign


def generate_pseudo_data(dataset: Dataset, rng: np.random.Generator) -> AugmentedDesign:
    """Augment the dataset with an independent permutation of every column."""
    n, p = dataset.n, dataset.p
    perms = [rng.permutation(n) for _ in range(p)]
    z = np.empty_like(dataset.x)
    for j, perm in enumerate(perms):
        z[:, j] = dataset.x[perm, j]
    augmented = Dataset(
        x=np.hstack([dataset.x, z]),
        kinds=list(dataset.kinds) + list(dataset.kinds),
        names=list(dataset.names) + [f"{name}_perm" for name in dataset.names],
        outcome=dataset.outcome,
    )
    return AugmentedDesign(augmented, perms, p)


def compute_mfi(dataset: Dataset, params: ForestParams, rng: np.random.Generator) -> MfiResult:
    """Train the augmented forest and return MFI = M_X - M_Z per feature pair.

    ``params.mtry`` applies to the 2p augmented candidates; ``params.s``
    must be positive since MFI is undefined without surrogates.
    """
    if params.s <= 0:
        raise ValueError("MFI requires surrogate tracking (params.s > 0)")
    design = generate_pseudo_data(dataset, rng)
    forest = train_forest(design.dataset, params)
    p = dataset.p
    relation = mean_adjusted_agreement(forest, 2 * p)
    m_x = relation.m[:p, :p].copy()
    m_z = relation.m[p:, p:].copy()
    values = m_x - m_z
    np.fill_diagonal(values, 0.0)
    return MfiResult(MfiMatrix(values, m_x, m_z, relation), forest, design)
