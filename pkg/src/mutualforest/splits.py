"""Split rules shared by primary and surrogate splits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Optional

import numpy as np


@dataclass(frozen=True)
class SplitRule:
    """A binary split on one feature.

    Threshold rules send ``x <= threshold`` to the left child; category
    rules send levels in ``left_set`` left. Exactly one of the two is set.
    """

    feature: int
    threshold: Optional[float] = None
    left_set: Optional[FrozenSet[int]] = None

    def __post_init__(self):
        if (self.threshold is None) == (self.left_set is None):
            raise ValueError("exactly one of threshold/left_set must be given")

    def goes_left(self, values: np.ndarray) -> np.ndarray:
        """Boolean mask: which of ``values`` are routed to the left child."""
        values = np.asarray(values)
        if self.threshold is not None:
            return values <= self.threshold
        if not self.left_set:
            return np.zeros(values.shape, dtype=bool)
        return np.isin(values.astype(np.int64), sorted(self.left_set))

    def sort_key(self):
        """Deterministic tie-break order: thresholds ascending, then subsets."""
        if self.threshold is not None:
            return (0, self.threshold)
        return (1, tuple(sorted(self.left_set)))
