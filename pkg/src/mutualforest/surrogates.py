"""Surrogate splits, adjusted agreement and the mean adjusted agreement matrix.

A surrogate split reproduces a node's primary sample routing using a
different feature. Its quality is the adjusted agreement: 0 means no better
than always predicting the larger child (majority rule), 1 means perfect
agreement. Only surrogates with positive adjusted agreement are kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Optional, Sequence

import numpy as np

from .data_model import FeatureKind
from .splits import SplitRule

if TYPE_CHECKING:  # pragma: no cover
    from .forest import Forest

# Nodes smaller than this carry no surrogate information: with only a
# handful of samples nearly every feature reproduces the primary routing
# perfectly (adjusted agreement 1), so which surrogates get stored is a
# lottery that swamps the relation signal with noise. Such nodes are
# skipped by the surrogate search and excluded from the relation matrix.
MIN_SURROGATE_NODE_SIZE = 10


@dataclass(frozen=True)
class SurrogateSplit:
    """A stored surrogate: split rule, adjusted agreement and orientation.

    ``flip`` marks threshold surrogates whose left side tracks the primary
    split's *right* child; agreement was maximized over both orientations.
    """

    feature: int
    rule: SplitRule
    adj: float
    flip: bool = False


@dataclass
class RelationMatrix:
    """p x p mean adjusted agreement; row i averages over nodes split on i."""

    m: np.ndarray
    primary_node_counts: np.ndarray


def adjusted_agreement(n_surr: int, n_maj: int, n_total: int) -> float:
    """(n_surr - n_maj) / (n_total - n_maj); negative when worse than majority rule."""
    if not 0 <= n_surr <= n_total:
        raise ValueError(f"n_surr={n_surr} outside [0, {n_total}]")
    if n_maj >= n_total:
        raise ValueError("invalid primary split: majority child holds every sample")
    if 2 * n_maj < n_total:
        raise ValueError(f"n_maj={n_maj} smaller than half of n_total={n_total}")
    return (n_surr - n_maj) / (n_total - n_maj)


def find_surrogates(
    x: np.ndarray,
    kinds: Sequence[FeatureKind],
    idx: np.ndarray,
    left_mask: np.ndarray,
    primary_feature: int,
    s: int,
    rng: Optional[np.random.Generator] = None,
) -> List[SurrogateSplit]:
    """Best ``s`` surrogates for one node, sorted by descending adjusted agreement.

    ``idx`` are the training rows reaching the node (bootstrap multiplicity
    included), ``left_mask`` the primary routing of those rows. Every
    non-primary feature is scanned. Ties in agreement are broken at random
    when ``rng`` is given (a fixed rule would systematically favour some
    columns over others and distort the relation matrix), otherwise by
    lower feature index.
    """
    m = idx.size
    n_left = int(left_mask.sum())
    n_right = m - n_left
    if s == 0 or n_left == 0 or n_right == 0:
        return []
    n_maj = max(n_left, n_right)
    denom = m - n_maj

    p = x.shape[1]
    ordered = [j for j in range(p) if j != primary_feature and kinds[j].is_ordered]
    cats = [j for j in range(p) if j != primary_feature and not kinds[j].is_ordered]

    cand: List[SurrogateSplit] = []

    if ordered:
        v = x[np.ix_(idx, ordered)]
        order = np.argsort(v, axis=0, kind="stable")
        sv = np.take_along_axis(v, order, axis=0)
        left_sorted = left_mask[order]
        cum_left = np.cumsum(left_sorted, axis=0)[:-1]  # left count among k smallest
        k = np.arange(1, m)[:, None]
        match_normal = cum_left + n_right - (k - cum_left)
        match_flip = (k - cum_left) + n_left - cum_left
        valid = sv[:-1] < sv[1:]
        score = np.where(valid, np.maximum(match_normal, match_flip), -1)
        cut = np.argmax(score, axis=0)
        cols = np.arange(len(ordered))
        best = score[cut, cols]
        for f_pos in np.flatnonzero(best > n_maj):
            j = ordered[f_pos]
            c = cut[f_pos]
            thr = 0.5 * (sv[c, f_pos] + sv[c + 1, f_pos])
            flip = match_flip[c, f_pos] > match_normal[c, f_pos]
            adj = (int(best[f_pos]) - n_maj) / denom
            cand.append(SurrogateSplit(j, SplitRule(j, threshold=float(thr)), adj, bool(flip)))

    if cats:
        vc = x[np.ix_(idx, cats)].astype(np.int64)
        n_cats = len(cats)
        max_levels = max(kinds[j].levels for j in cats)
        total = np.zeros((n_cats, max_levels), dtype=np.int64)
        left = np.zeros((n_cats, max_levels), dtype=np.int64)
        feat_ids = np.repeat(np.arange(n_cats), m)
        np.add.at(total, (feat_ids, vc.T.ravel()), 1)
        vl = vc[left_mask]
        if vl.size:
            feat_ids_l = np.repeat(np.arange(n_cats), vl.shape[0])
            np.add.at(left, (feat_ids_l, vl.T.ravel()), 1)
        right = total - left
        n_surr = np.maximum(left, right).sum(axis=1)
        for f_pos in np.flatnonzero(n_surr > n_maj):
            j = cats[f_pos]
            left_set = frozenset(int(c) for c in np.flatnonzero(left[f_pos] > right[f_pos]))
            adj = (int(n_surr[f_pos]) - n_maj) / denom
            cand.append(SurrogateSplit(j, SplitRule(j, left_set=left_set), adj))

    if rng is None:
        cand.sort(key=lambda sg: (-sg.adj, sg.feature))
    else:
        keys = rng.random(len(cand))
        cand = [cand[i] for i in sorted(range(len(cand)), key=lambda i: (-cand[i].adj, keys[i]))]
    return cand[:s]


def mean_adjusted_agreement(forest: "Forest", p: int) -> RelationMatrix:
    """Aggregate stored surrogate agreements into the p x p relation matrix.

    Entry (i, j) sums the adjusted agreement of feature j's surrogate over
    every node whose primary split uses feature i (0 when j is not among
    that node's stored surrogates) and divides by the number of such nodes.
    Nodes below :data:`MIN_SURROGATE_NODE_SIZE` store no surrogates and so
    contribute zero to every sum while still counting as nodes of their
    primary feature. Rows of features never used as a primary split stay
    all-zero.
    """
    sums = np.zeros((p, p))
    counts = np.zeros(p, dtype=np.int64)
    for tree in forest.trees:
        stack = [tree.root]
        while stack:
            node = stack.pop()
            if node.rule is None:
                continue
            i = node.rule.feature
            counts[i] += 1
            for sg in node.surrogates:
                sums[i, sg.feature] += sg.adj
            stack.append(node.left)
            stack.append(node.right)
    m = np.zeros((p, p))
    used = counts > 0
    m[used] = sums[used] / counts[used, None]
    return RelationMatrix(m, counts)


def relation_threshold_select(rel: RelationMatrix, i: int, t: float = 5.0) -> set:
    """Legacy threshold rule: partners whose relation exceeds t x the row mean.

    Kept as the biased baseline; p-value based selection should be
    preferred.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    p = rel.m.shape[0]
    others = np.arange(p) != i
    row = rel.m[i]
    mean = row[others].mean()
    return {int(j) for j in np.flatnonzero(others & (row > t * mean))}
