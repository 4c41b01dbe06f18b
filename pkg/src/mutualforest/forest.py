"""Random forest training for classification, regression and survival.

Trees are grown on full-size bootstrap samples; the best split at each node
maximizes the impurity decrease (Gini / sum of squares / log-rank) over
``mtry`` candidate features. When ``s > 0`` every internal node also stores
its best surrogate splits. Training is a deterministic function of
(dataset, params.seed): each tree owns an RNG stream keyed by
(seed, tree index), so results do not depend on the thread count.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .data_model import (
    Classification,
    Dataset,
    ForestParams,
    Regression,
    Survival,
    validate,
)
from .splits import SplitRule
from .surrogates import MIN_SURROGATE_NODE_SIZE, SurrogateSplit, find_surrogates

_EPS = 1e-12
_SEED_MASK = 0xFFFFFFFFFFFFFFFF

# Categorical features with more levels than this are split by ordered
# category index (categories sorted by outcome mean) instead of exact
# subset enumeration.
MAX_EXACT_CATEGORY_LEVELS = 12


@dataclass
class TreeNode:
    node_size: int
    depth: int
    rule: Optional[SplitRule] = None
    impurity_decrease: float = 0.0
    surrogates: List[SurrogateSplit] = field(default_factory=list)
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    leaf_value: object = None

    @property
    def is_leaf(self) -> bool:
        return self.rule is None


@dataclass
class Tree:
    root: TreeNode
    inbag: np.ndarray  # bootstrap row indices, with multiplicity

    def inbag_mask(self, n: int) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        mask[self.inbag] = True
        return mask

    def max_depth(self) -> int:
        out = 0
        stack = [self.root]
        while stack:
            node = stack.pop()
            out = max(out, node.depth)
            if node.rule is not None:
                stack.append(node.left)
                stack.append(node.right)
        return out


@dataclass
class Forest:
    trees: List[Tree]
    params: ForestParams
    n_features: int
    n_samples: int

    def internal_nodes(self):
        for tree in self.trees:
            stack = [tree.root]
            while stack:
                node = stack.pop()
                if node.rule is not None:
                    yield tree, node
                    stack.append(node.left)
                    stack.append(node.right)

    def structure_hash(self) -> str:
        """Bit-exact digest of the forest, for reproducibility checks."""
        h = hashlib.sha256()
        for tree in self.trees:
            h.update(tree.inbag.tobytes())
            stack = [tree.root]
            while stack:
                node = stack.pop()
                if node.rule is None:
                    h.update(b"L%d" % node.node_size)
                    continue
                r = node.rule
                key = r.threshold.hex() if r.threshold is not None else str(sorted(r.left_set))
                h.update(f"N{r.feature}:{key}:{node.impurity_decrease.hex()}".encode())
                for sg in node.surrogates:
                    h.update(f"S{sg.feature}:{sg.adj.hex()}:{int(sg.flip)}".encode())
                stack.append(node.right)
                stack.append(node.left)
        return h.hexdigest()


# ---------------------------------------------------------------------------
# impurity criteria


def gini_decrease(parent_counts, left_counts, right_counts) -> float:
    """Gini(parent) minus the size-weighted Gini of the children."""
    parent = np.asarray(parent_counts, dtype=np.float64)
    left = np.asarray(left_counts, dtype=np.float64)
    right = np.asarray(right_counts, dtype=np.float64)
    if not np.array_equal(left + right, parent):
        raise ValueError("child class counts do not partition the parent")
    n, nl, nr = parent.sum(), left.sum(), right.sum()
    if nl == 0 or nr == 0:
        raise ValueError("both children must be non-empty")

    def gini(counts, total):
        return 1.0 - np.square(counts / total).sum()

    return gini(parent, n) - nl / n * gini(left, nl) - nr / n * gini(right, nr)


def sse_decrease(parent_values, left_values, right_values) -> float:
    """Sum-of-squared-errors decrease of a regression split."""
    left = np.asarray(left_values, dtype=np.float64)
    right = np.asarray(right_values, dtype=np.float64)
    parent = np.asarray(parent_values, dtype=np.float64)
    if left.size == 0 or right.size == 0:
        raise ValueError("both children must be non-empty")
    if left.size + right.size != parent.size:
        raise ValueError("children do not partition the parent")

    def sse(v):
        return np.square(v - v.mean()).sum()

    return sse(parent) - sse(left) - sse(right)


def logrank_statistic(left_times, left_status, right_times, right_status) -> float:
    """Two-group log-rank statistic: (O - E)^2 / V over distinct event times."""
    lt = np.asarray(left_times, dtype=np.float64)
    ls = np.asarray(left_status, dtype=np.int64)
    rt = np.asarray(right_times, dtype=np.float64)
    rs = np.asarray(right_status, dtype=np.int64)
    if lt.size == 0 or rt.size == 0:
        raise ValueError("both groups must be non-empty")
    all_times = np.concatenate([lt, rt])
    all_status = np.concatenate([ls, rs])
    event_times = np.unique(all_times[all_status == 1])
    if event_times.size == 0:
        return 0.0
    observed = expected = variance = 0.0
    for t in event_times:
        n1 = int((lt >= t).sum())
        n = n1 + int((rt >= t).sum())
        d1 = int(((lt == t) & (ls == 1)).sum())
        d = d1 + int(((rt == t) & (rs == 1)).sum())
        observed += d1
        expected += d * n1 / n
        if n > 1:
            variance += d * (n1 / n) * (1 - n1 / n) * (n - d) / (n - 1)
    if variance <= 0:
        return 0.0
    return (observed - expected) ** 2 / variance


# ---------------------------------------------------------------------------
# split search


@lru_cache(maxsize=None)
def _subset_masks(k: int) -> np.ndarray:
    """(2^k, k) inclusion matrix enumerating category subsets."""
    masks = np.arange(2**k)
    return ((masks[:, None] >> np.arange(k)) & 1).astype(np.float64)


@dataclass
class _Candidate:
    decrease: float
    rule: SplitRule


class _Grower:
    """Per-dataset split search state shared by all trees."""

    def __init__(self, dataset: Dataset, min_node_size: int = 1, s: int = 0):
        self.x = dataset.x
        self.kinds = dataset.kinds
        self.p = dataset.p
        self.min_node_size = min_node_size
        self.s = s
        o = dataset.outcome
        self.outcome = o
        if isinstance(o, Classification):
            self.mode = "classification"
            self.labels = o.labels
            self.n_classes = o.n_classes
        elif isinstance(o, Regression):
            self.mode = "regression"
            self.y = o.values
        else:
            self.mode = "survival"
            self.time = o.time
            self.status = o.status

    # -- node state -------------------------------------------------------

    def pure(self, idx: np.ndarray) -> bool:
        if self.mode == "classification":
            lab = self.labels[idx]
            return bool((lab == lab[0]).all())
        if self.mode == "regression":
            v = self.y[idx]
            return bool((v == v[0]).all())
        return int(self.status[idx].sum()) == 0

    def leaf_value(self, idx: np.ndarray):
        if self.mode == "classification":
            return np.bincount(self.labels[idx], minlength=self.n_classes)
        if self.mode == "regression":
            return float(self.y[idx].mean())
        return (int(self.status[idx].sum()), idx.size, float(self.time[idx].mean()))

    # -- ordered-feature scans -------------------------------------------

    def _scan_ordered(self, v: np.ndarray, idx: np.ndarray):
        """Best cut per column of v; returns (decrease, threshold) arrays."""
        m, n_feat = v.shape
        order = np.argsort(v, axis=0, kind="stable")
        sv = np.take_along_axis(v, order, axis=0)
        valid = sv[:-1] < sv[1:]
        if self.mode == "classification":
            dec = self._class_cut_decrease(self.labels[idx], order, m)
        elif self.mode == "regression":
            dec = self._reg_cut_decrease(self.y[idx], order, m)
        else:
            dec = self._surv_cut_decrease(self.time[idx], self.status[idx], order, m)
        dec = np.where(valid, dec, -np.inf)
        cols = np.arange(n_feat)
        cut = np.argmax(dec, axis=0)
        best = dec[cut, cols]
        thresholds = 0.5 * (sv[cut, cols] + sv[np.minimum(cut + 1, m - 1), cols])
        return best, thresholds

    def _class_cut_decrease(self, labels, order, m):
        k = np.arange(1, m)[:, None].astype(np.float64)
        total = np.bincount(labels, minlength=self.n_classes).astype(np.float64)
        ssl = 0.0
        ssr = 0.0
        for cl in range(self.n_classes):
            ind = (labels == cl).astype(np.float64)
            cum = np.cumsum(ind[order], axis=0)[:-1]
            ssl = ssl + cum * cum
            ssr = ssr + np.square(total[cl] - cum)
        return ssl / (k * m) + ssr / ((m - k) * m) - np.square(total).sum() / (m * m)

    def _reg_cut_decrease(self, y, order, m):
        k = np.arange(1, m)[:, None].astype(np.float64)
        tot = y.sum()
        cum = np.cumsum(y[order], axis=0)[:-1]
        return cum * cum / k + np.square(tot - cum) / (m - k) - tot * tot / m

    def _surv_cut_decrease(self, time, status, order, m):
        event_times = np.unique(time[status == 1])
        if event_times.size == 0:
            return np.full((m - 1, order.shape[1]), -np.inf)
        at_risk = (time[:, None] >= event_times[None, :]).astype(np.float64)
        death = ((time[:, None] == event_times[None, :]) & (status[:, None] == 1)).astype(np.float64)
        n_tot = at_risk.sum(axis=0)
        d_tot = death.sum(axis=0)
        out = np.empty((m - 1, order.shape[1]))
        for f in range(order.shape[1]):
            n1 = np.cumsum(at_risk[order[:, f]], axis=0)[:-1]
            d1 = np.cumsum(death[order[:, f]], axis=0)[:-1]
            out[:, f] = self._logrank_from_tables(n1, d1, n_tot, d_tot)
        return out

    @staticmethod
    def _logrank_from_tables(n1, d1, n_tot, d_tot):
        """Log-rank statistic per row of left-group at-risk/death tables."""
        frac = n1 / n_tot
        observed = d1.sum(axis=1)
        expected = (d_tot * frac).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            var_t = d_tot * frac * (1 - frac) * (n_tot - d_tot) / (n_tot - 1)
        var_t = np.where(n_tot > 1, var_t, 0.0)
        variance = var_t.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            stat = np.square(observed - expected) / variance
        return np.where(variance > 0, stat, 0.0)

    # -- categorical splits ----------------------------------------------

    def _cat_candidate(self, j: int, idx: np.ndarray) -> Optional[_Candidate]:
        vals = self.x[idx, j].astype(np.int64)
        cats = np.unique(vals)
        if cats.size < 2:
            return None
        if self.kinds[j].levels <= MAX_EXACT_CATEGORY_LEVELS:
            return self._cat_subset_split(j, idx, vals, cats)
        return self._cat_ordered_split(j, idx, vals, cats)

    def _cat_subset_split(self, j, idx, vals, cats):
        m = idx.size
        pos = np.searchsorted(cats, vals)
        masks = _subset_masks(cats.size - 1)
        if self.mode == "classification":
            counts = np.zeros((cats.size, self.n_classes))
            np.add.at(counts, (pos, self.labels[idx]), 1)
            left_counts = counts[0] + masks @ counts[1:]
            nl = left_counts.sum(axis=1)
            nr = m - nl
            ssl = np.square(left_counts).sum(axis=1)
            ssr = np.square(counts.sum(axis=0) - left_counts).sum(axis=1)
            sst = np.square(counts.sum(axis=0)).sum()
            with np.errstate(divide="ignore", invalid="ignore"):
                dec = ssl / (nl * m) + ssr / (nr * m) - sst / (m * m)
        elif self.mode == "regression":
            y = self.y[idx]
            sums = np.bincount(pos, weights=y, minlength=cats.size)
            ns = np.bincount(pos, minlength=cats.size).astype(np.float64)
            left_sum = sums[0] + masks @ sums[1:]
            nl = ns[0] + masks @ ns[1:]
            nr = m - nl
            tot = y.sum()
            with np.errstate(divide="ignore", invalid="ignore"):
                dec = np.square(left_sum) / nl + np.square(tot - left_sum) / nr - tot * tot / m
        else:
            time, status = self.time[idx], self.status[idx]
            event_times = np.unique(time[status == 1])
            if event_times.size == 0:
                return None
            at_risk_c = np.zeros((cats.size, event_times.size))
            death_c = np.zeros((cats.size, event_times.size))
            np.add.at(at_risk_c, pos, (time[:, None] >= event_times[None, :]).astype(np.float64))
            np.add.at(death_c, pos, ((time[:, None] == event_times[None, :]) & (status[:, None] == 1)).astype(np.float64))
            n1 = at_risk_c[0] + masks @ at_risk_c[1:]
            d1 = death_c[0] + masks @ death_c[1:]
            ns = np.bincount(pos, minlength=cats.size).astype(np.float64)
            nl = ns[0] + masks @ ns[1:]
            nr = m - nl
            dec = self._logrank_from_tables(n1, d1, at_risk_c.sum(axis=0), death_c.sum(axis=0))
        dec = np.where(nr > 0, dec, -np.inf)
        best = dec.max()
        if not np.isfinite(best):
            return None
        # lexicographically smallest left set among tied subsets
        tied = np.flatnonzero(dec == best)
        sets = []
        for row in tied:
            left = {int(cats[0])} | {int(cats[1 + b]) for b in np.flatnonzero(masks[row])}
            sets.append(tuple(sorted(left)))
        left_set = frozenset(min(sets))
        return _Candidate(float(best), SplitRule(j, left_set=left_set))

    def _cat_ordered_split(self, j, idx, vals, cats):
        """Many-level categorical: scan categories ordered by outcome mean."""
        pos = np.searchsorted(cats, vals)
        if self.mode == "classification":
            score = np.bincount(pos, weights=(self.labels[idx] == 1).astype(float), minlength=cats.size)
        elif self.mode == "regression":
            score = np.bincount(pos, weights=self.y[idx], minlength=cats.size)
        else:
            score = np.bincount(pos, weights=self.time[idx], minlength=cats.size)
        score = score / np.bincount(pos, minlength=cats.size)
        rank = np.argsort(score, kind="stable")
        cat_rank = np.empty(cats.size, dtype=np.int64)
        cat_rank[rank] = np.arange(cats.size)
        v = cat_rank[pos].astype(np.float64)[:, None]
        best, thr = self._scan_ordered(v, idx)
        if not np.isfinite(best[0]):
            return None
        left_set = frozenset(int(cats[c]) for c in rank[: int(np.floor(thr[0])) + 1])
        return _Candidate(float(best[0]), SplitRule(j, left_set=left_set))

    # -- combined search --------------------------------------------------

    def best_split(self, idx: np.ndarray, candidates: Sequence[int]):
        """Best rule over the candidate features, or None.

        Ties between features go to the earlier candidate in the order
        given (the grower passes candidates in randomly sampled order, so
        a fixed rule cannot systematically favour low-index columns).
        Within a feature, the lower threshold wins (first maximizing cut
        in sorted order).
        """
        candidates = np.asarray(candidates, dtype=np.int64)
        ordered = [j for j in candidates if self.kinds[j].is_ordered]
        best: Optional[_Candidate] = None
        per_feature = {}
        if ordered:
            v = self.x[np.ix_(idx, ordered)]
            dec, thr = self._scan_ordered(v, idx)
            for f_pos, j in enumerate(ordered):
                if np.isfinite(dec[f_pos]):
                    per_feature[j] = _Candidate(float(dec[f_pos]), SplitRule(j, threshold=float(thr[f_pos])))
        for j in candidates:
            if self.kinds[j].is_ordered:
                cand = per_feature.get(j)
            else:
                cand = self._cat_candidate(int(j), idx)
            if cand is not None and (best is None or cand.decrease > best.decrease):
                best = cand
        if best is None or best.decrease <= _EPS:
            return None
        return best

    def grow(self, idx: np.ndarray, depth: int, rng: np.random.Generator, mtry: int) -> TreeNode:
        node = TreeNode(node_size=idx.size, depth=depth)
        if idx.size > self.min_node_size and not self.pure(idx):
            cand = rng.choice(self.p, size=mtry, replace=False)
            found = self.best_split(idx, cand)
            if found is not None:
                left_mask = found.rule.goes_left(self.x[idx, found.rule.feature])
                node.rule = found.rule
                node.impurity_decrease = found.decrease
                if self.s > 0 and idx.size >= MIN_SURROGATE_NODE_SIZE:
                    node.surrogates = find_surrogates(
                        self.x, self.kinds, idx, left_mask, found.rule.feature, self.s, rng
                    )
                node.left = self.grow(idx[left_mask], depth + 1, rng, mtry)
                node.right = self.grow(idx[~left_mask], depth + 1, rng, mtry)
                return node
        node.leaf_value = self.leaf_value(idx)
        return node


def best_split(node_samples, candidate_features, dataset: Dataset):
    """Best (SplitRule, impurity_decrease) over the candidates, or None.

    Ties between features go to the lower feature index.
    """
    grower = _Grower(dataset)
    idx = np.asarray(node_samples, dtype=np.int64)
    found = grower.best_split(idx, np.sort(np.asarray(candidate_features, dtype=np.int64)))
    if found is None:
        return None
    return found.rule, found.decrease


# ---------------------------------------------------------------------------
# forest training and prediction


def train_forest(dataset: Dataset, params: ForestParams) -> Forest:
    """Grow ``params.ntree`` trees; deterministic in (dataset, params.seed)."""
    validate(dataset)
    params.check(dataset.p)
    grower = _Grower(dataset, params.min_node_size, params.s)
    n = dataset.n

    def build(t: int) -> Tree:
        rng = np.random.default_rng(np.random.SeedSequence((params.seed & _SEED_MASK, t)))
        inbag = np.sort(rng.integers(0, n, size=n))
        root = grower.grow(inbag, 0, rng, params.mtry)
        return Tree(root, inbag)

    if params.threads > 1:
        with ThreadPoolExecutor(max_workers=params.threads) as pool:
            trees = list(pool.map(build, range(params.ntree)))
    else:
        trees = [build(t) for t in range(params.ntree)]
    return Forest(trees, params, n_features=dataset.p, n_samples=n)


def _tree_apply(root: TreeNode, x: np.ndarray, rows: np.ndarray) -> List[Tuple[TreeNode, np.ndarray]]:
    """Route rows of x through the tree; yields (leaf, row indices) pairs."""
    out = []
    stack = [(root, rows)]
    while stack:
        node, r = stack.pop()
        if r.size == 0:
            continue
        if node.rule is None:
            out.append((node, r))
            continue
        left = node.rule.goes_left(x[r, node.rule.feature])
        stack.append((node.left, r[left]))
        stack.append((node.right, r[~left]))
    return out


def predict(forest: Forest, x: np.ndarray) -> np.ndarray:
    """Forest prediction for new rows: majority vote / mean over trees.

    Only classification and regression forests can predict; survival
    forests are used for relation and importance analysis only.
    """
    x = np.asarray(x, dtype=np.float64)
    rows = np.arange(x.shape[0])
    first_leaf = forest.trees[0].root
    while first_leaf.rule is not None:
        first_leaf = first_leaf.left
    if isinstance(first_leaf.leaf_value, np.ndarray):
        n_classes = first_leaf.leaf_value.shape[0]
        votes = np.zeros((x.shape[0], n_classes))
        for tree in forest.trees:
            for leaf, r in _tree_apply(tree.root, x, rows):
                votes[r, int(np.argmax(leaf.leaf_value))] += 1
        return np.argmax(votes, axis=1)
    if isinstance(first_leaf.leaf_value, float):
        pred = np.zeros(x.shape[0])
        for tree in forest.trees:
            for leaf, r in _tree_apply(tree.root, x, rows):
                pred[r] += leaf.leaf_value
        return pred / len(forest.trees)
    raise ValueError("prediction is not provided for survival forests")


def oob_error(forest: Forest, dataset: Dataset) -> float:
    """OOB misclassification rate / mean squared error of the forest."""
    o = dataset.outcome
    if isinstance(o, Survival):
        raise ValueError("OOB error is not provided for survival outcomes")
    n = dataset.n
    if isinstance(o, Classification):
        votes = np.zeros((n, o.n_classes))
    else:
        pred_sum = np.zeros(n)
        pred_cnt = np.zeros(n)
    for tree in forest.trees:
        oob_rows = np.flatnonzero(~tree.inbag_mask(n))
        for leaf, rows in _tree_apply(tree.root, dataset.x, oob_rows):
            if isinstance(o, Classification):
                votes[rows, int(np.argmax(leaf.leaf_value))] += 1
            else:
                pred_sum[rows] += leaf.leaf_value
                pred_cnt[rows] += 1
    if isinstance(o, Classification):
        covered = votes.sum(axis=1) > 0
        if not covered.any():
            raise ValueError("no sample was ever out-of-bag; cannot estimate OOB error")
        pred = np.argmax(votes[covered], axis=1)
        return float((pred != o.labels[covered]).mean())
    covered = pred_cnt > 0
    if not covered.any():
        raise ValueError("no sample was ever out-of-bag; cannot estimate OOB error")
    pred = pred_sum[covered] / pred_cnt[covered]
    return float(np.square(pred - o.values[covered]).mean())
