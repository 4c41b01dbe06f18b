"""Surrogate search, adjusted agreement and the relation matrix."""

from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mutualforest import (
    Classification,
    Dataset,
    ForestParams,
    SplitRule,
    adjusted_agreement,
    categorical,
    continuous,
    find_surrogates,
    train_forest,
)
from mutualforest.forest import Forest, Tree, TreeNode
from mutualforest.surrogates import (
    MIN_SURROGATE_NODE_SIZE,
    SurrogateSplit,
    mean_adjusted_agreement,
    relation_threshold_select,
)

from conftest import make_classification, make_mixed


# ---------------------------------------------------------------------------
# adjusted agreement


def test_adjusted_agreement_endpoints():
    # perfect surrogate and majority-rule surrogate
    assert adjusted_agreement(10, 6, 10) == 1.0
    assert adjusted_agreement(6, 6, 10) == 0.0
    assert adjusted_agreement(4, 6, 10) == pytest.approx(-0.5)


def test_adjusted_agreement_validation():
    with pytest.raises(ValueError):
        adjusted_agreement(11, 6, 10)
    with pytest.raises(ValueError):
        adjusted_agreement(5, 10, 10)  # one-sided primary split
    with pytest.raises(ValueError):
        adjusted_agreement(5, 3, 10)  # n_maj below half


@given(st.integers(2, 60), st.data())
def test_adjusted_agreement_range(n_total, data):
    n_maj = data.draw(st.integers((n_total + 1) // 2, n_total - 1))
    n_surr = data.draw(st.integers(0, n_total))
    adj = adjusted_agreement(n_surr, n_maj, n_total)
    assert adj <= 1.0
    assert adj == pytest.approx((n_surr - n_maj) / (n_total - n_maj))


# ---------------------------------------------------------------------------
# surrogate search against a counting reference


def ref_agreement(col, kind_ordered, left_mask):
    """Best achievable agreement count for one feature, both orientations."""
    m = left_mask.size
    best = -1
    best_rule = None
    if kind_ordered:
        levels = np.unique(col)
        cuts = [0.5 * (a + b) for a, b in zip(levels[:-1], levels[1:])]
        for thr in cuts:
            side = col <= thr
            for flip in (False, True):
                match = int((side != left_mask).sum() if flip else (side == left_mask).sum())
                if match > best:
                    best, best_rule = match, (thr, flip)
    else:
        present = sorted(int(v) for v in np.unique(col))
        for k in range(len(present) + 1):
            for subset in combinations(present, k):
                side = np.isin(col, subset)
                match = int((side == left_mask).sum())
                if match > best:
                    best, best_rule = match, (frozenset(subset), False)
    return best, best_rule


def test_find_surrogates_matches_counting_reference(rng):
    ds = make_mixed(n=60, seed=5)
    kinds = ds.kinds
    for trial in range(60):
        idx = np.sort(rng.choice(ds.n, size=int(rng.integers(12, 40)), replace=True))
        primary = int(rng.integers(0, ds.p))
        col = ds.x[idx, primary]
        if kinds[primary].is_ordered:
            thr = float(np.median(col))
            left_mask = col <= thr
        else:
            left_mask = np.isin(col, [0.0, 2.0])
        n_left = int(left_mask.sum())
        if n_left == 0 or n_left == idx.size:
            continue
        n_maj = max(n_left, idx.size - n_left)
        got = find_surrogates(ds.x, kinds, idx, left_mask, primary, s=ds.p)
        by_feature = {sg.feature: sg for sg in got}
        assert primary not in by_feature
        for j in range(ds.p):
            if j == primary:
                continue
            best, _ = ref_agreement(ds.x[idx, j], kinds[j].is_ordered, left_mask)
            adj = (best - n_maj) / (idx.size - n_maj)
            if adj > 0:
                assert j in by_feature
                assert by_feature[j].adj == pytest.approx(adj, abs=1e-12)
            else:
                assert j not in by_feature


def test_find_surrogates_ranked_and_truncated(rng):
    ds = make_classification(n=80, p=6, seed=4)
    idx = np.arange(ds.n)
    left_mask = ds.x[idx, 0] <= 0.0
    got = find_surrogates(ds.x, ds.kinds, idx, left_mask, 0, s=3)
    assert len(got) <= 3
    adjs = [sg.adj for sg in got]
    assert adjs == sorted(adjs, reverse=True)
    assert all(a > 0 for a in adjs)


def test_find_surrogates_tie_break_lower_index_without_rng():
    # duplicated columns: identical agreement, the lower index must come first
    rng = np.random.default_rng(0)
    col = rng.standard_normal(40)
    x = np.column_stack([col, col + 1.0, col + 1.0])
    kinds = [continuous()] * 3
    idx = np.arange(40)
    left_mask = col <= 0.0
    got = find_surrogates(x, kinds, idx, left_mask, 0, s=2)
    assert [sg.feature for sg in got] == [1, 2]
    assert got[0].adj == got[1].adj == 1.0


def test_find_surrogates_empty_cases():
    x = np.zeros((10, 2))
    kinds = [continuous()] * 2
    idx = np.arange(10)
    assert find_surrogates(x, kinds, idx, np.ones(10, bool), 0, s=2) == []
    assert find_surrogates(x, kinds, idx, np.zeros(10, bool), 0, s=0) == []


def test_flip_orientation_recorded():
    col = np.linspace(0, 1, 20)
    x = np.column_stack([col, -col])
    kinds = [continuous()] * 2
    left_mask = col <= 0.5
    got = find_surrogates(x, kinds, np.arange(20), left_mask, 0, s=1)
    assert got[0].feature == 1
    assert got[0].flip
    assert got[0].adj == 1.0


# ---------------------------------------------------------------------------
# mean adjusted agreement


def leaf(size, depth):
    return TreeNode(node_size=size, depth=depth, leaf_value=0.0)


def random_synthetic_forest(rng, p, n_trees):
    """Hand-built trees with arbitrary surrogate lists, no training involved."""
    trees = []
    for _ in range(n_trees):
        n_internal = int(rng.integers(1, 6))
        root = None
        nodes = []
        for d in range(n_internal):
            feature = int(rng.integers(0, p))
            node = TreeNode(node_size=int(rng.integers(2, 50)), depth=d)
            node.rule = SplitRule(feature, threshold=float(rng.standard_normal()))
            partners = rng.permutation(p)[: int(rng.integers(0, p))]
            node.surrogates = [
                SurrogateSplit(int(j), SplitRule(int(j), threshold=0.0), float(rng.random()))
                for j in partners
                if j != feature
            ]
            node.left = leaf(1, d + 1)
            nodes.append(node)
            if root is None:
                root = node
            else:
                nodes[d - 1].right = node
        nodes[-1].right = leaf(1, n_internal)
        trees.append(Tree(root, inbag=np.zeros(1, dtype=np.int64)))
    params = ForestParams(ntree=n_trees, mtry=1)
    return Forest(trees, params, n_features=p, n_samples=1)


def test_mean_adjusted_agreement_matches_dict_accumulation(rng):
    for trial in range(1000):
        p = int(rng.integers(2, 6))
        forest = random_synthetic_forest(rng, p, n_trees=int(rng.integers(1, 4)))
        rel = mean_adjusted_agreement(forest, p)
        sums = {}
        counts = {}
        for tree in forest.trees:
            stack = [tree.root]
            while stack:
                node = stack.pop()
                if node.rule is None:
                    continue
                i = node.rule.feature
                counts[i] = counts.get(i, 0) + 1
                for sg in node.surrogates:
                    sums[(i, sg.feature)] = sums.get((i, sg.feature), 0.0) + sg.adj
                stack.extend([node.left, node.right])
        for i in range(p):
            for j in range(p):
                expect = sums.get((i, j), 0.0) / counts[i] if i in counts else 0.0
                assert rel.m[i, j] == pytest.approx(expect, abs=1e-12)
        for i in range(p):
            assert rel.primary_node_counts[i] == counts.get(i, 0)


def test_trained_forest_surrogate_adjs_reproducible():
    """Re-derive every stored surrogate agreement by re-routing the samples."""
    ds = make_classification(n=120, p=5, seed=8)
    forest = train_forest(ds, ForestParams(ntree=5, mtry=3, s=4, seed=3))
    checked = 0
    for tree in forest.trees:
        stack = [(tree.root, tree.inbag)]
        while stack:
            node, idx = stack.pop()
            if node.rule is None:
                continue
            left_mask = node.rule.goes_left(ds.x[idx, node.rule.feature])
            n_left = int(left_mask.sum())
            n_maj = max(n_left, idx.size - n_left)
            for sg in node.surrogates:
                side = sg.rule.goes_left(ds.x[idx, sg.feature])
                if sg.flip:
                    side = ~side
                n_surr = int((side == left_mask).sum())
                assert sg.adj == pytest.approx(
                    (n_surr - n_maj) / (idx.size - n_maj), abs=1e-12
                )
                checked += 1
            stack.append((node.left, idx[left_mask]))
            stack.append((node.right, idx[~left_mask]))
    assert checked > 50


def test_small_nodes_store_no_surrogates():
    ds = make_classification(n=100, p=5, seed=8)
    forest = train_forest(ds, ForestParams(ntree=10, mtry=3, s=3, seed=1))
    small_internal = 0
    for _, node in forest.internal_nodes():
        if node.node_size < MIN_SURROGATE_NODE_SIZE:
            assert node.surrogates == []
            small_internal += 1
    assert small_internal > 0  # the gate is actually exercised


def test_relation_threshold_select():
    rel = mean_adjusted_agreement(
        random_synthetic_forest(np.random.default_rng(0), 4, 3), 4
    )
    for i in range(4):
        chosen = relation_threshold_select(rel, i, t=1.0)
        others = [j for j in range(4) if j != i]
        mean = np.mean([rel.m[i, j] for j in others])
        assert chosen == {j for j in others if rel.m[i, j] > mean}
    with pytest.raises(ValueError):
        relation_threshold_select(rel, 0, t=0.0)
