"""Dataset, outcome and hyperparameter validation."""

import numpy as np
import pytest

from mutualforest import (
    Classification,
    Dataset,
    DatasetValidationError,
    FeatureKind,
    ForestParams,
    Regression,
    Survival,
    categorical,
    continuous,
    genotype,
    validate,
)
from mutualforest.data_model import collect_violations

from conftest import make_classification


def test_feature_kind_rejects_unknown():
    with pytest.raises(ValueError):
        FeatureKind("ordinal")


def test_categorical_needs_two_levels():
    with pytest.raises(ValueError):
        categorical(1)
    assert categorical(2).levels == 2


def test_is_ordered():
    assert continuous().is_ordered
    assert genotype().is_ordered
    assert not categorical(3).is_ordered


def test_dataset_properties():
    ds = make_classification(n=30, p=4)
    assert ds.n == 30
    assert ds.p == 4
    assert ds.outcome_length() == 30
    np.testing.assert_array_equal(ds.column(2), ds.x[:, 2])
    assert ds.x.dtype == np.float64


def test_validate_accepts_clean_data():
    validate(make_classification())


def test_non_finite_feature_flagged():
    ds = make_classification(n=20, p=3)
    ds.x[4, 1] = np.nan
    violations = collect_violations(ds)
    assert any(v.feature == 1 and v.row == 4 for v in violations)
    with pytest.raises(DatasetValidationError):
        validate(ds)


def test_category_level_out_of_range():
    rng = np.random.default_rng(0)
    x = np.column_stack([rng.integers(0, 3, 20).astype(float)])
    x[7, 0] = 5.0
    ds = Dataset(x, [categorical(3)], ["k"], Classification(rng.integers(0, 2, 20), 2))
    violations = collect_violations(ds)
    assert any(v.feature == 0 and v.row == 7 for v in violations)


def test_genotype_values_restricted():
    rng = np.random.default_rng(1)
    x = rng.binomial(2, 0.4, size=(15, 1)).astype(float)
    x[3, 0] = 1.5
    ds = Dataset(x, [genotype()], ["g"], Regression(rng.standard_normal(15)))
    violations = collect_violations(ds)
    assert any("genotype" in v.message for v in violations)


def test_outcome_length_mismatch():
    ds = Dataset(
        np.zeros((5, 1)), [continuous()], ["a"], Regression(np.zeros(4))
    )
    assert any("outcome length" in v.message for v in collect_violations(ds))


def test_class_labels_checked():
    labels = np.array([0, 1, 2, 0, 1])
    ds = Dataset(np.zeros((5, 1)), [continuous()], ["a"], Classification(labels, 2))
    assert any("class label" in v.message for v in collect_violations(ds))


def test_survival_invariants():
    time = np.array([1.0, 0.0, 2.0])
    status = np.array([1, 0, 2])
    ds = Dataset(np.zeros((3, 1)), [continuous()], ["a"], Survival(time, status))
    messages = [v.message for v in collect_violations(ds)]
    assert any("non-positive survival time" in m for m in messages)
    assert any("status" in m for m in messages)


def test_violation_messages_are_indexed():
    ds = make_classification(n=10, p=2)
    ds.x[0, 0] = np.inf
    err = None
    try:
        validate(ds)
    except DatasetValidationError as exc:
        err = exc
    assert err is not None
    assert "feature 0" in str(err)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"ntree": 0, "mtry": 1},
        {"ntree": 10, "mtry": 0},
        {"ntree": 10, "mtry": 6},
        {"ntree": 10, "mtry": 2, "min_node_size": 0},
        {"ntree": 10, "mtry": 2, "s": -1},
        {"ntree": 10, "mtry": 2, "threads": 0},
    ],
)
def test_forest_params_check_rejects(kwargs):
    with pytest.raises(ValueError):
        ForestParams(**kwargs).check(5)


def test_forest_params_check_accepts():
    ForestParams(ntree=10, mtry=5, s=3).check(5)
