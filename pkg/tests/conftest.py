"""Shared dataset builders for the test suite."""

import numpy as np
import pytest

from mutualforest import (
    Classification,
    Dataset,
    Regression,
    Survival,
    categorical,
    continuous,
    genotype,
)


def make_classification(n=60, p=5, seed=0, informative=True):
    """Binary classification data; the first feature carries signal."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    if informative:
        labels = (x[:, 0] + 0.5 * rng.standard_normal(n) > 0).astype(np.int64)
    else:
        labels = rng.integers(0, 2, size=n)
    kinds = [continuous() for _ in range(p)]
    names = [f"X{j + 1}" for j in range(p)]
    return Dataset(x, kinds, names, Classification(labels, 2))


def make_regression(n=60, p=5, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    y = x[:, 0] - x[:, 1] + 0.3 * rng.standard_normal(n)
    kinds = [continuous() for _ in range(p)]
    names = [f"X{j + 1}" for j in range(p)]
    return Dataset(x, kinds, names, Regression(y))


def make_survival(n=60, p=4, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    event = rng.exponential(2.0, size=n) * np.exp(-0.8 * x[:, 0])
    censor = rng.exponential(6.0, size=n)
    time = np.minimum(event, censor)
    status = (event <= censor).astype(np.int64)
    kinds = [continuous() for _ in range(p)]
    names = [f"X{j + 1}" for j in range(p)]
    return Dataset(x, kinds, names, Survival(time, status))


def make_mixed(n=80, seed=0):
    """Continuous + categorical + genotype columns with a weak signal."""
    rng = np.random.default_rng(seed)
    cont = rng.standard_normal(n)
    cat = rng.integers(0, 4, size=n).astype(float)
    geno = rng.binomial(2, 0.3, size=n).astype(float)
    labels = ((cont + 0.3 * geno + 0.4 * rng.standard_normal(n)) > 0).astype(np.int64)
    x = np.column_stack([cont, cat, geno])
    kinds = [continuous(), categorical(4), genotype()]
    return Dataset(x, kinds, ["c", "k", "g"], Classification(labels, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
