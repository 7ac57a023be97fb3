import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from processxai.dataset import DatasetError
from processxai.smote import SmoteConfig, nearest_neighbors, oversample, oversample_with_parents, synthesize

from conftest import make_ds


def brute_neighbors(P, q, k):
    d = [(float(np.sum((P[j] - P[q]) ** 2)), j) for j in range(len(P)) if j != q]
    return [j for _, j in sorted(d)[:k]]


def test_neighbors_on_a_line():
    assert nearest_neighbors([[0.0], [1.0], [10.0]], 0, 1).tolist() == [1]


def test_duplicate_point_first():
    P = [[5.0, 5.0], [1.0, 1.0], [0.0, 0.0], [0.0, 0.0]]
    assert nearest_neighbors(P, 2, 1).tolist() == [3]


def test_equidistant_lower_index_first():
    P = [[0.0], [1.0], [-1.0], [3.0]]
    assert nearest_neighbors(P, 0, 2).tolist() == [1, 2]


def test_neighbors_need_enough_points():
    with pytest.raises(ValueError):
        nearest_neighbors([[0.0], [1.0]], 0, 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 15), st.integers(1, 4))
def test_neighbors_match_brute_force(seed, n, d):
    rng = np.random.default_rng(seed)
    P = rng.integers(0, 4, size=(n, d)).astype(float)  # many ties
    k = int(rng.integers(1, n))
    q = int(rng.integers(0, n))
    assert nearest_neighbors(P, q, k).tolist() == brute_neighbors(P, q, k)


def test_synthesize_endpoints_and_midpoint():
    a, b = np.array([0.3, -2.0]), np.array([1.7, 4.0])
    assert np.array_equal(synthesize(a, b, 0.0), a)
    assert np.array_equal(synthesize(a, b, 1.0), b)
    assert synthesize([0, 0], [2, 4], 0.5).tolist() == [1.0, 2.0]
    with pytest.raises(ValueError):
        synthesize([0, 0], [1, 2, 3], 0.5)


def _imbalanced(rng, n_major, n_minor, d=4, minority=0):
    X = rng.normal(size=(n_major + n_minor, d))
    y = np.full(n_major + n_minor, 1 - minority)
    y[rng.permutation(n_major + n_minor)[:n_minor]] = minority
    return make_ds(X, y)


def test_balances_to_majority(rng):
    train = _imbalanced(rng, 3964, 31)
    out = oversample(train, SmoteConfig(k=5, seed=0))
    assert out.class_counts() == (3964, 3964)
    # originals untouched and first
    assert np.array_equal(out.features[: train.n_rows], train.features)


def test_target_equal_to_minority_is_identity(rng):
    train = _imbalanced(rng, 50, 8)
    out = oversample(train, SmoteConfig(target_count=8))
    assert out.equals(train)


def test_two_point_minority_on_segment():
    p, q = np.array([1.0, 2.0, 3.0]), np.array([4.0, -1.0, 0.5])
    X = np.vstack([np.zeros((10, 3)) + 50, p, q])
    train = make_ds(X, [1] * 10 + [0, 0])
    out = oversample(train, SmoteConfig(k=1, seed=3))
    new = out.features[12:]
    assert new.shape[0] == 8
    d = q - p
    for r in new:
        t = np.dot(r - p, d) / np.dot(d, d)
        assert -1e-12 <= t <= 1 + 1e-12
        assert np.linalg.norm(p + t * d - r) <= 1e-9


def test_too_few_minority_rows(rng):
    train = _imbalanced(rng, 20, 3)
    with pytest.raises(DatasetError):
        oversample(train, SmoteConfig(k=5))


def test_target_below_minority_rejected(rng):
    with pytest.raises(ValueError):
        oversample(_imbalanced(rng, 20, 8), SmoteConfig(target_count=3))


def test_minority_may_be_label_one(rng):
    train = _imbalanced(rng, 40, 10, minority=1)
    out = oversample(train, SmoteConfig(k=3))
    assert out.class_counts() == (40, 40)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(6, 25), st.integers(1, 5), st.booleans())
def test_convex_parents_property(seed, n_minor, k, standardize):
    rng = np.random.default_rng(seed)
    train = _imbalanced(rng, n_minor + int(rng.integers(1, 60)), n_minor, d=3)
    cfg = SmoteConfig(k=min(k, n_minor - 1), seed=seed, standardize=standardize)
    out, parents = oversample_with_parents(train, cfg)
    assert out.class_counts()[0] == out.class_counts()[1]
    new = out.features[train.n_rows :]
    assert new.shape[0] == parents.shape[0]
    # parents are minority rows only
    assert np.all(train.target[parents] == 0)
    a, b = train.features[parents[:, 0]], train.features[parents[:, 1]]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    assert np.all(new >= lo - 1e-9) and np.all(new <= hi + 1e-9)
    # neighbour really is among the k nearest minority rows of the base row
    minority = np.flatnonzero(train.target == 0)
    P = train.features[minority]
    if standardize:
        sd = P.std(axis=0)
        sd[sd == 0] = 1
        P = (P - P.mean(axis=0)) / sd
    pos = {r: i for i, r in enumerate(minority)}
    for base, other in parents[:10]:
        assert pos[other] in brute_neighbors(P, pos[base], cfg.k)


def test_deterministic(rng):
    train = _imbalanced(rng, 100, 12)
    a = oversample(train, SmoteConfig(seed=9))
    b = oversample(train, SmoteConfig(seed=9))
    assert a.equals(b)
    assert not a.equals(oversample(train, SmoteConfig(seed=10)))
