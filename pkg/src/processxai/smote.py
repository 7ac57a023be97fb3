"""SMOTE oversampling of the minority (defective) class."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DatasetError, ProcessDataset


@dataclass(frozen=True)
class SmoteConfig:
    k: int = 5
    target_count: int | None = None  # None -> majority class size
    seed: int = 0
    standardize: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("smote k must be >= 1")


def nearest_neighbors(points, query_index: int, k: int) -> np.ndarray:
    """Indices of the ``k`` points closest to ``points[query_index]``.

    Euclidean distance; the query itself is excluded and distance ties go
    to the lower index.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    n = P.shape[0]
    if k >= n:
        raise ValueError(f"k={k} needs at least {k + 1} points, got {n}")
    d = np.sum((P - P[query_index]) ** 2, axis=1)
    others = np.delete(np.arange(n), query_index)
    order = np.argsort(d[others], kind="stable")
    return others[order[:k]]


def _all_neighbors(P: np.ndarray, k: int) -> np.ndarray:
    n = P.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        out[i] = nearest_neighbors(P, i, k)
    return out


def synthesize(x_i, x_k, w: float) -> np.ndarray:
    """Point on the segment from ``x_i`` towards ``x_k`` at fraction ``w``."""
    a = np.asarray(x_i, dtype=float)
    b = np.asarray(x_k, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a + w * (b - a)


def oversample(train: ProcessDataset, cfg: SmoteConfig = SmoteConfig()) -> ProcessDataset:
    """Append synthetic minority rows until the minority reaches ``target_count``.

    Original rows are kept unchanged and come first. Each synthetic row picks
    a minority row uniformly (with replacement), one of its ``k`` nearest
    minority neighbours uniformly, and a uniform weight in [0, 1).
    """
    return oversample_with_parents(train, cfg)[0]


def oversample_with_parents(train: ProcessDataset, cfg: SmoteConfig = SmoteConfig()):
    """:func:`oversample`, also returning the ``(base, neighbour)`` row indices
    into ``train`` that produced each synthetic row."""
    y = train.target
    n_pos = int(np.sum(y == 1))
    n_neg = train.n_rows - n_pos
    minority_label = 0 if n_neg <= n_pos else 1
    minority_rows = np.flatnonzero(y == minority_label)
    m = minority_rows.size
    target = max(n_pos, n_neg) if cfg.target_count is None else int(cfg.target_count)
    if target < m:
        raise ValueError(f"target_count {target} is below the minority count {m}")
    n_new = target - m
    if n_new == 0:
        return train, np.empty((0, 2), dtype=np.int64)
    if m < 2 or m < cfg.k + 1:
        raise DatasetError(
            f"minority class has {m} rows; k={cfg.k} needs at least {cfg.k + 1}"
        )

    P = train.features[minority_rows]
    Q = P
    if cfg.standardize:
        sd = P.std(axis=0)
        sd[sd == 0] = 1.0
        Q = (P - P.mean(axis=0)) / sd
    nbrs = _all_neighbors(Q, cfg.k)

    rng = np.random.default_rng(cfg.seed)
    base = rng.integers(0, m, size=n_new)
    pick = rng.integers(0, cfg.k, size=n_new)
    w = rng.random(n_new)
    other = nbrs[base, pick]
    synth = P[base] + w[:, None] * (P[other] - P[base])

    X = np.vstack([train.features, synth])
    labels = np.concatenate([y, np.full(n_new, minority_label, dtype=np.int64)])
    parents = np.stack([minority_rows[base], minority_rows[other]], axis=1)
    return ProcessDataset(X, train.feature_names, labels, train.target_name), parents
