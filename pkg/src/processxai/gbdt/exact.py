"""Exact-greedy second-order boosting with level-wise tree growth."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..dataset import ProcessDataset
from .ensemble import EXACT_GREEDY, BoostedEnsemble, check_trainable
from .loss import init_base_score, logistic_grad_hess
from .tree import TreeBuilder


class Split(NamedTuple):
    feature: int
    threshold: float
    gain: float


@dataclass(frozen=True)
class ExactGreedyParams:
    n_trees: int = 100
    max_depth: int = 6
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0

    def __post_init__(self):
        if self.n_trees < 0 or self.max_depth < 0:
            raise ValueError("n_trees and max_depth must be non-negative")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.reg_lambda < 0 or self.min_child_weight < 0:
            raise ValueError("reg_lambda and min_child_weight must be non-negative")


def leaf_weight(G: float, H: float, reg_lambda: float) -> float:
    """Optimal leaf value ``-G / (H + lambda)`` of the second-order objective."""
    denom = H + reg_lambda
    if denom == 0:
        raise ZeroDivisionError("leaf weight undefined: H + lambda == 0")
    return -G / denom


def leaf_weight_rows(rows, g, h, reg_lambda: float) -> float:
    rows = np.asarray(rows)
    return leaf_weight(float(np.sum(g[rows])), float(np.sum(h[rows])), reg_lambda)


def _midpoints(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    mid = 0.5 * (lo + hi)
    # adjacent floats: the midpoint may round up onto hi, which would send hi left
    return np.where(mid < hi, mid, lo)


def _presort(XT: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """(n_features, n_rows) row indices, each feature's rows in ascending
    value order, ties by row index."""
    out = np.empty((XT.shape[0], rows.size), dtype=np.int64)
    for f in range(XT.shape[0]):
        out[f] = rows[np.argsort(XT[f, rows], kind="stable")]
    return out


def _first_best(score: np.ndarray) -> int:
    """Flat index of the best candidate. Scores within a relative 1e-12 of the
    maximum count as ties (mirror-image partitions reached through different
    features differ only by summation rounding); ties resolve row-major, i.e.
    lowest feature first, then lowest threshold."""
    top = np.max(score)
    return int(np.argmax(score >= top - 1e-12 * max(1.0, abs(top))))


def _scan_exact(XT, sorted_idx, g, h, G, H, reg_lambda, gamma, min_child_weight):
    vals = np.take_along_axis(XT, sorted_idx, axis=1)
    GL = np.cumsum(g[sorted_idx], axis=1)[:, :-1]
    HL = np.cumsum(h[sorted_idx], axis=1)[:, :-1]
    GR = G - GL
    HR = H - HL
    valid = vals[:, 1:] > vals[:, :-1]
    if min_child_weight > 0:
        valid &= (HL >= min_child_weight) & (HR >= min_child_weight)
    dl = HL + reg_lambda
    dr = HR + reg_lambda
    valid &= (dl > 0) & (dr > 0)
    if not valid.any():
        return None
    parent = G * G / (H + reg_lambda) if H + reg_lambda > 0 else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = 0.5 * (GL * GL / dl + GR * GR / dr - parent) - gamma
    gain = np.where(valid, gain, -np.inf)
    best = _first_best(gain)
    f, pos = divmod(best, gain.shape[1])
    if not gain[f, pos] > 0:
        return None
    thr = float(_midpoints(vals[f, pos : pos + 1], vals[f, pos + 1 : pos + 2])[0])
    return Split(f, thr, float(gain[f, pos]))


def best_split_exact(rows, g, h, features, reg_lambda=1.0, gamma=0.0, min_child_weight=0.0):
    """Best ``value <= threshold`` split of ``rows`` over all features.

    Candidate thresholds are midpoints of consecutive distinct values. Gain is
    ``0.5 * (GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)) - gamma``. Returns ``None``
    when no candidate has positive gain.
    """
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("empty row set")
    if reg_lambda < 0:
        raise ValueError("reg_lambda must be non-negative")
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    XT = np.ascontiguousarray(np.asarray(features, dtype=float).T)
    G = float(np.sum(g[rows]))
    H = float(np.sum(h[rows]))
    return _scan_exact(XT, _presort(XT, rows), g, h, G, H, reg_lambda, gamma, min_child_weight)


def grow_tree_exact(X, g, h, params: ExactGreedyParams, XT=None, root_sorted=None):
    """Grow one tree to ``max_depth``; every node is split independently, so
    depth-first construction yields the level-wise tree."""
    XT = np.ascontiguousarray(X.T) if XT is None else XT
    n = X.shape[0]
    if root_sorted is None:
        root_sorted = _presort(XT, np.arange(n))
    b = TreeBuilder()
    lam = params.reg_lambda
    mask = np.zeros(n, dtype=bool)

    def grow(node, sorted_idx, depth):
        rows = sorted_idx[0]
        G = float(np.sum(g[rows]))
        H = float(np.sum(h[rows]))
        split = None
        if depth < params.max_depth and rows.size >= 2:
            split = _scan_exact(
                XT, sorted_idx, g, h, G, H, lam, params.gamma, params.min_child_weight
            )
        if split is None:
            b.set_leaf(node, -G / (H + lam) if H + lam > 0 else 0.0)
            return
        mask[rows] = XT[split.feature, rows] <= split.threshold
        go_left = mask[sorted_idx]
        mask[rows] = False
        left_sorted = sorted_idx[go_left].reshape(sorted_idx.shape[0], -1)
        right_sorted = sorted_idx[~go_left].reshape(sorted_idx.shape[0], -1)
        left, right = b.add(), b.add()
        b.set_split(node, split.feature, split.threshold, left, right)
        grow(left, left_sorted, depth + 1)
        grow(right, right_sorted, depth + 1)

    grow(b.add(), root_sorted, 0)
    return b.build()


def train_exact_greedy(
    train: ProcessDataset, params: ExactGreedyParams = ExactGreedyParams(), callback=None
) -> BoostedEnsemble:
    """Boost ``params.n_trees`` exact-greedy trees on the logistic loss.

    ``callback(m, raw)`` is called after each tree with the current raw scores.
    """
    check_trainable(train)
    X, y = train.features, train.target
    base = init_base_score(y)
    XT = np.ascontiguousarray(X.T)
    root_sorted = _presort(XT, np.arange(X.shape[0]))
    acc = np.zeros(X.shape[0])
    trees = []
    for m in range(params.n_trees):
        raw = base + params.learning_rate * acc
        g, h = logistic_grad_hess(y, raw)
        tree = grow_tree_exact(X, g, h, params, XT, root_sorted)
        trees.append(tree)
        acc += tree.predict(X)
        if callback is not None:
            callback(m, base + params.learning_rate * acc)
    return BoostedEnsemble(
        base, trees, params.learning_rate, EXACT_GREEDY, train.feature_names
    )
