"""Leaf-wise boosting on gradient-based one-side samples (GOSS)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..dataset import ProcessDataset
from .ensemble import GOSS_LEAFWISE, BoostedEnsemble, check_trainable
from .exact import Split, _first_best, _midpoints, _presort
from .loss import init_base_score, logistic_grad_hess
from .tree import TreeBuilder


@dataclass(frozen=True)
class GossParams:
    n_trees: int = 100
    max_leaves: int = 31
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    a: float = 0.2
    b: float = 0.1
    seed: int = 0
    min_data_in_leaf: int = 20
    min_child_weight: float = 1e-3

    def __post_init__(self):
        if self.n_trees < 0:
            raise ValueError("n_trees must be non-negative")
        if self.max_leaves < 1:
            raise ValueError("max_leaves must be at least 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        _check_ratios(self.a, self.b)


def _check_ratios(a, b):
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    if not b > 0:
        raise ValueError("b must be positive")
    if Fraction(str(a)) + Fraction(str(b)) > 1:
        raise ValueError(f"a + b must not exceed 1 (a={a}, b={b})")


def _ceil_fraction(ratio: float, n: int) -> int:
    # decimal reading of the ratio, so 0.3 * 10 is exactly 3
    return math.ceil(Fraction(str(ratio)) * n)


@dataclass(frozen=True)
class GossSample:
    top: np.ndarray  # A: largest |g|
    rest: np.ndarray  # B: uniform sample of the remainder
    multiplier: float  # (1 - a) / b, applied to B rows

    @property
    def rows(self) -> np.ndarray:
        return np.sort(np.concatenate([self.top, self.rest]))

    def weights(self, n: int) -> np.ndarray:
        """Per-row weight over all ``n`` rows: 1 in A, multiplier in B, 0 otherwise."""
        w = np.zeros(n)
        w[self.top] = 1.0
        w[self.rest] = self.multiplier
        return w


def goss_sample(g, a: float, b: float, seed=0) -> GossSample:
    """Keep the ``ceil(a*N)`` rows with largest ``|g|`` (ties to the lower
    index) and draw ``ceil(b*N)`` of the others uniformly without replacement.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    _check_ratios(a, b)
    g = np.asarray(g, dtype=float)
    n = g.size
    n_top = _ceil_fraction(a, n)
    if n_top >= n:
        raise ValueError(f"a={a} keeps all {n} rows; nothing left to sample")
    n_rand = min(_ceil_fraction(b, n), n - n_top)
    order = np.argsort(-np.abs(g), kind="stable")
    top = np.sort(order[:n_top])
    rng = np.random.default_rng(seed)
    rest = np.sort(rng.choice(order[n_top:], size=n_rand, replace=False))
    return GossSample(top, rest, (1.0 - a) / b)


def goss_split_gain(g, from_rest, go_left, multiplier: float):
    """Variance gain of one candidate split on the sampled rows.

    Per side, the gradient sum is ``sum_A g + multiplier * sum_B g`` and the
    size is the matching amplified count; the result is
    ``(S_l^2 / n_l + S_r^2 / n_r) / n``. Returns ``None`` when a side is empty.
    """
    g = np.asarray(g, dtype=float)
    from_rest = np.asarray(from_rest, dtype=bool)
    go_left = np.asarray(go_left, dtype=bool)
    if not go_left.any() or go_left.all():
        return None
    w = np.where(from_rest, multiplier, 1.0)
    sl = np.sum(g[go_left & ~from_rest]) + multiplier * np.sum(g[go_left & from_rest])
    sr = np.sum(g[~go_left & ~from_rest]) + multiplier * np.sum(g[~go_left & from_rest])
    nl = np.sum(w[go_left])
    nr = np.sum(w[~go_left])
    return float((sl * sl / nl + sr * sr / nr) / (nl + nr))


def _scan_goss(XT, sorted_idx, wg, w, h_w, params: GossParams):
    """Best split by the reduction ``S_l^2/n_l + S_r^2/n_r - S^2/n``."""
    rows = sorted_idx[0]
    S = float(np.sum(wg[rows]))
    N = float(np.sum(w[rows]))
    H = float(np.sum(h_w[rows]))
    vals = np.take_along_axis(XT, sorted_idx, axis=1)
    SL = np.cumsum(wg[sorted_idx], axis=1)[:, :-1]
    NL = np.cumsum(w[sorted_idx], axis=1)[:, :-1]
    HL = np.cumsum(h_w[sorted_idx], axis=1)[:, :-1]
    cnt = np.arange(1, rows.size)
    valid = vals[:, 1:] > vals[:, :-1]
    valid &= (cnt >= params.min_data_in_leaf) & (rows.size - cnt >= params.min_data_in_leaf)
    valid &= (HL >= params.min_child_weight) & (H - HL >= params.min_child_weight)
    if not valid.any():
        return None
    SR, NR = S - SL, N - NL
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = SL * SL / NL + SR * SR / NR - S * S / N
    delta = np.where(valid, delta, -np.inf)
    f, pos = divmod(_first_best(delta), delta.shape[1])
    if not delta[f, pos] > 1e-12:
        return None
    thr = float(_midpoints(vals[f, pos : pos + 1], vals[f, pos + 1 : pos + 2])[0])
    return Split(f, thr, float(delta[f, pos]))


def grow_tree_leafwise(X, g, h, sample: GossSample, params: GossParams, XT=None):
    """Grow one tree on the GOSS sample, always splitting the leaf whose best
    split reduces the loss most (ties: leftmost leaf)."""
    XT = np.ascontiguousarray(X.T) if XT is None else XT
    n = X.shape[0]
    w = sample.weights(n)
    wg, wh = w * g, w * h
    rows = sample.rows
    b = TreeBuilder()
    mask = np.zeros(n, dtype=bool)

    def leaf(node, sorted_idx, path):
        s = sorted_idx
        split = None
        if s.shape[1] >= 2:
            split = _scan_goss(XT, s, wg, w, wh, params)
        return {"node": node, "sorted": s, "path": path, "split": split}

    leaves = [leaf(b.add(), _presort(XT, rows), ())]
    while len(leaves) < params.max_leaves:
        cands = [lf for lf in leaves if lf["split"] is not None]
        if not cands:
            break
        best = min(cands, key=lambda lf: (-lf["split"].gain, lf["path"]))
        leaves.remove(best)
        s, split = best["sorted"], best["split"]
        r = s[0]
        mask[r] = XT[split.feature, r] <= split.threshold
        go_left = mask[s]
        mask[r] = False
        left, right = b.add(), b.add()
        b.set_split(best["node"], split.feature, split.threshold, left, right)
        leaves.append(leaf(left, s[go_left].reshape(s.shape[0], -1), best["path"] + (0,)))
        leaves.append(leaf(right, s[~go_left].reshape(s.shape[0], -1), best["path"] + (1,)))

    for lf in leaves:
        r = lf["sorted"][0]
        G, H = float(np.sum(wg[r])), float(np.sum(wh[r]))
        denom = H + params.reg_lambda
        b.set_leaf(lf["node"], -G / denom if denom > 0 else 0.0)
    return b.build()


def train_goss_leafwise(
    train: ProcessDataset, params: GossParams = GossParams(), callback=None
) -> BoostedEnsemble:
    """Boost leaf-wise trees, re-drawing the GOSS sample before every tree."""
    check_trainable(train)
    X, y = train.features, train.target
    base = init_base_score(y)
    XT = np.ascontiguousarray(X.T)
    rng = np.random.default_rng(params.seed)
    acc = np.zeros(X.shape[0])
    trees = []
    for m in range(params.n_trees):
        raw = base + params.learning_rate * acc
        g, h = logistic_grad_hess(y, raw)
        sample = goss_sample(g, params.a, params.b, rng)
        tree = grow_tree_leafwise(X, g, h, sample, params, XT)
        trees.append(tree)
        acc += tree.predict(X)
        if callback is not None:
            callback(m, base + params.learning_rate * acc)
    return BoostedEnsemble(base, trees, params.learning_rate, GOSS_LEAFWISE, train.feature_names)
