"""Shapley-value attribution and cumulative-importance feature selection.

The game for an instance ``x`` is the interventional one: for a coalition
``S`` the model is evaluated on composites that take ``x`` on ``S`` and a
background row elsewhere, averaged over the background, minus the background
mean. Attributions are on the raw (log-odds) scale.

Three estimators share that definition:

* ``exact``   -- enumerates all ``2**n`` coalitions (any model, ``n <= 16``)
* ``sampled`` -- Monte Carlo over feature permutations (any model)
* ``tree``    -- exact values for :class:`BoostedEnsemble` computed leaf by
  leaf; identical to ``exact`` up to rounding, and fast enough for full
  datasets
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import ProcessDataset
from .gbdt.ensemble import BoostedEnsemble

MAX_EXACT_FEATURES = 16
ESTIMATORS = ("tree", "exact", "sampled")


def _raw_fn(model):
    if hasattr(model, "predict_raw"):
        return model.predict_raw
    if callable(model):
        return model
    raise TypeError("model must be callable or provide predict_raw()")


def _background_array(background) -> np.ndarray:
    bg = background.features if isinstance(background, ProcessDataset) else background
    bg = np.asarray(bg, dtype=float)
    if bg.ndim != 2 or bg.shape[0] == 0:
        raise ValueError("background must be a non-empty 2-D array")
    return bg


def background_sample(ds: ProcessDataset, size: int = 128, seed: int = 0) -> np.ndarray:
    """All rows when ``ds`` is small enough, otherwise a seeded subsample."""
    if ds.n_rows <= size:
        return ds.features.copy()
    rows = np.sort(np.random.default_rng(seed).choice(ds.n_rows, size=size, replace=False))
    return ds.features[rows]


def _mask_matrix(masks: np.ndarray, n: int) -> np.ndarray:
    return ((masks[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(bool)


def _coalition_means(f, x, bg, masks, chunk_rows=1 << 18) -> np.ndarray:
    """Mean model output over the background for each coalition bitmask."""
    n = x.shape[0]
    B = bg.shape[0]
    out = np.empty(masks.size)
    step = max(1, chunk_rows // B)
    for start in range(0, masks.size, step):
        m = _mask_matrix(masks[start : start + step], n)
        comp = np.where(m[:, None, :], x[None, None, :], bg[None, :, :])
        vals = np.asarray(f(comp.reshape(-1, n)), dtype=float).reshape(m.shape[0], B)
        out[start : start + step] = vals.mean(axis=1)
    return out


def value_function(model, S: Sequence[int], x, background) -> float:
    """Contribution of coalition ``S``: mean of f over composites minus the
    mean of f over the background."""
    f = _raw_fn(model)
    bg = _background_array(background)
    x = np.asarray(x, dtype=float)
    mask = 0
    for j in S:
        if not 0 <= j < x.shape[0]:
            raise ValueError(f"feature index {j} out of range")
        mask |= 1 << int(j)
    if mask == 0:
        return 0.0
    vals = _coalition_means(f, x, bg, np.array([0, mask], dtype=np.int64))
    return float(vals[1] - vals[0])


def shapley_weights(n: int) -> np.ndarray:
    """``|S|! (n - |S| - 1)! / n!`` indexed by ``|S|``."""
    return np.array(
        [math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n) for s in range(n)]
    )


def shapley_exact(model, x, background, n: int | None = None) -> np.ndarray:
    """Shapley values by enumerating every coalition."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0] if n is None else n
    if n != x.shape[0]:
        raise ValueError(f"instance has {x.shape[0]} features, n={n}")
    if n > MAX_EXACT_FEATURES:
        raise ValueError(
            f"{n} features is too many for subset enumeration "
            f"(limit {MAX_EXACT_FEATURES}); use shapley_sampled"
        )
    f = _raw_fn(model)
    bg = _background_array(background)
    masks = np.arange(1 << n, dtype=np.int64)
    v = _coalition_means(f, x, bg, masks)
    v = v - v[0]
    sizes = np.array([bin(m).count("1") for m in range(1 << n)])
    w = shapley_weights(n)
    phi = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        phi[i] = np.sum(w[sizes[without]] * (v[without | bit] - v[without]))
    return phi


def shapley_sampled(model, x, background, n_permutations: int = 1000, seed: int = 0) -> np.ndarray:
    """Permutation-sampling estimate of the Shapley values.

    Each sampled ordering adds the features of ``x`` one at a time and credits
    each with its marginal change in the coalition value. Coalition values
    are cached, so small ``n`` costs at most ``2**n`` evaluations.
    """
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n > 62:
        raise ValueError("sampled estimator supports at most 62 features")
    f = _raw_fn(model)
    bg = _background_array(background)
    rng = np.random.default_rng(seed)
    perms = np.argsort(rng.random((n_permutations, n)), axis=1)
    bits = np.left_shift(np.int64(1), perms)
    prefix = np.concatenate(
        [np.zeros((n_permutations, 1), dtype=np.int64), np.cumsum(bits, axis=1)], axis=1
    )
    uniq, inverse = np.unique(prefix, return_inverse=True)
    v = _coalition_means(f, x, bg, uniq)[inverse.reshape(prefix.shape)]
    delta = np.diff(v, axis=1)
    phi = np.zeros(n)
    np.add.at(phi, perms.ravel(), delta.ravel())
    return phi / n_permutations


def _pair_weights(depth: int) -> tuple[np.ndarray, np.ndarray]:
    # for a leaf needing `a` features from x and `b` from the background row:
    # credit to each x-side feature and debit to each background-side feature
    pos = np.zeros((depth + 1, depth + 1))
    neg = np.zeros((depth + 1, depth + 1))
    fact = math.factorial
    for a in range(depth + 1):
        for b in range(depth + 1):
            if a >= 1:
                pos[a, b] = fact(a - 1) * fact(b) / fact(a + b)
            if b >= 1:
                neg[a, b] = fact(a) * fact(b - 1) / fact(a + b)
    return pos, neg


def shapley_tree(ens: BoostedEnsemble, X, background) -> np.ndarray:
    """Exact interventional Shapley values for a tree ensemble.

    For one tree leaf with value ``c`` and path box ``{f: (lo, hi]}``, and one
    (instance, background row) pair, let ``A`` be the path features only the
    instance satisfies and ``B`` those only the background row satisfies. If
    every path feature is satisfied by one of them, the leaf's game is
    ``c * [A in S and B disjoint from S]``, whose Shapley values are
    ``c (|A|-1)! |B|! / (|A|+|B|)!`` on ``A`` and the negated mirror on ``B``.
    Counts over all pairs reduce to small matrix products.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    bg = _background_array(background)
    n = ens.n_features
    if X.shape[1] != n or bg.shape[1] != n:
        raise ValueError("instance/background width does not match the model")
    phi = np.zeros((X.shape[0], n))
    pos_w, neg_w = _pair_weights(n)
    inv_b = 1.0 / bg.shape[0]
    for tree in ens.trees:
        for value, box in tree.leaves:
            if value == 0.0:
                continue
            feats = np.fromiter(box.keys(), dtype=np.int64)
            lo = np.array([box[j][0] for j in feats])
            hi = np.array([box[j][1] for j in feats])
            bits = np.left_shift(1, np.arange(feats.size, dtype=np.int64))
            # rows only matter through which path constraints they satisfy
            xcode = ((X[:, feats] > lo) & (X[:, feats] <= hi)) @ bits
            zcode = ((bg[:, feats] > lo) & (bg[:, feats] <= hi)) @ bits
            ux, x_of = np.unique(xcode, return_inverse=True)
            uz, z_count = np.unique(zcode, return_counts=True)
            xin = ((ux[:, None] & bits) != 0).astype(float)
            zin = ((uz[:, None] & bits) != 0).astype(float)
            xout, zout = 1.0 - xin, 1.0 - zin
            a = np.rint(xin @ zout.T).astype(np.int64)
            b = np.rint(xout @ zin.T).astype(np.int64)
            reach = np.rint(xout @ zout.T) == 0
            wp = np.where(reach, pos_w[a, b], 0.0) * z_count
            wn = np.where(reach, neg_w[a, b], 0.0) * z_count
            contrib = xin * (wp @ zout) - xout * (wn @ zin)
            phi[:, feats] += (ens.learning_rate * value * inv_b) * contrib[x_of.ravel()]
    return phi


def shapley_matrix(
    model,
    X,
    background,
    estimator: str = "tree",
    n_permutations: int = 1000,
    seed: int = 0,
) -> np.ndarray:
    """Shapley values for every row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if estimator == "tree":
        if not isinstance(model, BoostedEnsemble):
            raise TypeError("the tree estimator needs a BoostedEnsemble")
        return shapley_tree(model, X, background)
    if estimator == "exact":
        return np.array([shapley_exact(model, x, background) for x in X])
    if estimator == "sampled":
        return np.array(
            [shapley_sampled(model, x, background, n_permutations, seed + i) for i, x in enumerate(X)]
        )
    raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")


def aggregate(phi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean |phi| per feature, features by descending importance (ties to the
    lower index), and the running share of total importance in that order."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.size == 0:
        raise ValueError("phi is empty")
    mean_abs = np.mean(np.abs(phi), axis=0)
    order = np.lexsort((np.arange(mean_abs.size), -mean_abs))
    total = mean_abs.sum()
    if total == 0:
        return mean_abs, order, np.zeros(mean_abs.size)
    cumulative = np.cumsum(mean_abs[order]) / total
    cumulative[-1] = 1.0
    return mean_abs, order, cumulative


def select_main_features(order, cumulative_ratio, threshold: float = 0.70) -> list[int]:
    """Longest prefix of ``order`` whose cumulative share stays within
    ``threshold`` (at least one feature; none when all importances are 0)."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    order = list(np.asarray(order, dtype=np.int64))
    cum = np.asarray(cumulative_ratio, dtype=float)
    if not order or not np.any(cum > 0):
        return []
    k = int(np.sum(cum <= threshold + 1e-12))
    return [int(i) for i in order[: max(k, 1)]]


@dataclass(frozen=True)
class ShapleyReport:
    feature_names: tuple[str, ...]
    phi: np.ndarray
    mean_abs: np.ndarray
    order: np.ndarray
    cumulative_ratio: np.ndarray
    main_features: tuple[int, ...]
    threshold: float = 0.70

    @property
    def main_feature_names(self) -> list[str]:
        return [self.feature_names[i] for i in self.main_features]

    def rows(self):
        """Table rows in importance order:
        ``(rank, name, mean_abs, cumulative_ratio, selected)``."""
        sel = set(self.main_features)
        for rank, (j, c) in enumerate(zip(self.order, self.cumulative_ratio), start=1):
            yield rank, self.feature_names[j], float(self.mean_abs[j]), float(c), int(j) in sel


def build_report(phi, feature_names: Sequence[str], threshold: float = 0.70) -> ShapleyReport:
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    mean_abs, order, cum = aggregate(phi)
    main = select_main_features(order, cum, threshold)
    return ShapleyReport(tuple(feature_names), phi, mean_abs, order, cum, tuple(main), threshold)


def explain(
    model,
    ds: ProcessDataset,
    background,
    estimator: str = "tree",
    threshold: float = 0.70,
    n_permutations: int = 1000,
    seed: int = 0,
) -> ShapleyReport:
    phi = shapley_matrix(model, ds.features, background, estimator, n_permutations, seed)
    return build_report(phi, ds.feature_names, threshold)


REPORT_HEADER = ("rank", "feature", "mean_abs_shap", "cumulative_ratio", "selected")


def write_report_csv(report: ShapleyReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for rank, name, value, cum, sel in report.rows():
            w.writerow([rank, name, repr(value), repr(cum), int(sel)])


def read_report_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["rank"] = int(r["rank"])
        r["mean_abs_shap"] = float(r["mean_abs_shap"])
        r["cumulative_ratio"] = float(r["cumulative_ratio"])
        r["selected"] = r["selected"] == "1"
    return rows


def write_phi_csv(phi, feature_names: Sequence[str], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", *feature_names])
        for i, row in enumerate(np.atleast_2d(phi)):
            w.writerow([i, *(repr(float(v)) for v in row)])
