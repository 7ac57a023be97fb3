"""Additive tree ensembles: prediction, evaluation and a text model format."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..dataset import DatasetError, ProcessDataset
from .loss import sigmoid
from .tree import LEAF, Tree

EXACT_GREEDY = "exact-greedy"
GOSS_LEAFWISE = "goss-leafwise"
VARIANTS = (EXACT_GREEDY, GOSS_LEAFWISE)

FORMAT_HEADER = "processxai-ensemble 1"


def round_half_up(x: float, ndigits: int = 2) -> float:
    q = Decimal(1).scaleb(-ndigits)
    return float(Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_UP))


def check_trainable(train: ProcessDataset):
    if train.n_rows == 0:
        raise DatasetError("training set is empty")
    n_normal, n_defect = train.class_counts()
    if n_normal == 0 or n_defect == 0:
        raise DatasetError("training set must contain both classes")


class Prediction(NamedTuple):
    raw: float
    probability: float
    label: int


@dataclass(eq=False)
class BoostedEnsemble:
    base_score: float
    trees: list[Tree]
    learning_rate: float
    variant: str
    feature_names: tuple[str, ...]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} features per row, got {X.shape[1]}"
            )
        return X

    def predict_raw(self, X) -> np.ndarray:
        X = self._check(X)
        acc = np.zeros(X.shape[0])
        for t in self.trees:
            acc += t.predict(X)
        return self.base_score + self.learning_rate * acc

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.predict_raw(X))

    def predict_label(self, X) -> np.ndarray:
        return (self.predict_raw(X) >= 0).astype(np.int64)

    def __call__(self, X) -> np.ndarray:
        return self.predict_raw(X)

    def used_features(self) -> set[int]:
        out = set()
        for t in self.trees:
            out |= t.used_features()
        return out

    def structurally_equal(self, other: "BoostedEnsemble") -> bool:
        return (
            self.base_score == other.base_score
            and self.learning_rate == other.learning_rate
            and self.variant == other.variant
            and self.feature_names == other.feature_names
            and len(self.trees) == len(other.trees)
            and all(a.structurally_equal(b) for a, b in zip(self.trees, other.trees))
        )


def predict(ens: BoostedEnsemble, row) -> Prediction:
    row = np.asarray(row, dtype=float)
    if row.ndim != 1:
        raise ValueError("predict expects a single row")
    raw = float(ens.predict_raw(row)[0])
    return Prediction(raw, float(sigmoid(raw)), int(raw >= 0))


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with the normal class (label 1) as positive."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else float("nan")

    @property
    def accuracy_percent(self) -> float:
        """Percent accuracy truncated (not rounded) to two decimals, so a
        reported figure never overstates the model."""
        if not self.total:
            return float("nan")
        return (10000 * (self.tp + self.tn) // self.total) / 100


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (t == 1))),
        fp=int(np.sum((p == 1) & (t == 0))),
        tn=int(np.sum((p == 0) & (t == 0))),
        fn=int(np.sum((p == 0) & (t == 1))),
    )


def evaluate(ens: BoostedEnsemble, ds: ProcessDataset) -> ConfusionMatrix:
    if ds.n_rows == 0:
        raise DatasetError("cannot evaluate on an empty dataset")
    return confusion(ds.target, ens.predict_label(ds.features))


# -- text serialisation -------------------------------------------------------
#
# processxai-ensemble 1
# variant <name>
# learning_rate <float>
# base_score <float>
# features <n>
# <name>            (one line per feature)
# trees <m>
# tree <nodes>
# split <feature> <threshold> <right-child>   (left child is the next line)
# leaf <weight>
#
# Floats are written with repr(), which round-trips exactly.


def dumps(ens: BoostedEnsemble) -> str:
    lines = [
        FORMAT_HEADER,
        f"variant {ens.variant}",
        f"learning_rate {ens.learning_rate!r}",
        f"base_score {float(ens.base_score)!r}",
        f"features {ens.n_features}",
        *ens.feature_names,
        f"trees {len(ens.trees)}",
    ]
    for t in ens.trees:
        lines.append(f"tree {len(t)}")
        for i in range(len(t)):
            if t.feature[i] == LEAF:
                lines.append(f"leaf {float(t.weight[i])!r}")
            else:
                lines.append(
                    f"split {int(t.feature[i])} {float(t.threshold[i])!r} {int(t.right[i])}"
                )
    return "\n".join(lines) + "\n"


def loads(text: str) -> BoostedEnsemble:
    lines = text.splitlines()
    pos = 0

    def take(prefix=None):
        nonlocal pos
        if pos >= len(lines):
            raise ValueError("truncated model file")
        line = lines[pos]
        pos += 1
        if prefix is None:
            return line
        key, _, rest = line.partition(" ")
        if key != prefix:
            raise ValueError(f"model file line {pos}: expected {prefix!r}, got {line!r}")
        return rest

    if take() != FORMAT_HEADER:
        raise ValueError("not a processxai model file")
    variant = take("variant")
    lr = float(take("learning_rate"))
    base = float(take("base_score"))
    names = tuple(take() for _ in range(int(take("features"))))
    trees = []
    for _ in range(int(take("trees"))):
        n = int(take("tree"))
        feat = np.full(n, LEAF, dtype=np.int64)
        thr = np.zeros(n)
        left = np.full(n, LEAF, dtype=np.int64)
        right = np.full(n, LEAF, dtype=np.int64)
        w = np.zeros(n)
        for i in range(n):
            kind, *vals = take().split()
            if kind == "leaf":
                w[i] = float(vals[0])
            elif kind == "split":
                feat[i], thr[i], right[i] = int(vals[0]), float(vals[1]), int(vals[2])
                left[i] = i + 1
            else:
                raise ValueError(f"model file line {pos}: unknown node kind {kind!r}")
        trees.append(Tree(feat, thr, left, right, w))
    return BoostedEnsemble(base, trees, lr, variant, names)


def save(ens: BoostedEnsemble, path) -> None:
    Path(path).write_text(dumps(ens), encoding="utf-8")


def load(path) -> BoostedEnsemble:
    return loads(Path(path).read_text(encoding="utf-8"))


# -- cross-validation ---------------------------------------------------------


@dataclass(frozen=True)
class CVResult:
    fold_accuracies: tuple  # float, or None for a degenerate fold
    mean: float

    @property
    def degenerate_folds(self) -> list[int]:
        return [i for i, a in enumerate(self.fold_accuracies) if a is None]


def cross_validate(train: ProcessDataset, params, k: int = 3, seed: int = 0) -> CVResult:
    """k-fold accuracy; a fold whose training part lacks a class is reported
    as ``None`` and left out of the mean."""
    from ..dataset import cv_folds
    from . import fit

    if k < 2:
        raise ValueError("k must be at least 2")
    accs = []
    for fold_train, holdout in cv_folds(train, k, seed):
        n_normal, n_defect = fold_train.class_counts()
        if n_normal == 0 or n_defect == 0 or holdout.n_rows == 0:
            accs.append(None)
            continue
        model = fit(fold_train, params)
        accs.append(evaluate(model, holdout).accuracy)
    valid = [a for a in accs if a is not None]
    mean = float(np.mean(valid)) if valid else float("nan")
    return CVResult(tuple(accs), mean)

