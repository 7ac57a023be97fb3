"""Regression trees stored as flat pre-order node arrays."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

LEAF = -1


@dataclass(frozen=True)
class TreeNode:
    """View of one node. Leaves have ``feature == -1``; rows with
    ``x[feature] <= threshold`` go left."""

    index: int
    feature: int
    threshold: float
    left: int
    right: int
    weight: float

    @property
    def is_leaf(self) -> bool:
        return self.feature == LEAF


@dataclass(eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return self.feature.shape[0]

    def node(self, i: int) -> TreeNode:
        return TreeNode(
            i,
            int(self.feature[i]),
            float(self.threshold[i]),
            int(self.left[i]),
            int(self.right[i]),
            float(self.weight[i]),
        )

    def nodes(self):
        return [self.node(i) for i in range(len(self))]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def depth(self) -> int:
        def _d(i):
            if self.feature[i] == LEAF:
                return 0
            return 1 + max(_d(self.left[i]), _d(self.right[i]))

        return _d(0)

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f != LEAF}

    @cached_property
    def _routing(self):
        # leaves route to themselves, so a fixed number of steps is branch-free
        leaf = self.feature == LEAF
        own = np.arange(len(self))
        return (
            np.where(leaf, 0, self.feature),
            np.where(leaf, np.inf, self.threshold),
            np.where(leaf, own, self.left),
            np.where(leaf, own, self.right),
            self.depth(),
        )

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = np.ascontiguousarray(X, dtype=float)
        feat, thr, left, right, depth = self._routing
        flat = X.ravel()
        offset = np.arange(X.shape[0]) * X.shape[1]
        idx = np.zeros(X.shape[0], dtype=np.int64)
        for _ in range(depth):
            v = flat.take(offset + feat.take(idx))
            idx = np.where(v <= thr.take(idx), left.take(idx), right.take(idx))
        return idx

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.weight[self.apply(X)]

    def structurally_equal(self, other: "Tree") -> bool:
        return all(
            np.array_equal(getattr(self, a), getattr(other, a))
            for a in ("feature", "threshold", "left", "right", "weight")
        )

    @cached_property
    def leaves(self) -> list:
        """``leaf_paths()`` as a list, computed once."""
        return list(self.leaf_paths())

    def leaf_paths(self):
        """Yield ``(leaf_weight, {feature: (lower, upper)})`` for every leaf.

        A row reaches the leaf iff ``lower < x[f] <= upper`` for each listed
        feature.
        """
        stack = [(0, {})]
        while stack:
            i, box = stack.pop()
            f = int(self.feature[i])
            if f == LEAF:
                yield float(self.weight[i]), box
                continue
            t = float(self.threshold[i])
            lo, hi = box.get(f, (-np.inf, np.inf))
            right = dict(box)
            right[f] = (max(lo, t), hi)
            left = dict(box)
            left[f] = (lo, min(hi, t))
            stack.append((int(self.right[i]), right))
            stack.append((int(self.left[i]), left))


@dataclass
class TreeBuilder:
    """Appends nodes in pre-order while a tree is grown recursively."""

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    weight: list = field(default_factory=list)

    def add(self) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.weight.append(0.0)
        return len(self.feature) - 1

    def set_leaf(self, i: int, weight: float):
        self.feature[i] = LEAF
        self.weight[i] = float(weight)

    def set_split(self, i: int, feature: int, threshold: float, left: int, right: int):
        self.feature[i] = int(feature)
        self.threshold[i] = float(threshold)
        self.left[i] = int(left)
        self.right[i] = int(right)

    def build(self) -> Tree:
        """Freeze into a :class:`Tree`, renumbering nodes in pre-order from
        node 0 (leaf-wise growth creates them out of order)."""
        order, stack = [], [0]
        while stack:
            i = stack.pop()
            order.append(i)
            if self.feature[i] != LEAF:
                stack.append(self.right[i])
                stack.append(self.left[i])
        new = {old: k for k, old in enumerate(order)}
        f = np.array([self.feature[i] for i in order], dtype=np.int64)
        return Tree(
            f,
            np.array([self.threshold[i] if self.feature[i] != LEAF else 0.0 for i in order]),
            np.array([new[self.left[i]] if f[k] != LEAF else LEAF for k, i in enumerate(order)], dtype=np.int64),
            np.array([new[self.right[i]] if f[k] != LEAF else LEAF for k, i in enumerate(order)], dtype=np.int64),
            np.array([self.weight[i] if self.feature[i] == LEAF else 0.0 for i in order]),
        )


def single_leaf(weight: float) -> Tree:
    b = TreeBuilder()
    b.set_leaf(b.add(), weight)
    return b.build()
