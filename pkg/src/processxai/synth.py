"""Synthetic process data with planted control ranges."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DEFAULT_TARGET, ProcessDataset


@dataclass(frozen=True)
class SynthConfig:
    """``relevant`` holds ``(feature_index, sweet_lower, sweet_upper)``.

    Features are uniform on ``feature_range``. A product is defective with
    probability ``out_defect_prob`` when any relevant feature lies outside its
    sweet interval, else ``base_defect_prob``. ``noise`` is the standard
    deviation of Gaussian measurement noise added to the recorded features
    after the labels are drawn.
    """

    n_rows: int = 8000
    n_features: int = 10
    relevant: tuple = ((0, 5.0, 95.0), (1, 5.0, 95.0))
    base_defect_prob: float = 0.005
    out_defect_prob: float = 0.6
    feature_range: tuple = (0.0, 100.0)
    noise: float = 0.0
    seed: int = 0
    decimals: int | None = 1
    feature_names: tuple = field(default=None)

    def __post_init__(self):
        lo, hi = self.feature_range
        if not lo < hi:
            raise ValueError("feature_range must be increasing")
        if self.n_rows < 1 or self.n_features < 1:
            raise ValueError("n_rows and n_features must be positive")
        # equality is allowed: it is the null mechanism (labels ignore features)
        if not 0 <= self.base_defect_prob <= self.out_defect_prob <= 1:
            raise ValueError("need 0 <= base_defect_prob <= out_defect_prob <= 1")
        idx = [int(r[0]) for r in self.relevant]
        if len(set(idx)) != len(idx):
            raise ValueError("relevant feature indices must be distinct")
        for j, a, b in self.relevant:
            if not 0 <= j < self.n_features:
                raise ValueError(f"relevant index {j} out of range")
            if not lo <= a < b <= hi:
                raise ValueError(f"sweet interval [{a}, {b}] must lie inside {self.feature_range}")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if self.feature_names is not None and len(self.feature_names) != self.n_features:
            raise ValueError("feature_names length must equal n_features")

    def names(self) -> tuple[str, ...]:
        if self.feature_names is not None:
            return tuple(self.feature_names)
        return tuple(f"X{j:02d}" for j in range(self.n_features))

    def sweet_fraction(self) -> float:
        """Probability that a row lies inside every sweet interval, taking
        the rounding of recorded values into account."""
        lo, hi = self.feature_range
        frac = 1.0
        for _, a, b in self.relevant:
            if self.decimals is not None:
                step = 10.0 ** -self.decimals
                # u is recorded inside [a, b] iff round(u) lands on a grid
                # point between a and b
                a = max(lo, math.ceil(round(a / step, 9)) * step - step / 2)
                b = min(hi, math.floor(round(b / step, 9)) * step + step / 2)
            frac *= max(0.0, b - a) / (hi - lo)
        return frac

    def expected_defect_rate(self) -> float:
        s = self.sweet_fraction()
        return s * self.base_defect_prob + (1 - s) * self.out_defect_prob


@dataclass(frozen=True)
class GroundTruth:
    relevant: tuple[int, ...]
    intervals: tuple[tuple[float, float], ...]
    feature_names: tuple[str, ...]

    def interval_for(self, feature: int) -> tuple[float, float]:
        return self.intervals[self.relevant.index(feature)]


def generate(cfg: SynthConfig) -> tuple[ProcessDataset, GroundTruth]:
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.feature_range
    X = rng.uniform(lo, hi, size=(cfg.n_rows, cfg.n_features))
    if cfg.decimals is not None:
        # recorded sensor resolution; labels follow the recorded values
        X = np.round(X, cfg.decimals)
    inside = np.ones(cfg.n_rows, dtype=bool)
    for j, a, b in cfg.relevant:
        inside &= (X[:, j] >= a) & (X[:, j] <= b)
    p_defect = np.where(inside, cfg.base_defect_prob, cfg.out_defect_prob)
    y = (rng.random(cfg.n_rows) >= p_defect).astype(np.int64)
    if cfg.noise > 0:
        X = X + rng.normal(0.0, cfg.noise, size=X.shape)
        if cfg.decimals is not None:
            X = np.round(X, cfg.decimals)
    names = cfg.names()
    truth = GroundTruth(
        tuple(int(r[0]) for r in cfg.relevant),
        tuple((float(r[1]), float(r[2])) for r in cfg.relevant),
        names,
    )
    return ProcessDataset(X, names, y, DEFAULT_TARGET), truth


def ground_truth_overlap(planted: tuple[float, float], recovered) -> float:
    """Jaccard overlap of two closed intervals. ``recovered`` may be a
    ``(lower, upper)`` pair or a ControlRange."""
    a0, a1 = map(float, planted)
    if hasattr(recovered, "lower"):
        b0, b1 = float(recovered.lower), float(recovered.upper)
    else:
        b0, b1 = map(float, recovered)
    if a0 > a1 or b0 > b1:
        raise ValueError("intervals must satisfy lower <= upper")
    union = max(a1, b1) - min(a0, b0)
    inter = max(0.0, min(a1, b1) - max(a0, b0))
    if union == 0:
        return 1.0 if (a0, a1) == (b0, b1) else 0.0
    return inter / union


def write_ground_truth(truth: GroundTruth, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "feature_index", "sweet_lower", "sweet_upper"])
        for j, (a, b) in zip(truth.relevant, truth.intervals):
            w.writerow([truth.feature_names[j], j, repr(a), repr(b)])
