"""Binary logistic loss on raw log-odds scores."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

BASE_SCORE_CLAMP = 15.0


class GradientPair(NamedTuple):
    g: float
    h: float


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def log_loss(labels, raw) -> float:
    """Mean negative log-likelihood, computed stably from raw scores."""
    y = np.asarray(labels, dtype=float)
    z = np.asarray(raw, dtype=float)
    # log(1 + e^z) - y z
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def logistic_grad_hess(label, raw):
    """First and second derivative of the log-loss w.r.t. the raw score.

    Works elementwise on arrays; scalars give a :class:`GradientPair`.
    """
    p = sigmoid(raw)
    g = p - np.asarray(label, dtype=float)
    h = p * (1.0 - p)
    if np.ndim(g) == 0:
        return GradientPair(float(g), float(h))
    return g, h


def init_base_score(labels) -> float:
    """Constant raw score minimising the log-loss: log-odds of the positive rate."""
    y = np.asarray(labels, dtype=float)
    if y.size == 0:
        raise ValueError("cannot initialise from an empty label list")
    n_pos = float(np.sum(y == 1))
    if n_pos == 0:
        return -BASE_SCORE_CLAMP
    if n_pos == y.size:
        return BASE_SCORE_CLAMP
    p = n_pos / y.size
    return float(min(max(math.log(p / (1.0 - p)), -BASE_SCORE_CLAMP), BASE_SCORE_CLAMP))
