"""Gradient-boosted decision trees for binary defect prediction."""

from .ensemble import (
    EXACT_GREEDY,
    GOSS_LEAFWISE,
    VARIANTS,
    BoostedEnsemble,
    ConfusionMatrix,
    CVResult,
    Prediction,
    cross_validate,
    evaluate,
    predict,
)
from .ensemble import dumps, load, loads, save
from .exact import (
    ExactGreedyParams,
    Split,
    best_split_exact,
    leaf_weight,
    train_exact_greedy,
)
from .goss import GossParams, GossSample, goss_sample, goss_split_gain, train_goss_leafwise
from .loss import GradientPair, init_base_score, log_loss, logistic_grad_hess, sigmoid
from .tree import Tree, TreeNode


def fit(train, params):
    """Dispatch on the parameter type."""
    if isinstance(params, ExactGreedyParams):
        return train_exact_greedy(train, params)
    if isinstance(params, GossParams):
        return train_goss_leafwise(train, params)
    raise TypeError(f"unsupported parameter object {type(params).__name__}")
