"""Histogram gradient-boosted regression trees with Tweedie and squared-error objectives."""
from .booster import BoostedModel, GBMParams, predict, train
from .goss import goss_sample
from .loss import MSELoss, TweedieLoss, make_loss, tweedie_grad_hess, tweedie_loss
from .tree import Tree, TreeNode

__all__ = [
    "BoostedModel", "GBMParams", "MSELoss", "Tree", "TreeNode", "TweedieLoss",
    "goss_sample", "make_loss", "predict", "train", "tweedie_grad_hess", "tweedie_loss",
]
