"""From-scratch regression model zoo behind one fit/predict contract."""
from .base import KINDS, TUNING_GRIDS, FeatureTable, Regressor, RegressorConfig, default_configs
from .ensemble import (
    BoostedTrees,
    RandomForest,
    fit_gbdt,
    fit_gbdt_arrays,
    fit_rf,
    fit_xgb,
    predict_gbdt,
    predict_rf,
    predict_xgb,
)
from .factory import Estimator, load_regressor, make_regressor, save_regressor
from .linear import LinearModel, fit_ols, fit_svr, svr_loss
from .neighbors import KnnModel, fit_knn, predict_knn
from .tree import TreeNode, fit_tree, leaf_weight, predict_tree, predict_tree_batch, split_gain

__all__ = [
    "KINDS",
    "TUNING_GRIDS",
    "FeatureTable",
    "Regressor",
    "RegressorConfig",
    "default_configs",
    "TreeNode",
    "fit_tree",
    "predict_tree",
    "predict_tree_batch",
    "leaf_weight",
    "split_gain",
    "RandomForest",
    "fit_rf",
    "predict_rf",
    "BoostedTrees",
    "fit_gbdt",
    "fit_gbdt_arrays",
    "predict_gbdt",
    "fit_xgb",
    "predict_xgb",
    "KnnModel",
    "fit_knn",
    "predict_knn",
    "LinearModel",
    "fit_ols",
    "fit_svr",
    "svr_loss",
    "Estimator",
    "make_regressor",
    "save_regressor",
    "load_regressor",
]
