"""Regressors that predict test accuracy from weight features."""
from .base import AccuracyRegressor
from .neural import DNNRegressor, LogitLinearRegressor
from .search import random_search, sample_configs
from .serialization import ESTIMATORS, load_model, save_model
from .trees import GBMRegressor, RandomForestRegressor, feature_importance

__all__ = [
    "AccuracyRegressor",
    "DNNRegressor",
    "ESTIMATORS",
    "GBMRegressor",
    "LogitLinearRegressor",
    "RandomForestRegressor",
    "feature_importance",
    "load_model",
    "random_search",
    "sample_configs",
    "save_model",
]
