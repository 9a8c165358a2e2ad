"""Classifiers, SMOTE oversampling and evaluation metrics."""
from .metrics import METRIC_NAMES, MetricError, MetricSet, classification_metrics, roc_auc
from .models import (
    DEFAULT_PARAMS,
    FOREST,
    GBT,
    MODEL_KINDS,
    RIDGE,
    TREE,
    Dataset,
    ForestModel,
    GbtModel,
    ModelError,
    RidgeModel,
    TrainedModel,
    TreeModel,
    fit_model,
    train_forest,
    train_gbt,
    train_ridge,
    train_tree,
)
from .smote import smote
