"""Radiomic feature extraction over a masked ROI."""
from .base import (
    CATEGORICAL,
    CONTINUOUS,
    DiscretizedROI,
    EmptyMaskError,
    FeatureError,
    FeatureVector,
    bin_levels,
    discretize,
)
from .extract import ExtractionConfig, extract_all, extract_patient, feature_names, preprocess
from .firstorder import FIRSTORDER_FEATURES, firstorder_features
from .shape import SHAPE_FEATURES, shape_features
from .texture import (
    DIRECTIONS,
    GLCM_FEATURES,
    GLRLM_FEATURES,
    GLSZM_FEATURES,
    glcm_features,
    glcm_matrix,
    glrlm_features,
    glrlm_matrix,
    glszm_features,
    glszm_matrix,
)
