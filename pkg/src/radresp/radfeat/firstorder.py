from __future__ import annotations

import numpy as np

from ..imgvol import Mask3D, Volume3D
from .base import FeatureVector, bin_levels, masked_values

FIRSTORDER_FEATURES = (
    "Mean",
    "Median",
    "Minimum",
    "Maximum",
    "Range",
    "Variance",
    "Skewness",
    "Kurtosis",
    "Energy",
    "RootMeanSquared",
    "MeanAbsoluteDeviation",
    "10Percentile",
    "90Percentile",
    "InterquartileRange",
    "Entropy",
    "Uniformity",
)


def histogram_probabilities(levels: np.ndarray) -> np.ndarray:
    counts = np.bincount(levels)[1:]
    counts = counts[counts > 0]
    return counts / counts.sum()


def entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum()) + 0.0


def firstorder_features(vol: Volume3D, mask: Mask3D, n_bins: int = 32) -> FeatureVector:
    """Intensity histogram statistics over the ROI.

    Variance is the population variance, Kurtosis is excess (Fisher) kurtosis;
    both higher moments are 0 for a constant ROI. Percentiles interpolate
    linearly. Entropy and Uniformity use the ``n_bins`` discretized histogram.
    """
    x = masked_values(vol, mask)
    mean = x.mean()
    dev = x - mean
    m2 = float(np.mean(dev ** 2))
    if m2 > 0:
        skew = float(np.mean(dev ** 3)) / m2 ** 1.5
        kurt = float(np.mean(dev ** 4)) / m2 ** 2 - 3.0
    else:
        skew = kurt = 0.0
    p10, p25, p50, p75, p90 = np.percentile(x, [10, 25, 50, 75, 90])
    levels, _ = bin_levels(x, n_bins)
    p = histogram_probabilities(levels)

    values = (
        mean,
        p50,
        x.min(),
        x.max(),
        x.max() - x.min(),
        m2,
        skew,
        kurt,
        float(np.sum(x * x)),
        float(np.sqrt(np.mean(x * x))),
        float(np.mean(np.abs(dev))),
        p10,
        p90,
        p75 - p25,
        entropy_bits(p),
        float(np.sum(p * p)),
    )
    fv = FeatureVector()
    for name, value in zip(FIRSTORDER_FEATURES, values):
        fv.add(name, value)
    return fv
