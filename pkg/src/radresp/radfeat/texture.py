"""Texture matrices (GLCM, GLRLM, GLSZM) and their features.

All matrices are built from a :class:`DiscretizedROI`. GLCM and GLRLM use the
13 unique neighbour directions at distance 1; features are computed per
direction and then averaged with equal weight.
"""
from __future__ import annotations

from itertools import product
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .base import DiscretizedROI, EmptyMaskError, FeatureVector
from .firstorder import entropy_bits

Direction = Tuple[int, int, int]

# one representative per +/- pair: first non-zero component positive
DIRECTIONS: Tuple[Direction, ...] = tuple(
    d for d in product((-1, 0, 1), repeat=3) if d != (0, 0, 0) and d[next(i for i, v in enumerate(d) if v)] > 0
)

GLCM_FEATURES = (
    "Contrast",
    "Dissimilarity",
    "InverseDifferenceMoment",
    "JointEnergy",
    "JointEntropy",
    "Correlation",
    "Autocorrelation",
    "ClusterShade",
    "ClusterProminence",
    "JointAverage",
)
GLRLM_FEATURES = (
    "ShortRunEmphasis",
    "LongRunEmphasis",
    "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized",
    "RunLengthNonUniformity",
    "RunLengthNonUniformityNormalized",
    "RunPercentage",
    "GrayLevelVariance",
    "RunVariance",
    "RunEntropy",
    "LowGrayLevelRunEmphasis",
    "HighGrayLevelRunEmphasis",
)
GLSZM_FEATURES = (
    "SmallAreaEmphasis",
    "LargeAreaEmphasis",
    "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized",
    "SizeZoneNonUniformity",
    "SizeZoneNonUniformityNormalized",
    "ZonePercentage",
    "GrayLevelVariance",
    "ZoneVariance",
    "ZoneEntropy",
)


def _shifted_pair(image: np.ndarray, d: Direction):
    """Views (a, b) with b[p] = image[p + d] over the interior of the padded image."""
    core = tuple(slice(1, n - 1) for n in image.shape)
    moved = tuple(slice(1 + o, n - 1 + o) for o, n in zip(d, image.shape))
    return image[core], image[moved]


# ------------------------------------------------------------------------- GLCM

def glcm_matrix(droi: DiscretizedROI, d: Direction) -> Optional[np.ndarray]:
    """Symmetric co-occurrence probabilities for one direction, or None without pairs."""
    ng = droi.n_levels
    a, b = _shifted_pair(droi.image, d)
    ok = (a > 0) & (b > 0)
    if not ok.any():
        return None
    i = a[ok] - 1
    j = b[ok] - 1
    counts = np.bincount(i * ng + j, minlength=ng * ng).reshape(ng, ng).astype(float)
    counts += counts.T
    return counts / counts.sum()


def _glcm_values(p: np.ndarray) -> Tuple[float, ...]:
    ng = p.shape[0]
    lv = np.arange(1, ng + 1, dtype=float)
    i = lv[:, None]
    j = lv[None, :]
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    mux = float(px @ lv)
    muy = float(py @ lv)
    sdx = float(np.sqrt(px @ (lv - mux) ** 2))
    sdy = float(np.sqrt(py @ (lv - muy) ** 2))
    auto = float((p * i * j).sum())
    diff = i - j
    corr = (auto - mux * muy) / (sdx * sdy) if sdx * sdy > 0 else 0.0
    cs = i + j - mux - muy
    return (
        float((p * diff ** 2).sum()),
        float((p * np.abs(diff)).sum()),
        float((p / (1.0 + diff ** 2)).sum()),
        float((p * p).sum()),
        entropy_bits(p.ravel()),
        corr,
        auto,
        float((p * cs ** 3).sum()),
        float((p * cs ** 4).sum()),
        mux,
    )


def glcm_features(droi: DiscretizedROI, directions: Optional[Sequence[Direction]] = None) -> FeatureVector:
    """Direction-averaged GLCM features.

    Directions without any neighbouring voxel pair are skipped; if no
    direction has a pair (isolated voxels) every feature is reported as 0.
    """
    if droi.n_voxels == 0:
        raise EmptyMaskError("GLCM needs a non-empty ROI")
    directions = DIRECTIONS if directions is None else tuple(directions)
    per_dir = [m for m in (glcm_matrix(droi, d) for d in directions) if m is not None]
    if per_dir:
        mean = np.mean([_glcm_values(p) for p in per_dir], axis=0)
    else:
        mean = np.zeros(len(GLCM_FEATURES))
    fv = FeatureVector()
    for name, value in zip(GLCM_FEATURES, mean):
        fv.add(name, value)
    return fv


# ------------------------------------------------------------------------ GLRLM

def glrlm_matrix(droi: DiscretizedROI, d: Direction) -> np.ndarray:
    """Run-length counts P[level-1, length-1] of maximal runs along ``d``."""
    image = droi.image
    ng = droi.n_levels
    step = np.asarray(d)
    a, prev = _shifted_pair(image, tuple(-s for s in d))
    starts = np.argwhere((a > 0) & (a != prev)) + 1
    level = image[starts[:, 0], starts[:, 1], starts[:, 2]]
    length = np.ones(len(starts), dtype=np.int64)
    active = np.arange(len(starts))
    t = 1
    while active.size:
        pos = starts[active] + t * step
        same = image[pos[:, 0], pos[:, 1], pos[:, 2]] == level[active]
        active = active[same]
        length[active] += 1
        t += 1
    max_len = int(length.max())
    P = np.zeros((ng, max_len))
    np.add.at(P, (level - 1, length - 1), 1.0)
    return P


def _size_matrix_values(P: np.ndarray, n_voxels: int) -> dict:
    """Shared statistics of run-length / size-zone matrices P[level, size]."""
    n = P.sum()
    lv = np.arange(1, P.shape[0] + 1, dtype=float)[:, None]
    sz = np.arange(1, P.shape[1] + 1, dtype=float)[None, :]
    p = P / n
    by_level = P.sum(axis=1)
    by_size = P.sum(axis=0)
    mu_i = float((p * lv).sum())
    mu_j = float((p * sz).sum())
    return {
        "small": float((P / sz ** 2).sum() / n),
        "large": float((P * sz ** 2).sum() / n),
        "gln": float((by_level ** 2).sum() / n),
        "glnn": float((by_level ** 2).sum() / n ** 2),
        "szn": float((by_size ** 2).sum() / n),
        "sznn": float((by_size ** 2).sum() / n ** 2),
        "pct": float(n / n_voxels),
        "glv": float((p * (lv - mu_i) ** 2).sum()),
        "sv": float((p * (sz - mu_j) ** 2).sum()),
        "ent": entropy_bits(p.ravel()),
        "lgl": float((P / lv ** 2).sum() / n),
        "hgl": float((P * lv ** 2).sum() / n),
    }


_GLRLM_KEYS = ("small", "large", "gln", "glnn", "szn", "sznn", "pct", "glv", "sv", "ent", "lgl", "hgl")
_GLSZM_KEYS = ("small", "large", "gln", "glnn", "szn", "sznn", "pct", "glv", "sv", "ent")


def glrlm_features(droi: DiscretizedROI, directions: Optional[Sequence[Direction]] = None) -> FeatureVector:
    if droi.n_voxels == 0:
        raise EmptyMaskError("GLRLM needs a non-empty ROI")
    directions = DIRECTIONS if directions is None else tuple(directions)
    rows = []
    for d in directions:
        vals = _size_matrix_values(glrlm_matrix(droi, d), droi.n_voxels)
        rows.append([vals[k] for k in _GLRLM_KEYS])
    fv = FeatureVector()
    for name, value in zip(GLRLM_FEATURES, np.mean(rows, axis=0)):
        fv.add(name, value)
    return fv


# ------------------------------------------------------------------------ GLSZM

_CONNECTIVITY_26 = np.ones((3, 3, 3), dtype=bool)


def glszm_matrix(droi: DiscretizedROI) -> np.ndarray:
    """Zone counts P[level-1, size-1] over 26-connected equal-level components."""
    image = droi.image
    ng = droi.n_levels
    zones = []
    for level in range(1, ng + 1):
        labels, n = ndimage.label(image == level, structure=_CONNECTIVITY_26)
        if n:
            sizes = np.bincount(labels.ravel())[1:]
            zones.append(np.column_stack([np.full(n, level), sizes]))
    zones = np.concatenate(zones)
    P = np.zeros((ng, int(zones[:, 1].max())))
    np.add.at(P, (zones[:, 0] - 1, zones[:, 1] - 1), 1.0)
    return P


def glszm_features(droi: DiscretizedROI) -> FeatureVector:
    if droi.n_voxels == 0:
        raise EmptyMaskError("GLSZM needs a non-empty ROI")
    vals = _size_matrix_values(glszm_matrix(droi), droi.n_voxels)
    fv = FeatureVector()
    for name, key in zip(GLSZM_FEATURES, _GLSZM_KEYS):
        fv.add(name, vals[key])
    return fv
