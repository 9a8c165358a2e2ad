from __future__ import annotations

import math

import numpy as np
from scipy.spatial.distance import pdist

from ..imgvol import Mask3D
from .base import EmptyMaskError, FeatureVector

SHAPE_FEATURES = (
    "VoxelVolume",
    "SurfaceArea",
    "Sphericity",
    "Maximum3DDiameter",
    "MajorAxisLength",
    "MinorAxisLength",
    "LeastAxisLength",
    "Elongation",
    "Flatness",
)


def _exposed_face_area(vox: np.ndarray, spacing) -> float:
    sx, sy, sz = spacing
    face_area = (sy * sz, sx * sz, sx * sy)
    padded = np.pad(vox, 1)
    area = 0.0
    for axis in range(3):
        # every foreground/background transition along an axis is one exposed face
        transitions = np.count_nonzero(np.diff(padded.astype(np.int8), axis=axis))
        area += transitions * face_area[axis]
    return area


def _boundary_voxels(vox: np.ndarray) -> np.ndarray:
    padded = np.pad(vox, 1)
    interior = padded[1:-1, 1:-1, 1:-1].copy()
    for axis in range(3):
        for shift in (-1, 1):
            interior &= np.roll(padded, shift, axis=axis)[1:-1, 1:-1, 1:-1]
    return vox & ~interior


def shape_features(mask: Mask3D, spacing) -> FeatureVector:
    """Voxel-based shape descriptors of the mask (no surface meshing).

    Elongation and Flatness are 0 when the largest principal variance is 0
    (single voxel).
    """
    vox = mask.voxels
    n = int(vox.sum())
    if n == 0:
        raise EmptyMaskError("shape features need a non-empty mask")
    spacing = np.asarray(spacing, dtype=float)

    volume = n * float(np.prod(spacing))
    area = _exposed_face_area(vox, spacing)
    sphericity = math.pi ** (1 / 3) * (6 * volume) ** (2 / 3) / area

    edge = np.argwhere(_boundary_voxels(vox)) * spacing
    diameter = float(pdist(edge).max()) if len(edge) > 1 else 0.0

    pts = np.argwhere(vox) * spacing
    cov = np.cov(pts, rowvar=False, bias=True) if n > 1 else np.zeros((3, 3))
    lam = np.clip(np.sort(np.linalg.eigvalsh(cov))[::-1], 0.0, None)
    if lam[0] > 0:
        elongation = math.sqrt(lam[1] / lam[0])
        flatness = math.sqrt(lam[2] / lam[0])
    else:
        elongation = flatness = 0.0

    fv = FeatureVector()
    for name, value in zip(
        SHAPE_FEATURES,
        (volume, area, sphericity, diameter, *(4 * np.sqrt(lam)), elongation, flatness),
    ):
        fv.add(name, value)
    return fv
