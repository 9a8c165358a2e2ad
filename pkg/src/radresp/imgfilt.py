"""Derived images: scale-normalised Laplacian of Gaussian and one-level 3D Haar wavelet."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Dict, Tuple

import numpy as np
from scipy.ndimage import correlate1d

from .imgvol import Mask3D, Volume3D, VolumeError

BAND_LABELS = tuple("".join(p) for p in product("LH", repeat=3))  # LLL, LLH, ..., HHH
_SQRT2 = math.sqrt(2.0)


def gaussian_kernel(sigma_vox: float, radius: int) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma_vox) ** 2)
    return k / k.sum()


def log_filter(vol: Volume3D, sigma_mm: float) -> Volume3D:
    """Gaussian blur (sigma in mm) followed by the 6-neighbour Laplacian, times sigma**2.

    Borders replicate the edge voxels.
    """
    if not sigma_mm > 0:
        raise VolumeError(f"LoG sigma must be positive, got {sigma_mm}")
    data = vol.data
    for axis, (n, s) in enumerate(zip(vol.dims, vol.spacing)):
        radius = int(math.ceil(4.0 * sigma_mm / s))
        if radius >= n:
            raise VolumeError(
                f"LoG kernel radius {radius} voxels exceeds volume extent {n} along axis {axis}"
            )
        data = correlate1d(data, gaussian_kernel(sigma_mm / s, radius), axis=axis, mode="nearest")

    lap = np.zeros_like(data)
    for axis, s in enumerate(vol.spacing):
        padded = np.pad(data, [(1, 1) if a == axis else (0, 0) for a in range(3)], mode="edge")
        lo = np.take(padded, np.arange(0, data.shape[axis]), axis=axis)
        hi = np.take(padded, np.arange(2, data.shape[axis] + 2), axis=axis)
        lap += (hi - 2.0 * data + lo) / (s * s)
    return vol.with_data(lap * sigma_mm ** 2)


@dataclass(frozen=True)
class WaveletBands:
    """Eight sub-bands of a single-level separable Haar transform.

    Band labels give the filter applied along x, y, z in that order.
    ``shape`` is the pre-padding input shape used to crop on reconstruction.
    """

    bands: Dict[str, Volume3D]
    shape: Tuple[int, int, int]

    def __post_init__(self):
        if set(self.bands) != set(BAND_LABELS):
            raise VolumeError(f"wavelet bands must be exactly {BAND_LABELS}")
        dims = {b.dims for b in self.bands.values()}
        if len(dims) != 1:
            raise VolumeError(f"wavelet bands have mismatched dims: {sorted(dims)}")

    def __getitem__(self, label: str) -> Volume3D:
        return self.bands[label]

    @property
    def dims(self):
        return next(iter(self.bands.values())).dims


def _pad_even(arr: np.ndarray) -> np.ndarray:
    pad = [(0, n % 2) for n in arr.shape]
    if any(p for _, p in pad):
        arr = np.pad(arr, pad, mode="edge")
    return arr


def _haar_split(arr: np.ndarray, axis: int):
    even = np.take(arr, np.arange(0, arr.shape[axis], 2), axis=axis)
    odd = np.take(arr, np.arange(1, arr.shape[axis], 2), axis=axis)
    return (even + odd) / _SQRT2, (even - odd) / _SQRT2


def _haar_merge(low: np.ndarray, high: np.ndarray, axis: int) -> np.ndarray:
    even = (low + high) / _SQRT2
    odd = (low - high) / _SQRT2
    shape = list(low.shape)
    shape[axis] *= 2
    out = np.empty(shape)
    sl_even = [slice(None)] * 3
    sl_odd = [slice(None)] * 3
    sl_even[axis] = slice(0, None, 2)
    sl_odd[axis] = slice(1, None, 2)
    out[tuple(sl_even)] = even
    out[tuple(sl_odd)] = odd
    return out


def wavelet_decompose(vol: Volume3D) -> WaveletBands:
    parts = {"": _pad_even(vol.data)}
    for axis in range(3):
        nxt = {}
        for label, arr in parts.items():
            low, high = _haar_split(arr, axis)
            nxt[label + "L"] = low
            nxt[label + "H"] = high
        parts = nxt
    spacing = tuple(2.0 * s for s in vol.spacing)
    bands = {lab: Volume3D(parts[lab], spacing, vol.origin) for lab in BAND_LABELS}
    return WaveletBands(bands, vol.dims)


def wavelet_reconstruct(bands: WaveletBands, crop: bool = True) -> Volume3D:
    parts = {lab: bands[lab].data for lab in BAND_LABELS}
    for axis in (2, 1, 0):
        nxt = {}
        for label in sorted({lab[:axis] for lab in parts}):
            nxt[label] = _haar_merge(parts[label + "L"], parts[label + "H"], axis)
        parts = nxt
    data = parts[""]
    if crop:
        nx, ny, nz = bands.shape
        data = data[:nx, :ny, :nz]
    ref = bands["LLL"]
    spacing = tuple(s / 2.0 for s in ref.spacing)
    return Volume3D(data, spacing, ref.origin)


def downsample_mask(mask: Mask3D) -> Mask3D:
    """2x majority vote per 2x2x2 block (ties count as foreground) onto the wavelet grid.

    Falls back to "any voxel in block" if the vote would empty a non-empty mask.
    """
    vox = _pad_even(mask.voxels.astype(np.int8))
    nx, ny, nz = (n // 2 for n in vox.shape)
    counts = vox.reshape(nx, 2, ny, 2, nz, 2).sum(axis=(1, 3, 5))
    out = counts >= 4
    if not out.any() and counts.any():
        out = counts > 0
    return Mask3D(out)
