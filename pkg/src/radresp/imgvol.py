"""Volume and mask containers, raw/JSON file I/O, resampling and intensity preprocessing.

Arrays are indexed ``[x, y, z]`` with shape ``(nx, ny, nz)``; on disk the voxels
are stored x-fastest (Fortran order) as little-endian float32 (image) or uint8
(mask).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

Triple = Tuple[float, float, float]


class VolumeError(ValueError):
    """Invalid volume data, geometry or file contents."""


class DegenerateInputError(VolumeError):
    """Input has no usable variation (e.g. constant image for z-scoring)."""


@dataclass(frozen=True)
class Volume3D:
    data: np.ndarray
    spacing: Triple = (1.0, 1.0, 1.0)
    origin: Triple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise VolumeError(f"volume data must be a non-empty 3D array, got shape {data.shape}")
        if len(self.spacing) != 3 or any(not s > 0 for s in self.spacing):
            raise VolumeError(f"spacing must be three positive values, got {self.spacing}")
        if not np.all(np.isfinite(data)):
            raise VolumeError("volume contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @property
    def dims(self) -> Tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)

    def with_data(self, data: np.ndarray) -> "Volume3D":
        return Volume3D(data, self.spacing, self.origin)


@dataclass(frozen=True)
class Mask3D:
    voxels: np.ndarray

    def __post_init__(self):
        vox = np.asarray(self.voxels)
        if vox.ndim != 3 or min(vox.shape) < 1:
            raise VolumeError(f"mask must be a non-empty 3D array, got shape {vox.shape}")
        vox = vox.astype(bool)
        vox.setflags(write=False)
        object.__setattr__(self, "voxels", vox)

    @property
    def dims(self) -> Tuple[int, int, int]:
        return tuple(int(n) for n in self.voxels.shape)

    @property
    def count(self) -> int:
        return int(self.voxels.sum())


@dataclass(frozen=True)
class NormalizationParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise VolumeError("sigma must be positive")

    def inverse(self, vol: Volume3D) -> Volume3D:
        return vol.with_data(vol.data * self.sigma + self.mu)


def check_pair(vol: Volume3D, mask: Mask3D) -> None:
    if vol.dims != mask.dims:
        raise VolumeError(f"mask dims {mask.dims} do not match volume dims {vol.dims}")


# --------------------------------------------------------------------------- I/O

def save_volume(vol: Volume3D, mask: Optional[Mask3D], path) -> None:
    """Write ``<stem>.json`` header plus ``<stem>.raw`` (and ``<stem>_mask.raw``).

    ``path`` is the header path; raw files are placed next to it.
    """
    path = Path(path)
    if mask is not None:
        check_pair(vol, mask)
    stem = path.stem
    header = {
        "dims": list(vol.dims),
        "spacing_mm": list(vol.spacing),
        "origin_mm": list(vol.origin),
        "data_file": f"{stem}.raw",
    }
    if mask is not None:
        header["mask_file"] = f"{stem}_mask.raw"
    raw = np.asarray(vol.data, dtype="<f4").ravel(order="F").tobytes()
    try:
        (path.parent / header["data_file"]).write_bytes(raw)
        if mask is not None:
            mraw = mask.voxels.astype("u1").ravel(order="F").tobytes()
            (path.parent / header["mask_file"]).write_bytes(mraw)
        path.write_text(json.dumps(header, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write volume to {path}: {exc}") from exc


def load_volume(path) -> Tuple[Volume3D, Optional[Mask3D]]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"volume header not found: {path}")
    header = json.loads(path.read_text())
    try:
        dims = tuple(int(n) for n in header["dims"])
        spacing = tuple(float(s) for s in header["spacing_mm"])
        origin = tuple(float(o) for o in header.get("origin_mm", (0.0, 0.0, 0.0)))
        data_file = header["data_file"]
    except (KeyError, TypeError, ValueError) as exc:
        raise VolumeError(f"malformed volume header {path}: {exc}") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise VolumeError(f"invalid dims {dims} in {path}")
    n = dims[0] * dims[1] * dims[2]

    data_path = path.parent / data_file
    if not data_path.is_file():
        raise FileNotFoundError(f"raw data file not found: {data_path}")
    raw = np.fromfile(data_path, dtype="<f4")
    if raw.size != n:
        raise VolumeError(f"{data_path}: expected {n} float32 values for dims {dims}, found {raw.size}")
    if not np.all(np.isfinite(raw)):
        raise VolumeError(f"{data_path}: non-finite voxel values")
    vol = Volume3D(raw.reshape(dims, order="F"), spacing, origin)

    mask = None
    if header.get("mask_file"):
        mask_path = path.parent / header["mask_file"]
        if not mask_path.is_file():
            raise FileNotFoundError(f"mask file not found: {mask_path}")
        mraw = np.fromfile(mask_path, dtype="u1")
        if mraw.size != n:
            raise VolumeError(f"{mask_path}: expected {n} mask bytes, found {mraw.size}")
        if np.any(mraw > 1):
            raise VolumeError(f"{mask_path}: mask values must be 0 or 1")
        mask = Mask3D(mraw.reshape(dims, order="F"))
    return vol, mask


# -------------------------------------------------------------------- resampling

def resampled_dims(dims: Sequence[int], spacing_old: Sequence[float], spacing_new: Sequence[float]):
    out = []
    for n, s_old, s_new in zip(dims, spacing_old, spacing_new):
        if not s_new > 0:
            raise VolumeError(f"target spacing must be positive, got {spacing_new}")
        # small slack so e.g. 4*2/1 does not floor to 7.999...
        m = int(math.floor((n - 1) * s_old / s_new + 1e-9)) + 1
        if m < 1:
            raise VolumeError("resampled grid would be empty")
        out.append(m)
    return tuple(out)


def _source_coords(n_out: int, n_in: int, s_old: float, s_new: float) -> np.ndarray:
    return np.clip(np.arange(n_out) * (s_new / s_old), 0.0, n_in - 1)


def resample_trilinear(vol: Volume3D, target_spacing: Sequence[float]) -> Volume3D:
    """Trilinear resampling onto a grid sharing the first voxel center.

    Queries outside the input grid are clamped to the edge voxels.
    """
    target_spacing = tuple(float(s) for s in target_spacing)
    out_dims = resampled_dims(vol.dims, vol.spacing, target_spacing)
    data = vol.data
    for axis in range(3):
        n_in = data.shape[axis]
        pos = _source_coords(out_dims[axis], n_in, vol.spacing[axis], target_spacing[axis])
        i0 = np.floor(pos).astype(int)
        i0 = np.minimum(i0, n_in - 1)
        i1 = np.minimum(i0 + 1, n_in - 1)
        frac = pos - i0
        shape = [1, 1, 1]
        shape[axis] = -1
        frac = frac.reshape(shape)
        data = np.take(data, i0, axis=axis) * (1.0 - frac) + np.take(data, i1, axis=axis) * frac
    return Volume3D(data, target_spacing, vol.origin)


def resample_mask_nearest(mask: Mask3D, spacing_old: Sequence[float], target_spacing: Sequence[float]) -> Mask3D:
    """Nearest-neighbour companion of :func:`resample_trilinear`.

    Exact half-way ties go to the higher input index.
    """
    target_spacing = tuple(float(s) for s in target_spacing)
    out_dims = resampled_dims(mask.dims, spacing_old, target_spacing)
    vox = mask.voxels
    for axis in range(3):
        n_in = vox.shape[axis]
        pos = _source_coords(out_dims[axis], n_in, spacing_old[axis], target_spacing[axis])
        idx = np.minimum(np.floor(pos + 0.5 + 1e-12).astype(int), n_in - 1)
        vox = np.take(vox, idx, axis=axis)
    return Mask3D(vox)


# ----------------------------------------------------------------- intensities

SIGMA_TOL = 1e-12


def zscore_normalize(vol: Volume3D) -> Tuple[Volume3D, NormalizationParams]:
    data = vol.data
    if data.size < 2:
        raise DegenerateInputError("z-score needs at least two voxels")
    mu = float(data.mean())
    sigma = float(data.std())
    if sigma < SIGMA_TOL:
        raise DegenerateInputError(f"intensity std {sigma:g} below tolerance; image is constant")
    return vol.with_data((data - mu) / sigma), NormalizationParams(mu, sigma)


def _poly_exponents(degree: int):
    return [e for e in product(range(degree + 1), repeat=3) if sum(e) <= degree]


def _normalized_axes(dims):
    return [np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1) for n in dims]


def correct_bias_field(vol: Volume3D, mask: Mask3D, degree: int = 2) -> Volume3D:
    """Remove a smooth multiplicative bias field.

    A polynomial of total degree ``degree`` in grid coordinates scaled to
    [-1, 1] is fitted by least squares to the log-intensities under ``mask``.
    The volume is divided by the exponentiated field and rescaled so the
    masked mean intensity is unchanged.
    """
    check_pair(vol, mask)
    if degree not in (1, 2, 3):
        raise VolumeError(f"degree must be 1, 2 or 3, got {degree}")
    sel = mask.voxels
    if not sel.any():
        raise VolumeError("bias correction mask is empty")
    vals = vol.data[sel]
    if np.any(vals <= 0):
        raise VolumeError("bias correction needs strictly positive intensities inside the mask")

    ax = _normalized_axes(vol.dims)
    exps = _poly_exponents(degree)
    idx = np.nonzero(sel)
    design = np.column_stack([ax[0][idx[0]] ** a * ax[1][idx[1]] ** b * ax[2][idx[2]] ** c for a, b, c in exps])
    gram = design.T @ design
    if np.linalg.matrix_rank(gram) < len(exps):
        raise VolumeError("bias field fit is rank deficient for this mask/degree")
    coef = np.linalg.solve(gram, design.T @ np.log(vals))

    field = np.zeros(vol.dims)
    for (a, b, c), w in zip(exps, coef):
        field += w * (ax[0][:, None, None] ** a) * (ax[1][None, :, None] ** b) * (ax[2][None, None, :] ** c)
    corrected = vol.data / np.exp(field - field[sel].mean())
    corrected *= vals.mean() / corrected[sel].mean()
    return vol.with_data(corrected)


def full_mask(vol: Volume3D) -> Mask3D:
    return Mask3D(np.ones(vol.dims, dtype=bool))
