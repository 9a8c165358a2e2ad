from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Tuple

import numpy as np

from ..imgvol import Mask3D, Volume3D, check_pair

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


class FeatureError(ValueError):
    """Feature family cannot be computed for the given ROI."""


class EmptyMaskError(FeatureError):
    pass


@dataclass
class FeatureVector:
    """Ordered (name, value, kind) triples with unique names."""

    names: List[str] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    kinds: List[str] = field(default_factory=list)

    def add(self, name: str, value: float, kind: str = CONTINUOUS) -> None:
        value = float(value)
        if not np.isfinite(value):
            raise FeatureError(f"feature {name} is not finite ({value})")
        if name in self.names:
            raise FeatureError(f"duplicate feature name {name}")
        self.names.append(name)
        self.values.append(value)
        self.kinds.append(kind)

    def extend(self, other: "FeatureVector", prefix: str = "") -> None:
        for n, v, k in other:
            self.add(prefix + n, v, k)

    def __iter__(self) -> Iterable[Tuple[str, float, str]]:
        return iter(zip(self.names, self.values, self.kinds))

    def __len__(self):
        return len(self.names)

    def __getitem__(self, name: str) -> float:
        try:
            return self.values[self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def as_dict(self):
        return dict(zip(self.names, self.values))


@dataclass(frozen=True)
class DiscretizedROI:
    """Gray levels (1..n_levels) of the masked voxels plus their grid positions.

    ``image`` holds the levels on a cropped grid with a one-voxel zero border;
    0 marks voxels outside the mask.
    """

    levels: np.ndarray
    coords: np.ndarray
    n_levels: int
    spacing: Tuple[float, float, float]
    image: np.ndarray

    @property
    def n_voxels(self) -> int:
        return int(self.levels.size)


def masked_values(vol: Volume3D, mask: Mask3D) -> np.ndarray:
    check_pair(vol, mask)
    if not mask.voxels.any():
        raise EmptyMaskError("mask has no foreground voxels")
    return vol.data[mask.voxels]


def bin_levels(values: np.ndarray, n_bins: int) -> Tuple[np.ndarray, int]:
    """Fixed bin count discretization; returns (levels in 1..Ng, Ng).

    A constant input maps to level 1 with Ng = 1.
    """
    if n_bins < 2:
        raise FeatureError(f"n_bins must be >= 2, got {n_bins}")
    lo, hi = float(values.min()), float(values.max())
    if hi - lo <= 0:
        return np.ones(values.shape, dtype=np.int64), 1
    levels = np.floor((values - lo) * n_bins / (hi - lo)).astype(np.int64) + 1
    return np.minimum(levels, n_bins), n_bins


def discretize(vol: Volume3D, mask: Mask3D, n_bins: int = 32) -> DiscretizedROI:
    values = masked_values(vol, mask)
    levels, ng = bin_levels(values, n_bins)
    coords = np.argwhere(mask.voxels)
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    shape = tuple(int(h - l + 3) for l, h in zip(lo, hi))
    image = np.zeros(shape, dtype=np.int64)
    local = coords - lo + 1
    image[local[:, 0], local[:, 1], local[:, 2]] = levels
    return DiscretizedROI(levels, coords, ng, vol.spacing, image)
