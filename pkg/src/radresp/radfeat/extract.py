from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Tuple

from ..imgfilt import BAND_LABELS, downsample_mask, log_filter, wavelet_decompose
from ..imgvol import (
    Mask3D,
    Volume3D,
    check_pair,
    correct_bias_field,
    resample_mask_nearest,
    resample_trilinear,
    zscore_normalize,
)
from .base import EmptyMaskError, FeatureVector, discretize
from .firstorder import FIRSTORDER_FEATURES, firstorder_features
from .shape import SHAPE_FEATURES, shape_features
from .texture import GLCM_FEATURES, GLRLM_FEATURES, GLSZM_FEATURES, glcm_features, glrlm_features, glszm_features


@dataclass(frozen=True)
class ExtractionConfig:
    n_bins: int = 32
    log_sigmas_mm: Tuple[float, ...] = (1.0, 3.0, 5.0)
    wavelet: bool = True
    wavelet_basis: str = "haar"
    target_spacing_mm: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    bias_degree: int = 2

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if any(not s > 0 for s in self.log_sigmas_mm):
            raise ValueError("LoG sigmas must be positive")
        if self.wavelet_basis != "haar":
            raise ValueError(f"unsupported wavelet basis {self.wavelet_basis!r}; only 'haar' is implemented")

    def image_types(self) -> Tuple[str, ...]:
        names = ["original"] + [log_image_name(s) for s in self.log_sigmas_mm]
        if self.wavelet:
            names += [f"wavelet-{b}" for b in BAND_LABELS]
        return tuple(names)


def log_image_name(sigma: float) -> str:
    return "log-sigma-" + f"{float(sigma):g}".replace(".", "-") + "-mm"


def feature_names(config: ExtractionConfig = ExtractionConfig()) -> Tuple[str, ...]:
    names = [f"original_shape_{f}" for f in SHAPE_FEATURES]
    families = (
        ("firstorder", FIRSTORDER_FEATURES),
        ("glcm", GLCM_FEATURES),
        ("glrlm", GLRLM_FEATURES),
        ("glszm", GLSZM_FEATURES),
    )
    for image in config.image_types():
        for family, feats in families:
            names += [f"{image}_{family}_{f}" for f in feats]
    return tuple(names)


def preprocess(vol: Volume3D, mask: Mask3D, config: ExtractionConfig = ExtractionConfig()):
    """Resample to the target spacing, remove the bias field under the ROI, z-score."""
    check_pair(vol, mask)
    if mask.count == 0:
        raise EmptyMaskError("mask has no foreground voxels")
    spacing = tuple(config.target_spacing_mm)
    if vol.spacing != spacing:
        mask = resample_mask_nearest(mask, vol.spacing, spacing)
        vol = resample_trilinear(vol, spacing)
        if mask.count == 0:
            raise EmptyMaskError("mask vanished after resampling")
    vol = correct_bias_field(vol, mask, config.bias_degree)
    vol, _ = zscore_normalize(vol)
    return vol, mask


def derived_images(vol: Volume3D, mask: Mask3D, config: ExtractionConfig) -> Iterator[Tuple[str, Volume3D, Mask3D]]:
    yield "original", vol, mask
    for sigma in config.log_sigmas_mm:
        yield log_image_name(sigma), log_filter(vol, sigma), mask
    if config.wavelet:
        bands = wavelet_decompose(vol)
        band_mask = downsample_mask(mask)
        for label in BAND_LABELS:
            yield f"wavelet-{label}", bands[label], band_mask


def extract_all(vol: Volume3D, mask: Mask3D, config: ExtractionConfig = ExtractionConfig()) -> FeatureVector:
    """Full feature vector of an already preprocessed volume.

    Shape features come from the mask once; the four intensity/texture
    families are computed for the original image and every derived image.
    """
    check_pair(vol, mask)
    if mask.count == 0:
        raise EmptyMaskError("mask has no foreground voxels")
    out = FeatureVector()
    out.extend(shape_features(mask, vol.spacing), prefix="original_shape_")
    for image, img, roi in derived_images(vol, mask, config):
        droi = discretize(img, roi, config.n_bins)
        out.extend(firstorder_features(img, roi, config.n_bins), prefix=f"{image}_firstorder_")
        out.extend(glcm_features(droi), prefix=f"{image}_glcm_")
        out.extend(glrlm_features(droi), prefix=f"{image}_glrlm_")
        out.extend(glszm_features(droi), prefix=f"{image}_glszm_")
    return out


def extract_patient(vol: Volume3D, mask: Mask3D, config: ExtractionConfig = ExtractionConfig()) -> FeatureVector:
    vol, mask = preprocess(vol, mask, config)
    return extract_all(vol, mask, config)

