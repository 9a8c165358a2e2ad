"""Synthetic phantom cohorts with a controllable texture and clinical signal.

Each patient is a 3D volume with an ellipsoidal lesion. The lesion texture is
Gaussian-smoothed noise whose correlation length depends on the label (scaled
by ``texture_effect``); its amplitude is normalised so mean and variance carry
no label information. Labels come from simulated baseline/follow-up lesion
volumes through :func:`label_from_volumes`.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.ndimage import gaussian_filter

from .imgvol import Mask3D, Volume3D, save_volume

PR, SD, PD = "PR", "SD", "PD"
CLINICAL_COLUMNS = ("patient_id", "age", "dose_gy", "sex", "label", "sublabel")

# correlation length (mm) of the lesion texture: centre, class shift at effect 1, jitter half-width
_CORR_MID, _CORR_SHIFT, _CORR_JITTER = 1.8, 0.6, 0.5
_PD_SHARE = 5 / 37  # PD among non-responders in the reference cohort


class CohortSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_patients: int = Field(104, ge=4)
    responder_fraction: float = 0.644
    dims: Tuple[int, int, int] = (64, 64, 64)
    spacing_mm: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    lesion_radius_mm: Tuple[float, float] = (6.0, 12.0)
    texture_effect: float = Field(0.0, ge=0.0, le=1.0)
    clinical_effect: float = Field(0.0, ge=0.0, le=1.0)
    bias_amplitude: float = Field(0.1, ge=0.0, lt=0.5)
    seed: int = 0

    @field_validator("responder_fraction")
    @classmethod
    def _fraction(cls, v):
        if not 0 < v < 1:
            raise ValueError("responder_fraction must lie strictly between 0 and 1")
        return v

    @field_validator("dims")
    @classmethod
    def _dims(cls, v):
        if min(v) < 16:
            raise ValueError("every volume dimension must be >= 16")
        return v

    @field_validator("spacing_mm")
    @classmethod
    def _spacing(cls, v):
        if min(v) <= 0:
            raise ValueError("spacing must be positive")
        return v

    @model_validator(mode="after")
    def _lesion_fits(self):
        lo, hi = self.lesion_radius_mm
        if not 0 < lo <= hi:
            raise ValueError("lesion_radius_mm must be (min, max) with 0 < min <= max")
        extent = min((n - 1) * s for n, s in zip(self.dims, self.spacing_mm))
        if 2 * hi + 2 * max(self.spacing_mm) > extent:
            raise ValueError(f"lesion radius {hi} mm does not fit a volume extent of {extent} mm")
        n_pos = round(self.responder_fraction * self.n_patients)
        if n_pos < 2 or self.n_patients - n_pos < 2:
            raise ValueError("both classes need at least 2 patients")
        return self

    @property
    def n_responders(self) -> int:
        return int(round(self.responder_fraction * self.n_patients))


def label_from_volumes(v_baseline_cc: float, v_followup_cc: float) -> Tuple[int, str]:
    """Binary response from the relative volume change: (1, 'PR') below -20 %, else (0, 'SD'/'PD')."""
    if not (v_baseline_cc > 0 and v_followup_cc > 0):
        raise ValueError("tumour volumes must be positive")
    change = (v_followup_cc - v_baseline_cc) / v_baseline_cc
    if change < -0.20:
        return 1, PR
    if change > 0.20:
        return 0, PD
    return 0, SD


@dataclass
class Patient:
    patient_id: str
    volume: Volume3D
    mask: Mask3D
    age: float
    dose_gy: float
    sex: str
    label: int
    sublabel: str
    baseline_cc: float
    followup_cc: float
    radii_mm: Tuple[float, float, float]


def _ellipsoid(spec: CohortSpec, rng):
    lo, hi = spec.lesion_radius_mm
    radii = rng.uniform(lo, hi, 3)
    sp = np.asarray(spec.spacing_mm)
    extent = (np.asarray(spec.dims) - 1) * sp
    margin = radii.max() + sp.max()
    center = np.array([rng.uniform(margin, e - margin) if e > 2 * margin else e / 2 for e in extent])
    axes = [np.arange(n) * s for n, s in zip(spec.dims, sp)]
    r2 = sum(((ax - c) / r)[tuple(slice(None) if a == k else None for a in range(3))] ** 2
             for k, (ax, c, r) in enumerate(zip(axes, center, radii)))
    return r2 <= 1.0, tuple(float(r) for r in radii)


def _bias_field(spec: CohortSpec, rng) -> np.ndarray:
    coords = np.meshgrid(*[np.linspace(-1, 1, n) for n in spec.dims], indexing="ij")
    g = rng.normal(size=3)
    q = rng.normal(size=3)
    field = sum(g[i] * coords[i] + 0.5 * q[i] * coords[i] ** 2 for i in range(3))
    field /= max(np.abs(field).max(), 1e-12)
    return 1.0 + spec.bias_amplitude * field


def _volume_change(sublabel: str, rng) -> float:
    if sublabel == PR:
        return rng.uniform(-0.6, -0.21)
    if sublabel == PD:
        return rng.uniform(0.21, 0.6)
    return rng.uniform(-0.19, 0.19)


def _patient_seed(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, 7919, i]))


def generate_cohort(spec: CohortSpec) -> List[Patient]:
    """Build the cohort in memory; identical specs give identical patients."""
    n = spec.n_patients
    label_rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
    labels = np.zeros(n, dtype=np.int64)
    labels[label_rng.permutation(n)[: spec.n_responders]] = 1
    subl = [PR if y else (PD if label_rng.random() < _PD_SHARE else SD) for y in labels]

    te, ce = spec.texture_effect, spec.clinical_effect
    patients = []
    for i in range(n):
        rng = _patient_seed(spec.seed, i)
        y = int(labels[i])
        sign = 1.0 if y == 1 else -1.0

        mask, radii = _ellipsoid(spec, rng)
        corr_mm = _CORR_MID - sign * te * _CORR_SHIFT + rng.uniform(-_CORR_JITTER, _CORR_JITTER)
        sigma_vox = [corr_mm / s for s in spec.spacing_mm]
        tex = gaussian_filter(rng.standard_normal(spec.dims), sigma_vox, mode="wrap")
        tex = (tex - tex[mask].mean()) / tex[mask].std()
        data = rng.normal(50.0, 5.0, spec.dims)
        data[mask] = 100.0 + 15.0 * tex[mask]
        data = np.clip(data, 1.0, None) * _bias_field(spec, rng)

        age = float(np.clip(rng.normal(57.0 - sign * ce * 8.0, 12.0), 19.8, 86.8))
        dose = float(np.clip(rng.normal(27.5 + sign * ce * 1.2, 1.8), 21.9, 30.8))
        p_female = 0.808 + sign * ce * 0.15
        sex = "F" if rng.random() < p_female else "M"

        baseline = float(mask.sum() * np.prod(spec.spacing_mm) / 1000.0)
        followup = baseline * (1.0 + _volume_change(subl[i], rng))
        label, sub = label_from_volumes(baseline, followup)
        if (label, sub) != (y, subl[i]):
            raise RuntimeError(f"simulated volume change does not reproduce label of patient {i}")

        patients.append(
            Patient(
                f"P{i + 1:03d}",
                Volume3D(data.astype(np.float32), spec.spacing_mm),
                Mask3D(mask),
                round(age, 1),
                round(dose, 2),
                sex,
                label,
                sub,
                baseline,
                followup,
                radii,
            )
        )
    return patients


def write_cohort(spec: CohortSpec, out_dir) -> List[Path]:
    """Write ``<id>.json``/``.raw``/``_mask.raw`` per patient plus ``clinical.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    patients = generate_cohort(spec)
    written = []
    for p in patients:
        header = out_dir / f"{p.patient_id}.json"
        save_volume(p.volume, p.mask, header)
        written.append(header)
    clinical = out_dir / "clinical.csv"
    with open(clinical, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CLINICAL_COLUMNS)
        for p in patients:
            w.writerow([p.patient_id, repr(p.age), repr(p.dose_gy), p.sex, p.label, p.sublabel])
    written.append(clinical)
    return written


def ellipsoid_volume_cc(radii_mm) -> float:
    a, b, c = radii_mm
    return 4.0 / 3.0 * math.pi * a * b * c / 1000.0
