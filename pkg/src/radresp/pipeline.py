"""Cohort-level extraction: per-patient preprocessing and features plus clinical columns."""
from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Dict, List

import numpy as np

from .imgvol import load_volume
from .radfeat import CATEGORICAL, CONTINUOUS, ExtractionConfig, extract_patient, feature_names
from .table import FeatureTable

log = logging.getLogger(__name__)

CLINICAL_FEATURES = (
    ("clinical_age", "age", CONTINUOUS),
    ("clinical_dose_gy", "dose_gy", CONTINUOUS),
    ("clinical_sex", "sex", CATEGORICAL),
)


class PatientError(RuntimeError):
    def __init__(self, patient_id: str, reason: str):
        super().__init__(f"patient {patient_id}: {reason}")
        self.patient_id = patient_id


def read_clinical(path) -> List[Dict[str, str]]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"clinical table not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no patients")
    required = {"patient_id", "label"}
    missing = required - set(rows[0])
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    return rows


def _encode_clinical(row: Dict[str, str], column: str, kind: str) -> float:
    raw = row[column]
    if kind == CATEGORICAL and column == "sex":
        if raw not in ("F", "M"):
            raise ValueError(f"sex must be F or M, got {raw!r}")
        return 1.0 if raw == "F" else 0.0
    return float(raw)


def extract_cohort(cohort_dir, config: ExtractionConfig = ExtractionConfig()) -> FeatureTable:
    """Feature table for every patient listed in ``<cohort_dir>/clinical.csv``.

    Image features follow :func:`radresp.radfeat.feature_names`; the clinical
    columns present in the CSV are appended. Any failing patient aborts the
    run with a :class:`PatientError` naming it.
    """
    cohort_dir = Path(cohort_dir)
    rows = read_clinical(cohort_dir / "clinical.csv")
    image_names = list(feature_names(config))
    clinical = [c for c in CLINICAL_FEATURES if c[1] in rows[0]]

    ids, labels, matrix = [], [], []
    for row in rows:
        pid = row["patient_id"]
        try:
            vol, mask = load_volume(cohort_dir / f"{pid}.json")
            if mask is None:
                raise ValueError("volume header references no mask file")
            fv = extract_patient(vol, mask, config)
            if fv.names != image_names:
                raise ValueError("unexpected feature layout")
            values = list(fv.values) + [_encode_clinical(row, col, kind) for _, col, kind in clinical]
            label = int(row["label"])
            if label not in (0, 1):
                raise ValueError(f"label must be 0 or 1, got {label}")
        except Exception as exc:
            raise PatientError(pid, str(exc)) from exc
        ids.append(pid)
        labels.append(label)
        matrix.append(values)
        log.info("extracted %s", pid)

    return _assemble(ids, labels, matrix, image_names, clinical)


def _assemble(ids, labels, matrix, image_names, clinical) -> FeatureTable:
    names = image_names + [name for name, _, _ in clinical]
    kinds = [CONTINUOUS] * len(image_names) + [kind for _, _, kind in clinical]
    return FeatureTable(ids, np.array(labels), names, kinds, np.array(matrix))


def table_from_patients(patients, config: ExtractionConfig = ExtractionConfig()) -> FeatureTable:
    """Same table as :func:`extract_cohort`, built from in-memory :class:`~radresp.synth.Patient` records."""
    image_names = list(feature_names(config))
    ids, labels, matrix = [], [], []
    for p in patients:
        try:
            fv = extract_patient(p.volume, p.mask, config)
        except Exception as exc:
            raise PatientError(p.patient_id, str(exc)) from exc
        row = {"age": p.age, "dose_gy": p.dose_gy, "sex": p.sex}
        ids.append(p.patient_id)
        labels.append(p.label)
        matrix.append(list(fv.values) + [_encode_clinical(row, col, kind) for _, col, kind in CLINICAL_FEATURES])
    return _assemble(ids, labels, matrix, image_names, CLINICAL_FEATURES)
