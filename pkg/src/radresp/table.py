"""FeatureTable: patients x named features with kind tags, plus binary labels.

CSV layout: ``patient_id,label,<feature...>``, one row per patient, floats
written with ``repr`` so the text is locale independent and round-trips
exactly. Feature kinds go to a ``<csv>.kinds.json`` sidecar.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .radfeat.base import CATEGORICAL, CONTINUOUS


class TableError(ValueError):
    pass


@dataclass
class FeatureTable:
    patient_ids: List[str]
    labels: np.ndarray
    names: List[str]
    kinds: List[str]
    X: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.labels = np.asarray(self.labels).astype(np.int64)
        n, d = self.X.shape
        if len(self.patient_ids) != n or self.labels.size != n:
            raise TableError("row count mismatch between ids, labels and features")
        if len(self.names) != d or len(self.kinds) != d:
            raise TableError("column count mismatch between names, kinds and features")
        if len(set(self.names)) != d:
            raise TableError("feature names must be unique")
        bad = set(self.kinds) - {CONTINUOUS, CATEGORICAL}
        if bad:
            raise TableError(f"unknown feature kinds {sorted(bad)}")
        if not np.all(np.isfinite(self.X)):
            raise TableError("feature table contains non-finite values")

    @property
    def n_patients(self) -> int:
        return self.X.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.names.index(name)]

    def select(self, names: Sequence[str]) -> "FeatureTable":
        idx = [self.names.index(n) for n in names]
        return FeatureTable(self.patient_ids, self.labels, list(names), [self.kinds[i] for i in idx], self.X[:, idx])

    def to_csv(self, path) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["patient_id", "label"] + self.names)
            for pid, lab, row in zip(self.patient_ids, self.labels, self.X):
                w.writerow([pid, int(lab)] + [repr(float(v)) for v in row])
        kinds_path(path).write_text(json.dumps(dict(zip(self.names, self.kinds)), indent=1) + "\n")

    @classmethod
    def from_csv(cls, path, categorical: Optional[Iterable[str]] = None) -> "FeatureTable":
        """Read a table; kinds come from the sidecar or, failing that, ``categorical``."""
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"feature table not found: {path}")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][:2] != ["patient_id", "label"]:
            raise TableError(f"{path}: header must start with patient_id,label")
        names = rows[0][2:]
        body = rows[1:]
        if not body:
            raise TableError(f"{path}: no patient rows")
        try:
            ids = [r[0] for r in body]
            labels = np.array([int(r[1]) for r in body])
            X = np.array([[float(v) for v in r[2:]] for r in body])
        except (ValueError, IndexError) as exc:
            raise TableError(f"{path}: malformed row: {exc}") from exc
        if X.shape != (len(body), len(names)):
            raise TableError(f"{path}: ragged rows")
        side = kinds_path(path)
        if side.is_file():
            mapping = json.loads(side.read_text())
            kinds = [mapping.get(n, CONTINUOUS) for n in names]
        else:
            cat = set(categorical or ())
            kinds = [CATEGORICAL if n in cat else CONTINUOUS for n in names]
        return cls(ids, labels, names, kinds, X)


def kinds_path(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.name + ".kinds.json")
