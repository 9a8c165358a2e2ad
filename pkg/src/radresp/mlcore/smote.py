from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .models import Dataset, ModelError


def smote(data: Dataset, k: int = 5, seed: int = 0) -> Dataset:
    """Oversample the minority class with SMOTE until both classes are equal in size.

    Each synthetic row is ``x + lam * (nn - x)`` for a random minority sample
    ``x``, one of its ``k`` nearest minority neighbours ``nn`` (Euclidean,
    ties by index) and ``lam ~ U[0, 1]``. ``k`` is clamped to
    ``minority_count - 1``. Synthetic rows are appended after the originals.
    """
    n0, n1 = data.class_counts()
    if n0 == n1:
        return data
    minority = 0 if n0 < n1 else 1
    n_min, n_maj = min(n0, n1), max(n0, n1)
    if n_min < 2:
        raise ModelError(f"SMOTE needs at least 2 minority samples, got {n_min}")
    if k < 1:
        raise ModelError("k must be >= 1")
    k = min(k, n_min - 1)

    P = data.X[data.y == minority]
    dist = cdist(P, P)
    np.fill_diagonal(dist, np.inf)
    neighbours = np.argsort(dist, axis=1, kind="stable")[:, :k]

    rng = np.random.default_rng(seed)
    n_new = n_maj - n_min
    base = rng.integers(0, n_min, n_new)
    pick = neighbours[base, rng.integers(0, k, n_new)]
    lam = rng.random(n_new)[:, None]
    synth = P[base] + lam * (P[pick] - P[base])

    X = np.vstack([data.X, synth])
    y = np.concatenate([data.y, np.full(n_new, minority)])
    return Dataset(X, y, list(data.names))
