"""Univariate screening (Mann-Whitney U, chi-squared) and Spearman redundancy filtering."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaincc
from scipy.stats import rankdata

from .radfeat.base import CATEGORICAL, CONTINUOUS

MANN_WHITNEY = "mann_whitney"
CHI_SQUARED = "chi_squared"


class StatsError(ValueError):
    pass


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def mann_whitney_u(group0: Sequence[float], group1: Sequence[float]) -> Tuple[float, float]:
    """Mann-Whitney U of ``group1`` against ``group0`` with a two-sided normal-approximation p.

    Ties get average ranks; the variance carries the tie correction and a 0.5
    continuity correction is applied. Returns ``(U, p)``; ``p == 1`` when all
    pooled values are tied.
    """
    x0 = np.asarray(group0, dtype=float)
    x1 = np.asarray(group1, dtype=float)
    n0, n1 = x0.size, x1.size
    if n0 < 2 or n1 < 2:
        raise StatsError(f"Mann-Whitney needs at least 2 values per group, got {n0} and {n1}")
    ranks = rankdata(np.concatenate([x0, x1]))
    u = float(ranks[n0:].sum() - n1 * (n1 + 1) / 2.0)
    n = n0 + n1
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / (n * (n - 1))
    var = n0 * n1 / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return u, 1.0
    mean = n0 * n1 / 2.0
    z = max(abs(u - mean) - 0.5, 0.0) / math.sqrt(var)
    return u, min(1.0, 2.0 * _normal_sf(z))


def chi2_sf(x: float, df: int) -> float:
    return float(gammaincc(df / 2.0, x / 2.0)) if x > 0 else 1.0


def chi2_independence(categorical_feature: Sequence, labels: Sequence[int]) -> Tuple[float, float]:
    """Pearson chi-squared test on the 2 x K table of label vs category."""
    feat = np.asarray(categorical_feature)
    y = np.asarray(labels).astype(int)
    if feat.shape != y.shape:
        raise StatsError("feature and labels differ in length")
    cats, cat_idx = np.unique(feat, return_inverse=True)
    classes, cls_idx = np.unique(y, return_inverse=True)
    if cats.size < 2:
        raise StatsError("chi-squared test needs at least two categories")
    if classes.size != 2:
        raise StatsError("chi-squared test needs exactly two label classes")
    table = np.zeros((2, cats.size))
    np.add.at(table, (cls_idx, cat_idx), 1.0)
    return chi2_from_table(table)


def chi2_from_table(table) -> Tuple[float, float]:
    table = np.asarray(table, dtype=float)
    expected = table.sum(axis=1, keepdims=True) * table.sum(axis=0, keepdims=True) / table.sum()
    if np.any(expected == 0):
        raise StatsError("contingency table has a row or column with zero expected count")
    stat = float(((table - expected) ** 2 / expected).sum())
    df = (table.shape[0] - 1) * (table.shape[1] - 1)
    return stat, chi2_sf(stat, df)


def spearman_rho(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size < 3:
        raise StatsError("spearman_rho needs two vectors of equal length >= 3")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise StatsError("spearman_rho is undefined for a constant vector")
    return float(np.clip(np.corrcoef(rankdata(a), rankdata(b))[0, 1], -1.0, 1.0))


def spearman_matrix(X: np.ndarray) -> np.ndarray:
    """Column-wise Spearman correlation; constant columns get 0 off the diagonal."""
    R = np.apply_along_axis(rankdata, 0, np.asarray(X, dtype=float))
    R = R - R.mean(axis=0)
    norm = np.sqrt((R * R).sum(axis=0))
    safe = np.where(norm > 0, norm, 1.0)
    R = R / safe
    C = np.clip(R.T @ R, -1.0, 1.0)
    np.fill_diagonal(C, 1.0)
    return C


@dataclass(frozen=True)
class ScreeningEntry:
    feature: str
    kind: str
    test_kind: str
    statistic: float
    p_value: float
    degenerate: bool = False


@dataclass(frozen=True)
class ScreeningResult:
    entries: Tuple[ScreeningEntry, ...]

    def p_values(self) -> Dict[str, float]:
        return {e.feature: e.p_value for e in self.entries}

    def __getitem__(self, name: str) -> ScreeningEntry:
        for e in self.entries:
            if e.feature == name:
                return e
        raise KeyError(name)

    def __len__(self):
        return len(self.entries)


def univariate_screen(X: np.ndarray, labels: Sequence[int], names: Sequence[str], kinds: Sequence[str]) -> ScreeningResult:
    """Per-feature association with the binary label.

    Continuous features use Mann-Whitney U, categorical ones Pearson
    chi-squared. Features that cannot discriminate at all (constant columns)
    get ``p = 1`` and ``degenerate=True``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(labels).astype(int)
    if X.ndim != 2 or X.shape[1] == 0 or X.shape[0] != y.size:
        raise StatsError("feature matrix must be non-empty and match the labels")
    if set(np.unique(y)) != {0, 1}:
        raise StatsError("labels must be binary with both classes present")
    entries = []
    for j, (name, kind) in enumerate(zip(names, kinds)):
        col = X[:, j]
        if kind == CATEGORICAL:
            if np.unique(col).size < 2:
                entries.append(ScreeningEntry(name, kind, CHI_SQUARED, 0.0, 1.0, True))
                continue
            stat, p = chi2_independence(col, y)
            entries.append(ScreeningEntry(name, kind, CHI_SQUARED, stat, p))
        elif kind == CONTINUOUS:
            stat, p = mann_whitney_u(col[y == 0], col[y == 1])
            entries.append(ScreeningEntry(name, kind, MANN_WHITNEY, stat, p, bool(np.ptp(col) == 0)))
        else:
            raise StatsError(f"unknown feature kind {kind!r} for {name}")
    return ScreeningResult(tuple(entries))


def redundancy_filter(
    X: np.ndarray,
    names: Sequence[str],
    screening: ScreeningResult,
    threshold: float = 0.6,
    alpha: Optional[float] = None,
) -> List[str]:
    """Greedy collinearity pruning in order of ascending p-value.

    A continuous feature is kept when its absolute Spearman correlation with
    every continuous feature already kept is at most ``threshold``;
    categorical features are never pruned for correlation. With ``alpha``,
    features with ``p >= alpha`` are dropped first. Returns the kept names in
    the order they were accepted.
    """
    if not 0 < threshold <= 1:
        raise StatsError("threshold must lie in (0, 1]")
    X = np.asarray(X, dtype=float)
    pvals = screening.p_values()
    kinds = {e.feature: e.kind for e in screening.entries}
    missing = [n for n in names if n not in pvals]
    if missing:
        raise StatsError(f"screening result lacks features: {missing[:5]}")
    col = {n: j for j, n in enumerate(names)}
    order = sorted(names, key=lambda n: (pvals[n], n))
    if alpha is not None:
        order = [n for n in order if pvals[n] < alpha]

    cont = [n for n in order if kinds[n] == CONTINUOUS]
    corr = spearman_matrix(X[:, [col[n] for n in cont]]) if cont else np.zeros((0, 0))
    pos = {n: i for i, n in enumerate(cont)}

    kept: List[str] = []
    kept_cont: List[int] = []
    for n in order:
        if kinds[n] != CONTINUOUS:
            kept.append(n)
            continue
        i = pos[n]
        if kept_cont and np.any(np.abs(corr[i, kept_cont]) > threshold):
            continue
        kept.append(n)
        kept_cont.append(i)
    return kept


def write_screen_report(path, screening: ScreeningResult, kept: Sequence[str]) -> None:
    kept = set(kept)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "kind", "statistic", "p_value", "kept"])
        for e in screening.entries:
            w.writerow([e.feature, e.kind, repr(e.statistic), repr(e.p_value), int(e.feature in kept)])
