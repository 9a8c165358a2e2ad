"""Leakage-free nested cross-validation with wrapper feature selection.

Per outer fold, everything that learns from labels (univariate screening,
redundancy pruning, sequential forward selection, SMOTE and the final fit)
sees only the outer-training rows. The outer-test rows are touched once, when
the fitted model scores them.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .mlcore import METRIC_NAMES, Dataset, MetricSet, classification_metrics, fit_model, roc_auc, smote
from .mlcore.models import DEFAULT_PARAMS, MODEL_KINDS
from .stats import redundancy_filter, univariate_screen

log = logging.getLogger(__name__)

Tracer = Callable[[str, int, np.ndarray], None]


class NcvError(ValueError):
    pass


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


# ----------------------------------------------------------------------- folds

@dataclass(frozen=True)
class FoldPlan:
    test_folds: Tuple[np.ndarray, ...]
    n: int
    seed: int

    @property
    def k(self) -> int:
        return len(self.test_folds)

    def test(self, i: int) -> np.ndarray:
        return self.test_folds[i]

    def train(self, i: int) -> np.ndarray:
        keep = np.ones(self.n, dtype=bool)
        keep[self.test_folds[i]] = False
        return np.flatnonzero(keep)


def stratified_kfold(labels, k: int, seed: int = 0) -> FoldPlan:
    """Shuffle each class with ``seed`` and deal its members round-robin into ``k`` folds.

    Dealing continues across classes (class 1 starts where class 0 stopped) so
    fold sizes differ by at most one.  Any ``k`` up to the sample count is
    accepted; ``k == n`` is leave-one-out, and when a class has fewer than
    ``k`` members some folds simply lack that class.
    """
    y = np.asarray(labels).astype(np.int64)
    if k < 2:
        raise NcvError("k must be >= 2")
    if k > y.size:
        raise NcvError(f"k={k} exceeds the number of samples ({y.size})")
    rng = np.random.default_rng(seed)
    folds: List[List[int]] = [[] for _ in range(k)]
    slot = 0
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        for i in rng.permutation(members):
            folds[slot % k].append(int(i))
            slot += 1
    return FoldPlan(tuple(np.sort(np.array(f, dtype=np.int64)) for f in folds), y.size, seed)


def stratified_holdout(labels, test_fraction: float = 0.3, seed: int = 0) -> FoldPlan:
    """One stratified train/test split; each class contributes round(fraction * size) test rows."""
    y = np.asarray(labels).astype(np.int64)
    if not 0 < test_fraction < 1:
        raise NcvError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    test = []
    for cls in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == cls))
        n_test = int(round(test_fraction * members.size))
        if n_test < 1 or n_test >= members.size:
            raise NcvError(f"class {cls} too small for a {test_fraction} holdout")
        test.extend(members[:n_test].tolist())
    return FoldPlan((np.sort(np.array(test, dtype=np.int64)),), y.size, seed)


# ---------------------------------------------------------------------- config

@dataclass(frozen=True)
class NcvConfig:
    outer_k: int = 5
    inner_k: int = 5
    model: str = "forest"
    model_params: Mapping[str, object] = field(default_factory=dict)
    max_features: int = 15
    sample_size_guard: bool = False
    corr_threshold: float = 0.6
    screen_alpha: Optional[float] = None
    sfs_pool: Optional[int] = 20
    smote: bool = True
    smote_k: int = 5
    seed: int = 0
    outer_mode: str = "kfold"
    holdout_fraction: float = 0.3

    def __post_init__(self):
        if self.outer_k < 2 or self.inner_k < 2:
            raise NcvError("outer_k and inner_k must be >= 2")
        if self.max_features < 1:
            raise NcvError("max_features must be >= 1")
        if self.model not in MODEL_KINDS:
            raise NcvError(f"unknown model {self.model!r}")
        if not 0 < self.corr_threshold <= 1:
            raise NcvError("corr_threshold must lie in (0, 1]")
        if self.sfs_pool is not None and self.sfs_pool < 1:
            raise NcvError("sfs_pool must be >= 1")
        if self.outer_mode not in ("kfold", "holdout"):
            raise NcvError("outer_mode must be 'kfold' or 'holdout'")

    def params(self) -> dict:
        p = dict(DEFAULT_PARAMS[self.model])
        p.update(self.model_params)
        return p

    def feature_cap(self, n_train: int) -> int:
        if self.sample_size_guard:
            return max(1, min(self.max_features, n_train // 7))
        return self.max_features

    def as_dict(self) -> dict:
        d = asdict(self)
        d["model_params"] = self.params()
        return d


# ------------------------------------------------------------------------- SFS

@dataclass
class SfsResult:
    ordered: List[str]
    best_prefix: List[str]
    trace: List[float]


def _balanced(data: Dataset, config: NcvConfig, seed: int) -> Dataset:
    return smote(data, config.smote_k, seed) if config.smote else data


def sfs_select(
    X: np.ndarray,
    y: np.ndarray,
    names: Sequence[str],
    config: NcvConfig,
    seed: int = 0,
    rows: Optional[np.ndarray] = None,
    tracer: Optional[Tracer] = None,
    fold: int = -1,
) -> SfsResult:
    """Sequential forward selection scored by mean inner-CV AUC.

    SMOTE is applied to each inner-training split only. Ties between
    candidates go to the lexicographically smallest name. ``best_prefix`` is
    the shortest prefix reaching the maximum inner AUC. ``rows`` are the
    original row ids of ``X`` and are only reported to ``tracer``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(np.int64)
    names = list(names)
    plan = stratified_kfold(y, config.inner_k, derive_seed(seed, 1))
    splits = []
    for i in range(plan.k):
        tr, te = plan.train(i), plan.test(i)
        if np.unique(y[te]).size < 2 or np.unique(y[tr]).size < 2:
            raise NcvError("inner fold with a single class")
        splits.append((tr, te, derive_seed(seed, 2, i), derive_seed(seed, 3, i)))
        if tracer is not None:
            ids = rows if rows is not None else np.arange(y.size)
            tracer("sfs_inner_train", fold, ids[tr])
    params = config.params()
    cap = min(config.feature_cap(y.size), len(names))

    def inner_auc(cols: List[int]) -> float:
        aucs = []
        for tr, te, s_smote, s_model in splits:
            train = _balanced(Dataset(X[np.ix_(tr, cols)], y[tr]), config, s_smote)
            model = fit_model(config.model, train, params, s_model)
            aucs.append(roc_auc(model.score(X[np.ix_(te, cols)]), y[te]))
        return float(np.mean(aucs))

    col = {n: j for j, n in enumerate(names)}
    remaining = sorted(names)
    selected: List[str] = []
    trace: List[float] = []
    while len(selected) < cap and remaining:
        base = [col[n] for n in selected]
        best_name, best_auc = None, -np.inf
        for cand in remaining:
            auc = inner_auc(base + [col[cand]])
            if auc > best_auc:
                best_name, best_auc = cand, auc
        selected.append(best_name)
        remaining.remove(best_name)
        trace.append(best_auc)
        log.debug("sfs step %d: %s (inner AUC %.4f)", len(selected), best_name, best_auc)
    top = max(trace)
    n_best = next(i for i, a in enumerate(trace) if a >= top - 1e-12) + 1
    return SfsResult(selected, selected[:n_best], trace)


# ----------------------------------------------------------------- nested CV

@dataclass
class FoldResult:
    fold: int
    test_rows: List[int]
    metrics: MetricSet
    selected: List[str]
    sfs_order: List[str]
    inner_trace: List[float]
    n_candidates: int

    def as_dict(self) -> dict:
        d = asdict(self)
        d["metrics"] = self.metrics.as_dict()
        return d


@dataclass
class NcvReport:
    model: str
    config: dict
    folds: List[FoldResult]
    aggregate: Dict[str, Dict[str, float]]
    frequencies: Dict[str, int]

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "config": self.config,
            "folds": [f.as_dict() for f in self.folds],
            "aggregate": self.aggregate,
            "frequencies": self.frequencies,
        }

    def mean(self, metric: str = "auc") -> float:
        return self.aggregate[metric]["mean"]

    def std(self, metric: str = "auc") -> float:
        return self.aggregate[metric]["std"]


def _aggregate(folds: Sequence[FoldResult]) -> Dict[str, Dict[str, float]]:
    out = {}
    for m in METRIC_NAMES:
        vals = np.array([getattr(f.metrics, m) for f in folds])
        out[m] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def _frequencies(folds: Sequence[FoldResult]) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for f in folds:
        for name in f.selected:
            counts[name] = counts.get(name, 0) + 1
    return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))


def _screen(X, y, names, kinds, config: NcvConfig) -> List[str]:
    screening = univariate_screen(X, y, names, kinds)
    kept = redundancy_filter(X, names, screening, config.corr_threshold, config.screen_alpha)
    if config.sfs_pool is not None:
        kept = kept[: config.sfs_pool]
    return kept


def run_nested_cv(
    X: np.ndarray,
    labels,
    names: Sequence[str],
    kinds: Sequence[str],
    config: NcvConfig = NcvConfig(),
    tracer: Optional[Tracer] = None,
    leaky_screening: bool = False,
) -> NcvReport:
    """Outer-fold evaluation of the full selection + SMOTE + model pipeline.

    ``tracer(stage, fold, rows)`` receives the original row ids handed to each
    learning stage. ``leaky_screening`` screens on all rows, test rows
    included; it exists only to demonstrate the optimism that leakage causes
    and must not be used for real estimates.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(labels).astype(np.int64)
    names = list(names)
    kinds = list(kinds)
    if X.shape != (y.size, len(names)) or len(kinds) != len(names):
        raise NcvError("feature matrix, labels, names and kinds are inconsistent")
    if len(set(names)) != len(names):
        raise NcvError("feature names must be unique")
    if config.outer_mode == "kfold":
        plan = stratified_kfold(y, config.outer_k, derive_seed(config.seed, 0))
    else:
        plan = stratified_holdout(y, config.holdout_fraction, derive_seed(config.seed, 0))
    col = {n: j for j, n in enumerate(names)}
    params = config.params()

    def trace(stage, fold, rows):
        if tracer is not None:
            tracer(stage, fold, np.asarray(rows))

    leaky_pool = None
    if leaky_screening:
        trace("screen", -1, np.arange(y.size))
        leaky_pool = _screen(X, y, names, kinds, config)

    folds = []
    for i in range(plan.k):
        tr, te = plan.train(i), plan.test(i)
        if np.unique(y[tr]).size < 2:
            raise NcvError(f"outer fold {i}: training rows contain a single class")
        fold_seed = derive_seed(config.seed, 10, i)
        Xtr, ytr = X[tr], y[tr]

        if leaky_pool is None:
            trace("screen", i, tr)
            pool = _screen(Xtr, ytr, names, kinds, config)
        else:
            pool = leaky_pool
        pool_cols = [col[n] for n in pool]

        trace("sfs", i, tr)
        sfs = sfs_select(Xtr[:, pool_cols], ytr, pool, config, fold_seed, rows=tr, tracer=tracer, fold=i)
        cols = [col[n] for n in sfs.best_prefix]

        trace("smote", i, tr)
        train = _balanced(Dataset(Xtr[:, cols], ytr, list(sfs.best_prefix)), config, derive_seed(fold_seed, 4))
        model = fit_model(config.model, train, params, derive_seed(fold_seed, 5))

        trace("evaluate", i, te)
        metrics = classification_metrics(model.score(X[np.ix_(te, cols)]), y[te], model.threshold)
        folds.append(
            FoldResult(i, te.tolist(), metrics, list(sfs.best_prefix), sfs.ordered, sfs.trace, len(pool))
        )
        log.info("%s fold %d: AUC %.3f with %d features", config.model, i, metrics.auc, len(cols))

    return NcvReport(config.model, config.as_dict(), folds, _aggregate(folds), _frequencies(folds))


def aggregate_and_rank(report: NcvReport, top_m: int = 5):
    """Per-metric (mean, std) rows and the ``top_m`` most frequently selected features.

    Features are ordered by selection count (descending), then name.
    """
    folds = report.folds
    summary = _aggregate(folds)
    ranked = sorted(_frequencies(folds).items(), key=lambda kv: (-kv[1], kv[0]))
    return summary, ranked[:top_m]


# --------------------------------------------------------------------- output

def _fmt(x: float) -> str:
    return repr(float(x))


def write_reports(reports: Mapping[str, NcvReport], out_dir) -> Dict[str, Path]:
    """Write ``ncv_report.json``, ``ncv_metrics.csv`` and ``ncv_frequencies.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out_dir / "ncv_report.json",
        "metrics": out_dir / "ncv_metrics.csv",
        "frequencies": out_dir / "ncv_frequencies.csv",
    }
    payload = {"models": {m: r.as_dict() for m, r in reports.items()}}
    paths["json"].write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    with open(paths["metrics"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "fold"] + list(METRIC_NAMES))
        for model, rep in reports.items():
            for f in rep.folds:
                w.writerow([model, f.fold] + [_fmt(getattr(f.metrics, m)) for m in METRIC_NAMES])
            for stat in ("mean", "std"):
                w.writerow([model, stat] + [_fmt(rep.aggregate[m][stat]) for m in METRIC_NAMES])

    with open(paths["frequencies"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "feature", "count"])
        for model, rep in reports.items():
            for name, count in rep.frequencies.items():
                w.writerow([model, name, count])
    return paths
