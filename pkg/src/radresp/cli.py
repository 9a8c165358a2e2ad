"""Command-line front end: ``radresp synth|extract|ncv|report``.

Configuration is a single JSON file validated up front (unknown keys are
rejected); ``--seed``, ``--model`` and ``--out`` override the file. Exit codes:
0 success, 1 runtime failure, 2 configuration or validation error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .mlcore import MODEL_KINDS
from .mlcore.metrics import METRIC_NAMES
from .ncv import NcvConfig, NcvError, run_nested_cv, write_reports
from .pipeline import extract_cohort
from .radfeat import ExtractionConfig
from .synth import CohortSpec, write_cohort
from .table import FeatureTable

log = logging.getLogger("radresp")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
METRIC_LABELS = {"auc": "AUC", "accuracy": "Accuracy", "precision": "Precision", "recall": "Recall", "f1": "F1"}

ParamValue = Union[bool, int, float, None]


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


class RunConfig(BaseModel):
    """Everything ``extract`` and ``ncv`` need, in one validated document."""

    model_config = ConfigDict(extra="forbid")

    # paths
    cohort_dir: Optional[str] = None
    features_csv: Optional[str] = None
    out_dir: Optional[str] = None
    # extraction
    n_bins: int = Field(32, ge=2)
    log_sigmas_mm: List[float] = [1.0, 3.0, 5.0]
    wavelet: bool = True
    target_spacing_mm: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    bias_degree: int = Field(2, ge=0)
    # nested cross-validation
    model: str = "forest"
    model_params: Dict[str, Dict[str, ParamValue]] = {}
    outer_k: int = Field(5, ge=2)
    inner_k: int = Field(5, ge=2)
    max_features: int = Field(15, ge=1)
    sample_size_guard: bool = False
    corr_threshold: float = Field(0.6, gt=0, le=1)
    screen_alpha: Optional[float] = Field(None, gt=0, le=1)
    sfs_pool: Optional[int] = Field(20, ge=1)
    smote: bool = True
    smote_k: int = Field(5, ge=1)
    seed: int = 0
    outer_mode: str = "kfold"
    holdout_fraction: float = Field(0.3, gt=0, lt=1)

    @field_validator("model")
    @classmethod
    def _model(cls, v):
        if v != "all" and v not in MODEL_KINDS:
            raise ValueError(f"model must be 'all' or one of {MODEL_KINDS}")
        return v

    @field_validator("model_params")
    @classmethod
    def _params(cls, v):
        unknown = set(v) - set(MODEL_KINDS)
        if unknown:
            raise ValueError(f"model_params keys must be model kinds, got {sorted(unknown)}")
        return v

    @field_validator("log_sigmas_mm")
    @classmethod
    def _sigmas(cls, v):
        if any(not s > 0 for s in v):
            raise ValueError("LoG sigmas must be positive")
        return v

    @field_validator("outer_mode")
    @classmethod
    def _mode(cls, v):
        if v not in ("kfold", "holdout"):
            raise ValueError("outer_mode must be 'kfold' or 'holdout'")
        return v

    def models(self) -> Tuple[str, ...]:
        return MODEL_KINDS if self.model == "all" else (self.model,)

    def extraction(self) -> ExtractionConfig:
        return ExtractionConfig(
            n_bins=self.n_bins,
            log_sigmas_mm=tuple(self.log_sigmas_mm),
            wavelet=self.wavelet,
            target_spacing_mm=tuple(self.target_spacing_mm),
            bias_degree=self.bias_degree,
        )

    def ncv(self, model: str) -> NcvConfig:
        return NcvConfig(
            outer_k=self.outer_k,
            inner_k=self.inner_k,
            model=model,
            model_params=dict(self.model_params.get(model, {})),
            max_features=self.max_features,
            sample_size_guard=self.sample_size_guard,
            corr_threshold=self.corr_threshold,
            screen_alpha=self.screen_alpha,
            sfs_pool=self.sfs_pool,
            smote=self.smote,
            smote_k=self.smote_k,
            seed=self.seed,
            outer_mode=self.outer_mode,
            holdout_fraction=self.holdout_fraction,
        )


# --------------------------------------------------------------------- config

def _read_json(path) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def _overrides(args, **extra) -> dict:
    out = {}
    for key in ("seed", "model"):
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    out.update({k: v for k, v in extra.items() if v is not None})
    return out


def load_run_config(path=None, **overrides) -> RunConfig:
    """Validate the config file merged with ``overrides`` (overrides win)."""
    doc = _read_json(path)
    doc.update(overrides)
    try:
        cfg = RunConfig(**doc)
        # NcvConfig/ExtractionConfig carry their own checks; run them before any work starts
        cfg.extraction()
        for m in cfg.models():
            cfg.ncv(m)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    except (NcvError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_cohort_spec(path=None, seed: Optional[int] = None) -> CohortSpec:
    doc = _read_json(path)
    if seed is not None:
        doc["seed"] = seed
    try:
        return CohortSpec(**doc)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _require(value, what: str):
    if value is None:
        raise ConfigError(f"no {what} given (positional argument or config key)")
    return value


# ------------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    spec = load_cohort_spec(args.config, args.seed)
    out = Path(_require(args.out, "output directory"))
    files = write_cohort(spec, out)
    print(f"wrote {len(files) - 1} patients and clinical.csv to {out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = load_run_config(args.config)
    cohort = Path(_require(args.cohort_dir or cfg.cohort_dir, "cohort directory"))
    out = Path(_require(args.out or cfg.features_csv, "output CSV path"))
    table = extract_cohort(cohort, cfg.extraction())
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out)
    print(f"wrote {table.n_patients} x {len(table.names)} feature table to {out}")
    return EXIT_OK


def cmd_ncv(args) -> int:
    extra = {"outer_mode": "holdout"} if args.holdout else {}
    cfg = load_run_config(args.config, **_overrides(args, **extra))
    features = Path(_require(args.features_csv or cfg.features_csv, "feature table"))
    out = Path(_require(args.out or cfg.out_dir, "output directory"))
    table = FeatureTable.from_csv(features)
    reports = {}
    for model in cfg.models():
        reports[model] = run_nested_cv(table.X, table.labels, table.names, table.kinds, cfg.ncv(model))
    write_reports(reports, out)
    print(format_summary(*read_reports(out)))
    return EXIT_OK


def read_reports(out_dir) -> Tuple[Dict[str, Dict[str, Tuple[float, float]]], Dict[str, List[Tuple[str, int]]]]:
    """Parse ``ncv_metrics.csv`` and ``ncv_frequencies.csv`` from ``out_dir``."""
    out_dir = Path(out_dir)
    metrics_path = out_dir / "ncv_metrics.csv"
    freq_path = out_dir / "ncv_frequencies.csv"
    for p in (metrics_path, freq_path):
        if not p.is_file():
            raise FileNotFoundError(f"missing report file {p}")
    summary: Dict[str, Dict[str, Tuple[float, float]]] = {}
    with open(metrics_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        if row["fold"] not in ("mean", "std"):
            continue
        entry = summary.setdefault(row["model"], {m: [0.0, 0.0] for m in METRIC_NAMES})
        slot = 0 if row["fold"] == "mean" else 1
        for m in METRIC_NAMES:
            entry[m][slot] = float(row[m])
    if not summary:
        raise ValueError(f"{metrics_path}: no aggregate rows")
    freqs: Dict[str, List[Tuple[str, int]]] = {}
    with open(freq_path, newline="") as fh:
        for row in csv.DictReader(fh):
            freqs.setdefault(row["model"], []).append((row["feature"], int(row["count"])))
    summary = {k: {m: tuple(v) for m, v in e.items()} for k, e in summary.items()}
    return summary, freqs


def format_summary(summary, freqs, top_m: int = 5) -> str:
    """Mean +/- std table (one row per model) followed by each model's top features."""
    width = max(len("model"), *(len(m) for m in summary))
    head = f"{'model':<{width}}  " + "  ".join(f"{METRIC_LABELS[m]:>11}" for m in METRIC_NAMES)
    lines = [head, "-" * len(head)]
    for model, entry in summary.items():
        cells = "  ".join(f"{entry[m][0]:.2f} ± {entry[m][1]:.2f}".rjust(11) for m in METRIC_NAMES)
        lines.append(f"{model:<{width}}  {cells}")
    for model in summary:
        ranked = sorted(freqs.get(model, []), key=lambda kv: (-kv[1], kv[0]))[:top_m]
        lines.append("")
        lines.append(f"top {top_m} features ({model}):")
        lines += [f"  {count:>2}  {name}" for name, count in ranked]
    return "\n".join(lines)


def cmd_report(args) -> int:
    print(format_summary(*read_reports(args.out_dir)))
    return EXIT_OK


# ---------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radresp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic phantom cohort")
    p.add_argument("--config", help="cohort spec JSON (CohortSpec fields)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract the feature table of a cohort")
    p.add_argument("cohort_dir", nargs="?")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--out", help="output CSV")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("ncv", help="nested cross-validation on a feature table")
    p.add_argument("features_csv", nargs="?")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--model", choices=MODEL_KINDS + ("all",))
    p.add_argument("--holdout", action="store_true", help="single stratified 70/30 outer split instead of k folds")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_ncv)

    p = sub.add_parser("report", help="print the summary of an ncv output directory")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # any failure after validation is a runtime failure
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
