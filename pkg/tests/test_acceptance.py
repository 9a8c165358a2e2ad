"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

The lines are also repeated in the terminal summary (see ``conftest.py``).
Criteria 1, 2 and 7 run the full pipeline on default-size phantom cohorts and
take several minutes.
"""
import contextlib
import time

import numpy as np
import pytest

from conftest import cohort_table
from oracles import exact_mw_p, firstorder_oracle, flood_fill_zones, zones_from_matrix
from radresp.cli import EXIT_OK, main
from radresp.imgfilt import BAND_LABELS, wavelet_decompose, wavelet_reconstruct
from radresp.imgvol import Mask3D, Volume3D, correct_bias_field, resample_trilinear, zscore_normalize
from radresp.mlcore import roc_auc
from radresp.ncv import NcvConfig, run_nested_cv
from radresp.radfeat import (
    CONTINUOUS,
    FIRSTORDER_FEATURES,
    discretize,
    firstorder_features,
    glcm_features,
    glrlm_features,
    glszm_matrix,
)
from radresp.stats import chi2_sf, mann_whitney_u

RESULTS = {}


@contextlib.contextmanager
def criterion(number, title):
    """Record and print one PASS/FAIL line; ``details`` is filled in by the test body."""
    details = {}
    try:
        yield details
    except BaseException:
        line = f"criterion {number} FAIL  {title}  {_fmt(details)}"
        RESULTS[number] = line
        print(line)
        raise
    line = f"criterion {number} PASS  {title}  {_fmt(details)}"
    RESULTS[number] = line
    print(line)


def _fmt(details):
    return " ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in details.items())


def _ncv(table, config, **kw):
    return run_nested_cv(table.X, table.labels, table.names, table.kinds, config, **kw)


def _roi(data, mask=None, n_bins=32):
    data = np.asarray(data, dtype=float)
    if data.ndim == 2:
        data = data[:, :, None]
    vol = Volume3D(data)
    m = Mask3D(np.ones(data.shape, bool) if mask is None else mask)
    return vol, m, discretize(vol, m, n_bins)


# ------------------------------------------------------------------ criterion 1

@pytest.mark.slow
def test_criterion_1_leakage_null():
    with criterion(1, "null cohort: clean AUC in [0.40, 0.60], leaky >= 0.60 and > clean, <= 10 min") as d:
        elapsed, clean, leaky = 0.0, [], []
        for seed in range(5):
            table, build_seconds = cohort_table(0.0, seed)
            t0 = time.perf_counter()
            config = NcvConfig(seed=seed)
            clean.append(_ncv(table, config).mean("auc"))
            leaky.append(_ncv(table, config, leaky_screening=True).mean("auc"))
            elapsed += build_seconds + time.perf_counter() - t0
        d.update(clean=float(np.mean(clean)), leaky=float(np.mean(leaky)), seconds=elapsed)
        assert 0.40 <= d["clean"] <= 0.60
        assert d["leaky"] >= 0.60
        assert d["leaky"] > d["clean"]
        assert elapsed <= 600


# ------------------------------------------------------------------ criterion 2

@pytest.mark.slow
def test_criterion_2_signal_recovery():
    with criterion(2, "signal cohort: forest AUC >= 0.75, fold std <= 0.12, <= 15 min") as d:
        table, build_seconds = cohort_table(1.0, 0)
        t0 = time.perf_counter()
        report = _ncv(table, NcvConfig(model="forest", seed=0))
        d.update(auc=report.mean("auc"), std=report.std("auc"), seconds=build_seconds + time.perf_counter() - t0)
        assert d["auc"] >= 0.75
        assert d["std"] <= 0.12
        assert d["seconds"] <= 900


# ------------------------------------------------------------------ criterion 3

def test_criterion_3_feature_math():
    with criterion(3, "first-order, GLCM, GLRLM and GLSZM against oracles") as d:
        worst = 0.0
        for seed in range(5):
            rng = np.random.default_rng(seed)
            data = rng.gamma(2.0, 1.5, (7, 6, 5))
            mask = rng.random(data.shape) < 0.6
            fv = firstorder_features(Volume3D(data), Mask3D(mask), 16)
            ref = firstorder_oracle(data[mask], 16)
            worst = max(worst, max(abs(fv[n] - ref[n]) for n in FIRSTORDER_FEATURES))
        d["firstorder_max_err"] = worst
        assert worst <= 1e-9

        _, _, droi = _roi([[1.0, 1.0], [2.0, 2.0]], n_bins=2)
        glcm = glcm_features(droi, [(1, 0, 0)])
        assert glcm["Contrast"] == 1.0 and glcm["JointEntropy"] == 1.0

        _, _, droi = _roi(np.array([1.0, 1.0, 2.0]).reshape(3, 1, 1), n_bins=2)
        assert glrlm_features(droi, [(1, 0, 0)])["GrayLevelNonUniformityNormalized"] == 0.5

        matched = 0
        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)
            data = rng.integers(0, 4, (8, 8, 8)).astype(float)
            mask = rng.random((8, 8, 8)) < rng.uniform(0.3, 0.9)
            _, _, droi = _roi(data, mask, 4)
            levels_img = np.zeros(mask.shape, int)
            levels_img[mask] = droi.levels
            matched += zones_from_matrix(glszm_matrix(droi)) == flood_fill_zones(levels_img, mask)
        d["glszm_matched"] = f"{matched}/20"
        assert matched == 20


# ------------------------------------------------------------------ criterion 4

def test_criterion_4_statistics():
    with criterion(4, "Mann-Whitney vs exact p, chi-square anchor, AUC = U/(n1 n0)") as d:
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(100):
            pooled = rng.permutation(rng.normal(size=20))
            u, p = mann_whitney_u(pooled[:10], pooled[10:])
            worst = max(worst, abs(p - exact_mw_p(u, 10, 10)))
        d["mw_max_err"] = worst
        assert worst < 0.02

        d["chi2_err"] = abs(chi2_sf(3.841, 1) - 0.05)
        assert d["chi2_err"] < 1e-3

        auc_err = 0.0
        for _ in range(100):
            n = int(rng.integers(6, 60))
            labels = np.array([0, 0, 1, 1] + list(rng.integers(0, 2, n - 4)))
            scores = rng.normal(size=n)
            u, _ = mann_whitney_u(scores[labels == 0], scores[labels == 1])
            n1 = int(labels.sum())
            auc_err = max(auc_err, abs(roc_auc(scores, labels) - u / (n1 * (n - n1))))
        d["auc_max_err"] = auc_err
        assert auc_err <= 1e-12


# ------------------------------------------------------------------ criterion 5

def test_criterion_5_image_math():
    with criterion(5, "wavelet round trip/energy, affine resampling, z-score, bias correction") as d:
        rng = np.random.default_rng(0)
        rt_err, energy_err = 0.0, 0.0
        for _ in range(3):
            data = rng.normal(size=(32, 32, 32))
            bands = wavelet_decompose(Volume3D(data))
            rt_err = max(rt_err, float(np.abs(wavelet_reconstruct(bands).data - data).max()))
            energy = sum(float((bands[b].data ** 2).sum()) for b in BAND_LABELS)
            energy_err = max(energy_err, abs(energy - float((data ** 2).sum())) / float((data ** 2).sum()))
        d.update(roundtrip=rt_err, energy_rel=energy_err)
        assert rt_err < 1e-9 and energy_err < 1e-6

        spacing, target = (0.8, 1.0, 1.3), (1.0, 0.7, 1.1)
        axes = [np.arange(32) * s for s in spacing]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        out = resample_trilinear(Volume3D(0.5 * X - 1.5 * Y + 2.0 * Z + 3.0, spacing), target)
        Xo, Yo, Zo = np.meshgrid(*[np.arange(m) * t for m, t in zip(out.dims, target)], indexing="ij")
        d["affine_err"] = float(np.abs(out.data - (0.5 * Xo - 1.5 * Yo + 2.0 * Zo + 3.0)).max())
        assert d["affine_err"] < 1e-9

        z, _ = zscore_normalize(Volume3D(rng.gamma(2.0, 10.0, (32, 32, 32))))
        assert abs(z.data.mean()) < 1e-6 and abs(z.data.std() - 1) < 1e-6

        ax = [np.linspace(-1, 1, 32)] * 3
        X, Y, Z = np.meshgrid(*ax, indexing="ij")
        field = np.exp(0.2 * X - 0.12 * Y + 0.1 * Z ** 2 + 0.06 * X * Y)
        mask = Mask3D(X ** 2 + Y ** 2 + Z ** 2 < 0.9)
        vol = Volume3D(100.0 * (1 + 0.002 * rng.standard_normal(X.shape)) * field)
        corrected = correct_bias_field(vol, mask, 2)
        sel = mask.voxels
        cv_before = float(vol.data[sel].std() / vol.data[sel].mean())
        cv_after = float(corrected.data[sel].std() / corrected.data[sel].mean())
        d.update(cv_before=cv_before, cv_after=cv_after)
        assert cv_before >= 0.08 and cv_after < 0.01


# ------------------------------------------------------------------ criterion 6

@pytest.mark.slow
def test_criterion_6_selection():
    with criterion(6, "label-equal feature selected first in 5/5 folds, best prefix <= 15") as d:
        rng = np.random.default_rng(6)
        n, d_noise = 104, 200
        y = np.zeros(n, int)
        y[rng.permutation(n)[:67]] = 1
        X = np.column_stack([rng.normal(size=(n, d_noise)), y.astype(float)])
        names = [f"noise_{j:03d}" for j in range(d_noise)] + ["label_copy"]
        report = run_nested_cv(X, y, names, [CONTINUOUS] * len(names), NcvConfig(seed=0))
        first = sum(f.sfs_order[0] == "label_copy" for f in report.folds)
        longest = max(len(f.selected) for f in report.folds)
        d.update(first=f"{first}/5", frequency=report.frequencies.get("label_copy", 0), longest_prefix=longest)
        assert first == 5 and report.frequencies["label_copy"] == 5
        assert longest <= 15


# ------------------------------------------------------------------ criterion 7

@pytest.mark.slow
def test_criterion_7_determinism(tmp_path):
    with criterion(7, "two cmd_ncv runs byte-identical") as d:
        table, _ = cohort_table(0.0, 0)
        csv_path = tmp_path / "features.csv"
        table.to_csv(csv_path)
        for run in ("a", "b"):
            assert main(["ncv", str(csv_path), "--seed", "7", "--model", "all", "--out", str(tmp_path / run)]) == EXIT_OK
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        identical = [n for n in names if (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()]
        d["identical"] = f"{len(identical)}/{len(names)}"
        assert names and identical == names
