import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.ndimage import map_coordinates

from radresp.imgvol import (
    DegenerateInputError,
    Mask3D,
    Volume3D,
    VolumeError,
    correct_bias_field,
    full_mask,
    load_volume,
    resample_mask_nearest,
    resample_trilinear,
    resampled_dims,
    save_volume,
    zscore_normalize,
)


def _cv(values):
    return values.std() / values.mean()


# ------------------------------------------------------------------ containers

def test_volume_rejects_non_finite_and_bad_spacing():
    with pytest.raises(VolumeError):
        Volume3D(np.full((2, 2, 2), np.nan))
    with pytest.raises(VolumeError):
        Volume3D(np.zeros((2, 2, 2)), (1.0, 0.0, 1.0))
    with pytest.raises(VolumeError):
        Volume3D(np.zeros((2, 2)))


def test_volume_data_is_read_only():
    vol = Volume3D(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        vol.data[0, 0, 0] = 1.0


# ------------------------------------------------------------------------ I/O

def test_load_header_with_eight_floats(tmp_path):
    values = np.arange(8, dtype="<f4")
    (tmp_path / "v.raw").write_bytes(values.tobytes())
    (tmp_path / "v.json").write_text(json.dumps({"dims": [2, 2, 2], "spacing_mm": [1, 1, 1], "data_file": "v.raw"}))
    vol, mask = load_volume(tmp_path / "v.json")
    assert vol.dims == (2, 2, 2)
    assert mask is None
    # x varies fastest on disk
    assert vol.data[1, 0, 0] == 1.0 and vol.data[0, 1, 0] == 2.0 and vol.data[0, 0, 1] == 4.0


def test_load_size_mismatch(tmp_path):
    (tmp_path / "v.raw").write_bytes(np.arange(7, dtype="<f4").tobytes())
    (tmp_path / "v.json").write_text(json.dumps({"dims": [2, 2, 2], "spacing_mm": [1, 1, 1], "data_file": "v.raw"}))
    with pytest.raises(VolumeError, match="expected 8"):
        load_volume(tmp_path / "v.json")


def test_load_missing_raw(tmp_path):
    (tmp_path / "v.json").write_text(json.dumps({"dims": [2, 2, 2], "spacing_mm": [1, 1, 1], "data_file": "v.raw"}))
    with pytest.raises(FileNotFoundError):
        load_volume(tmp_path / "v.json")


def test_load_rejects_non_finite(tmp_path):
    values = np.zeros(8, dtype="<f4")
    values[3] = np.inf
    (tmp_path / "v.raw").write_bytes(values.tobytes())
    (tmp_path / "v.json").write_text(json.dumps({"dims": [2, 2, 2], "spacing_mm": [1, 1, 1], "data_file": "v.raw"}))
    with pytest.raises(VolumeError, match="non-finite"):
        load_volume(tmp_path / "v.json")


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.normal(size=(5, 4, 3)).astype(np.float32)
    vox = rng.random((5, 4, 3)) < 0.4
    vol = Volume3D(data, (0.5, 1.0, 2.5), (1.0, -2.0, 3.0))
    save_volume(vol, Mask3D(vox), tmp_path / "p.json")
    back, mask = load_volume(tmp_path / "p.json")
    assert back.dims == vol.dims
    assert back.spacing == vol.spacing
    assert back.origin == vol.origin
    assert np.array_equal(back.data.astype(np.float32), data)
    assert np.array_equal(mask.voxels, vox)


def test_save_without_mask(tmp_path):
    vol = Volume3D(np.ones((2, 2, 2)))
    save_volume(vol, None, tmp_path / "p.json")
    assert not (tmp_path / "p_mask.raw").exists()
    assert load_volume(tmp_path / "p.json")[1] is None


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_save_unwritable_directory(tmp_path):
    d = tmp_path / "ro"
    d.mkdir()
    d.chmod(0o500)
    try:
        with pytest.raises(OSError):
            save_volume(Volume3D(np.ones((2, 2, 2))), None, d / "p.json")
    finally:
        d.chmod(0o700)


def test_save_into_missing_directory_fails(tmp_path):
    with pytest.raises(OSError):
        save_volume(Volume3D(np.ones((2, 2, 2))), None, tmp_path / "absent" / "p.json")


def test_mask_values_above_one_rejected(tmp_path):
    save_volume(Volume3D(np.ones((2, 2, 2))), Mask3D(np.ones((2, 2, 2), bool)), tmp_path / "p.json")
    (tmp_path / "p_mask.raw").write_bytes(bytes([0, 1, 2, 0, 0, 0, 0, 0]))
    with pytest.raises(VolumeError, match="0 or 1"):
        load_volume(tmp_path / "p.json")


# ------------------------------------------------------------------ resampling

def test_resampled_dims_hand_value():
    assert resampled_dims((5, 5, 5), (2.0, 1.0, 1.0), (1.0, 1.0, 1.0)) == (9, 5, 5)


def test_constant_volume_stays_constant():
    vol = Volume3D(np.full((4, 5, 6), 7.25), (1.3, 0.7, 2.0))
    out = resample_trilinear(vol, (1.0, 1.0, 1.0))
    assert np.all(out.data == 7.25)


def test_linear_ramp_half_steps():
    data = np.broadcast_to(np.arange(5.0)[:, None, None], (5, 2, 2))
    out = resample_trilinear(Volume3D(data, (2.0, 1.0, 1.0)), (1.0, 1.0, 1.0))
    assert out.dims == (9, 2, 2)
    np.testing.assert_allclose(out.data[:, 0, 0], np.arange(9) * 0.5, atol=1e-12)


def test_identity_spacing_is_identity():
    rng = np.random.default_rng(1)
    vol = Volume3D(rng.normal(size=(6, 5, 4)), (0.8, 1.1, 2.0))
    out = resample_trilinear(vol, vol.spacing)
    np.testing.assert_allclose(out.data, vol.data, atol=1e-9)


def test_trilinear_matches_map_coordinates():
    rng = np.random.default_rng(2)
    vol = Volume3D(rng.normal(size=(7, 6, 5)), (1.5, 0.6, 2.2))
    target = (1.0, 1.0, 1.0)
    out = resample_trilinear(vol, target)
    grids = np.meshgrid(*[np.arange(m) * t / s for m, t, s in zip(out.dims, target, vol.spacing)], indexing="ij")
    ref = map_coordinates(vol.data, grids, order=1, mode="nearest")
    np.testing.assert_allclose(out.data, ref, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    coef=st.tuples(*[st.floats(-5, 5) for _ in range(4)]),
    spacing=st.tuples(*[st.sampled_from([0.5, 0.75, 1.0, 1.25, 2.0, 3.0]) for _ in range(3)]),
    target=st.tuples(*[st.sampled_from([0.5, 1.0, 1.5]) for _ in range(3)]),
)
def test_affine_fields_reproduced(coef, spacing, target):
    dims = (5, 4, 6)
    axes = [np.arange(n) * s for n, s in zip(dims, spacing)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    a, b, c, d = coef
    out = resample_trilinear(Volume3D(a * X + b * Y + c * Z + d, spacing), target)
    Xo, Yo, Zo = np.meshgrid(*[np.arange(m) * t for m, t in zip(out.dims, target)], indexing="ij")
    np.testing.assert_allclose(out.data, a * Xo + b * Yo + c * Zo + d, atol=1e-9)


def _nearest_oracle(vox, s_old, s_new):
    dims = resampled_dims(vox.shape, s_old, s_new)
    out = np.zeros(dims, bool)
    for idx in np.ndindex(*dims):
        src = []
        for axis, i in enumerate(idx):
            p = i * s_new[axis]
            centers = np.arange(vox.shape[axis]) * s_old[axis]
            dist = np.abs(centers - p)
            best = np.flatnonzero(dist <= dist.min() + 1e-9)
            src.append(best.max())
        out[idx] = vox[tuple(src)]
    return out


def test_nearest_mask_single_voxel_matches_brute_force():
    vox = np.zeros((3, 3, 3), bool)
    vox[1, 1, 1] = True
    out = resample_mask_nearest(Mask3D(vox), (2.0, 2.0, 2.0), (1.0, 1.0, 1.0))
    np.testing.assert_array_equal(out.voxels, _nearest_oracle(vox, (2.0,) * 3, (1.0,) * 3))
    assert out.count == 8


def test_nearest_mask_random_matches_brute_force():
    rng = np.random.default_rng(3)
    vox = rng.random((4, 5, 3)) < 0.5
    s_old, s_new = (1.5, 0.7, 2.0), (1.0, 1.0, 1.0)
    out = resample_mask_nearest(Mask3D(vox), s_old, s_new)
    np.testing.assert_array_equal(out.voxels, _nearest_oracle(vox, s_old, s_new))


def test_nearest_mask_trivial_cases():
    full = Mask3D(np.ones((3, 4, 5), bool))
    assert resample_mask_nearest(full, (2.0, 0.5, 1.3), (1.0, 1.0, 1.0)).voxels.all()
    empty = Mask3D(np.zeros((3, 4, 5), bool))
    assert resample_mask_nearest(empty, (2.0, 0.5, 1.3), (1.0, 1.0, 1.0)).count == 0


# --------------------------------------------------------------------- z-score

def test_zscore_eight_values():
    vol = Volume3D(np.arange(1.0, 9.0).reshape(2, 2, 2))
    out, params = zscore_normalize(vol)
    assert abs(out.data.mean()) < 1e-6
    assert abs(out.data.std() - 1) < 1e-6
    assert params.mu == 4.5


def test_zscore_constant_raises():
    with pytest.raises(DegenerateInputError):
        zscore_normalize(Volume3D(np.full((3, 3, 3), 2.0)))


def test_zscore_idempotent_and_invertible():
    rng = np.random.default_rng(4)
    vol = Volume3D(rng.gamma(2.0, 3.0, (6, 6, 6)))
    z, params = zscore_normalize(vol)
    z2, _ = zscore_normalize(z)
    np.testing.assert_allclose(z2.data, z.data, atol=1e-9)
    np.testing.assert_allclose(params.inverse(z).data, vol.data, atol=1e-9)


# ------------------------------------------------------------- bias correction

def test_bias_constant_image_unchanged():
    vol = Volume3D(np.full((8, 8, 8), 100.0 * 1.7))
    out = correct_bias_field(vol, full_mask(vol), 2)
    np.testing.assert_allclose(out.data, vol.data, rtol=1e-12)


def test_bias_linear_field_removed():
    n = 32
    x = np.arange(n)[:, None, None]
    field = 1 + 0.3 * (x / n)
    vol = Volume3D(np.broadcast_to(100.0 * field, (n, 16, 16)))
    mask = full_mask(vol)
    before = _cv(vol.data[mask.voxels])
    out = correct_bias_field(vol, mask, 2)
    after = _cv(out.data[mask.voxels])
    ramp = 1 + 0.3 * np.arange(n) / n
    assert before == pytest.approx(ramp.std() / ramp.mean(), rel=1e-9)
    assert before > 0.07
    assert after < 0.01
    assert abs(out.data.mean() / vol.data.mean() - 1) < 1e-3


def test_bias_degree_two_field_under_roi():
    rng = np.random.default_rng(5)
    dims = (24, 20, 16)
    ax = [np.linspace(-1, 1, n) for n in dims]
    X, Y, Z = np.meshgrid(*ax, indexing="ij")
    field = np.exp(0.15 * X - 0.1 * Y + 0.08 * Z ** 2 + 0.05 * X * Y)
    tissue = 100 * (1 + 0.002 * rng.standard_normal(dims))
    mask = Mask3D((X ** 2 + Y ** 2 + Z ** 2) < 0.8)
    vol = Volume3D(tissue * field)
    out = correct_bias_field(vol, mask, 2)
    sel = mask.voxels
    assert _cv(out.data[sel]) < _cv(vol.data[sel])
    assert _cv(out.data[sel]) < 0.01
    assert abs(out.data[sel].mean() / vol.data[sel].mean() - 1) < 1e-3


def test_bias_zero_intensity_raises():
    data = np.full((4, 4, 4), 10.0)
    data[1, 1, 1] = 0.0
    vol = Volume3D(data)
    with pytest.raises(VolumeError, match="positive"):
        correct_bias_field(vol, full_mask(vol))


def test_bias_mask_dims_must_match():
    vol = Volume3D(np.ones((4, 4, 4)))
    with pytest.raises(VolumeError):
        correct_bias_field(vol, Mask3D(np.ones((4, 4, 3), bool)))
