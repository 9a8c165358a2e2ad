import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radresp.pipeline import PatientError, extract_cohort, read_clinical, table_from_patients
from radresp.radfeat import CATEGORICAL, CONTINUOUS, ExtractionConfig
from radresp.synth import CohortSpec, generate_cohort, write_cohort
from radresp.table import FeatureTable, TableError, kinds_path


def _table(X, kinds=None):
    n, d = X.shape
    names = [f"f{j}" for j in range(d)]
    return FeatureTable([f"P{i}" for i in range(n)], np.arange(n) % 2, names, kinds or [CONTINUOUS] * d, X)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=6, max_size=6))
def test_csv_round_trip_exact(tmp_path_factory, values):
    X = np.array(values).reshape(3, 2)
    path = tmp_path_factory.mktemp("t") / "t.csv"
    _table(X, [CONTINUOUS, CATEGORICAL]).to_csv(path)
    back = FeatureTable.from_csv(path)
    assert np.array_equal(back.X, X)
    assert back.kinds == [CONTINUOUS, CATEGORICAL]
    assert back.patient_ids == ["P0", "P1", "P2"]


def test_kinds_fallback_without_sidecar(tmp_path):
    path = tmp_path / "t.csv"
    _table(np.zeros((2, 2))).to_csv(path)
    kinds_path(path).unlink()
    assert FeatureTable.from_csv(path, categorical=["f1"]).kinds == [CONTINUOUS, CATEGORICAL]
    assert FeatureTable.from_csv(path).kinds == [CONTINUOUS, CONTINUOUS]


def test_select_columns():
    t = _table(np.arange(6.0).reshape(2, 3)).select(["f2", "f0"])
    assert t.names == ["f2", "f0"]
    assert np.array_equal(t.X, [[2, 0], [5, 3]])


@pytest.mark.parametrize(
    "mutate",
    [
        lambda a: a.update(X=np.full((2, 2), np.nan)),
        lambda a: a.update(names=["a", "a"]),
        lambda a: a.update(kinds=["continuous", "ordinal"]),
        lambda a: a.update(patient_ids=["P0"]),
    ],
)
def test_table_validation(mutate):
    args = dict(patient_ids=["P0", "P1"], labels=[0, 1], names=["a", "b"], kinds=[CONTINUOUS] * 2, X=np.zeros((2, 2)))
    mutate(args)
    with pytest.raises(TableError):
        FeatureTable(**args)


def test_malformed_csv(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,label,a\nP0,0,1\n")
    with pytest.raises(TableError):
        FeatureTable.from_csv(bad)
    bad.write_text("patient_id,label,a\nP0,0,x\n")
    with pytest.raises(TableError):
        FeatureTable.from_csv(bad)
    with pytest.raises(FileNotFoundError):
        FeatureTable.from_csv(tmp_path / "none.csv")


# ------------------------------------------------------------------- pipeline

SPEC = CohortSpec(n_patients=6, dims=(24, 24, 24), lesion_radius_mm=(4.0, 7.0), seed=9)
CFG = ExtractionConfig(log_sigmas_mm=(1.0,))


def test_disk_and_memory_extraction_agree(tmp_path):
    write_cohort(SPEC, tmp_path)
    disk = extract_cohort(tmp_path, CFG)
    mem = table_from_patients(generate_cohort(SPEC), CFG)
    assert disk.names == mem.names and disk.kinds == mem.kinds
    assert np.array_equal(disk.labels, mem.labels)
    np.testing.assert_array_equal(disk.X, mem.X)


def test_clinical_encoding(tmp_path):
    write_cohort(SPEC, tmp_path)
    table = extract_cohort(tmp_path, CFG)
    rows = read_clinical(tmp_path / "clinical.csv")
    assert np.array_equal(table.column("clinical_sex"), [1.0 if r["sex"] == "F" else 0.0 for r in rows])
    assert np.array_equal(table.column("clinical_age"), [float(r["age"]) for r in rows])


def test_bad_label_names_patient(tmp_path):
    write_cohort(SPEC, tmp_path)
    clinical = tmp_path / "clinical.csv"
    lines = clinical.read_text().splitlines()
    lines[2] = lines[2].rsplit(",", 2)[0] + ",2,PR"
    clinical.write_text("\n".join(lines) + "\n")
    with pytest.raises(PatientError, match="P002"):
        extract_cohort(tmp_path, CFG)


def test_missing_clinical(tmp_path):
    with pytest.raises(FileNotFoundError):
        extract_cohort(tmp_path, CFG)
