"""Shared fixtures: full-size phantom cohorts are expensive, so their feature tables are cached per session."""
import sys
import time

import pytest

from radresp.pipeline import table_from_patients
from radresp.synth import CohortSpec, generate_cohort

_TABLES = {}


def cohort_table(texture_effect: float = 0.0, seed: int = 0):
    """Feature table of a default-size cohort (104 patients, 64/36 balance).

    Returns ``(table, seconds)`` where ``seconds`` is the time originally spent
    generating and extracting it, so runtime budgets stay honest when a cached
    table is reused.
    """
    key = (texture_effect, seed)
    if key not in _TABLES:
        t0 = time.perf_counter()
        spec = CohortSpec(texture_effect=texture_effect, seed=seed)
        table = table_from_patients(generate_cohort(spec))
        _TABLES[key] = (table, time.perf_counter() - t0)
    return _TABLES[key]


@pytest.fixture(scope="session")
def null_table():
    return cohort_table(0.0, 0)[0]


@pytest.fixture(scope="session")
def signal_table():
    return cohort_table(1.0, 0)[0]


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
