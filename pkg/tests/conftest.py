import numpy as np
import pytest

from ferryfuel.synthgen import ScenarioSeed, inject_missing, simulate_voyages
from ferryfuel.telemetry import write_csv


@pytest.fixture(scope="session")
def small_dataset():
    """About 1500 rows of clean synthetic telemetry."""
    return simulate_voyages(s=ScenarioSeed(rng_seed=7, n_rows=1500))


@pytest.fixture(scope="session")
def small_csv(tmp_path_factory, small_dataset):
    path = tmp_path_factory.mktemp("data") / "telemetry.csv"
    write_csv(inject_missing(small_dataset, 0.001, seed=1), path)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py" in rep.nodeid and rep.when == "call" or (
                    "test_acceptance.py" in rep.nodeid and outcome == "error"):
                lines.append((rep.nodeid.split("::")[-1], "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, verdict in sorted(lines):
            terminalreporter.write_line(f"{verdict}  {name}")
