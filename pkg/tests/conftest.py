from __future__ import annotations

import time

import numpy as np
import pytest

from relmodels import ModelValidationError, validate_model
from relmodels.io import load_model

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict[int, str] = {}


SUITE_BUDGET = 120.0
_START = {}


def pytest_sessionstart(session):
    _START["t"] = time.perf_counter()


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - _START["t"]
    _START["elapsed"] = elapsed
    if ACCEPTANCE and elapsed >= SUITE_BUDGET:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
    elapsed = _START.get("elapsed", time.perf_counter() - _START["t"])
    verdict = "PASS" if elapsed < SUITE_BUDGET else "FAIL"
    terminalreporter.write_line(
        f"criterion 5 [{verdict}] total suite runtime: {elapsed:.1f} s (limit {SUITE_BUDGET:.0f} s)")


def random_model(rng: np.random.Generator, max_cells: int = 10, overall: bool | None = False,
                 min_cells: int = 3, density: float = 0.5):
    """Draw a valid 0-1 model; ``overall`` selects presence of the overall effect (None: either)."""
    while True:
        I = int(rng.integers(min_cells, max_cells + 1))
        J = int(rng.integers(1, I))
        entries = (rng.random((J, I)) < density).astype(int).tolist()
        try:
            model = validate_model(entries)
        except ModelValidationError:
            continue
        if overall is None or model.has_overall_effect == overall:
            return model


def random_overall_model(rng: np.random.Generator, max_cells: int = 10, min_cells: int = 3):
    """A model with 1' as its first row; other rows may leave cells uncovered.

    Draws whose reduction would leave a single cell are redrawn.
    """
    while True:
        I = int(rng.integers(min_cells, max_cells + 1))
        J = int(rng.integers(1, I - 1))
        rows = (rng.random((J, I)) < 0.5).astype(int).tolist()
        try:
            model = validate_model([[1] * I] + rows)
        except ModelValidationError:
            continue
        # the reduced model must keep at least two cells
        covered = (np.array(rows).sum(axis=0) > 0).sum()
        if covered >= 2:
            return model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def bundled():
    return load_model
