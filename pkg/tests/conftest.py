"""Shared fixtures: datasets and trained models reused across test modules.

Training fixtures are session-scoped because they cost seconds, not
milliseconds; tests must treat them as read-only.
"""

import numpy as np
import pytest

from futurefit.experiments import run_single

ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260814)


@pytest.fixture(scope="session")
def moons_gi_cell(tmp_path_factory):
    """One GI training run on the rotated-moons data, with artifacts on disk."""
    out = tmp_path_factory.mktemp("moons_gi")
    return run_single({"name": "moons"}, "gi", 0, out_dir=str(out))


@pytest.fixture(scope="session")
def boolean_gi_cell(tmp_path_factory):
    out = tmp_path_factory.mktemp("boolean_gi")
    return run_single({"name": "boolean"}, "gi", 0, out_dir=str(out))


@pytest.fixture(scope="session")
def boolean_erm_cell(tmp_path_factory):
    out = tmp_path_factory.mktemp("boolean_erm")
    return run_single({"name": "boolean"}, "baseline", 0, out_dir=str(out))
