from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from irfkit.dgpsim import DgpSpec, simulate  # noqa: E402
from irfkit.tscore import DesignMatrix, Series  # noqa: E402


def design_from_arrays(y, X, labels=None) -> DesignMatrix:
    X = np.atleast_2d(np.asarray(X, dtype=float).T).T
    labels = labels or [f"c{j}" for j in range(X.shape[1])]
    return DesignMatrix(
        columns=tuple((lab, X[:, j].copy()) for j, lab in enumerate(labels)),
        target=np.asarray(y, dtype=float),
        target_label="y[t+0]",
        rows=np.arange(len(y)),
        rows_dropped_head=0,
        rows_dropped_tail=0,
    )


@pytest.fixture(scope="session")
def extended_big():
    """Extended DGP at the reference calibration, T = 10^6."""
    return simulate(DgpSpec.extended(T=1_000_000, seed=11))


@pytest.fixture(scope="session")
def simple_big():
    return simulate(DgpSpec.simple(T=1_000_000, seed=12))


@pytest.fixture(scope="session")
def iv_big():
    return simulate(DgpSpec.iv(T=1_000_000, seed=13))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def as_series(name, values) -> Series:
    return Series(name, values)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.REPORT):
        terminalreporter.write_line(line)
