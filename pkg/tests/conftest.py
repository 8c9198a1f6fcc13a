import warnings

import numpy as np
import pytest

from geofair.errors import ConditioningError, ThresholdWarning
from geofair.geometry import ProblemInstance

WORKED_PX = [0.25, 0.75]
WORKED_PSX = [[0.275, 0.32], [0.725, 0.68]]
WORKED_PTX = [[0.25, 0.4], [0.75, 0.6]]

ACCEPTANCE_LINES = []


@pytest.fixture
def worked():
    return ProblemInstance(WORKED_PX, WORKED_PSX, WORKED_PTX, eps=0.05, rate=0.75)


@pytest.fixture(autouse=True)
def _quiet_threshold_warnings():
    # The worked example runs far above the sufficient thresholds on purpose.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ThresholdWarning)
        yield


def random_instance(rng, n, m=None, eps=0.01, rate=np.inf, min_det=1e-3):
    m = n if m is None else m
    while True:
        px = rng.dirichlet(np.ones(n))
        psx = rng.dirichlet(np.ones(n), size=n).T
        ptx = rng.dirichlet(np.ones(m), size=n).T
        if px.min() < 1e-3 or abs(np.linalg.det(psx)) < min_det:
            continue
        try:
            return ProblemInstance(px, psx, ptx, eps, rate)
        except ConditioningError:
            continue


@pytest.fixture
def acceptance():
    def record(number, title, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
                                + (f" -- {detail}" if detail else ""))
        assert ok, f"criterion {number} failed: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
