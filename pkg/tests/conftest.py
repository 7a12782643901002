import os
from pathlib import Path

import numpy as np
import pytest

from natboost.data import dataset_from_arrays

REPO = Path(__file__).resolve().parent.parent
DATA_DIR = Path(os.environ.get("NATBOOST_DATA_DIR", REPO / "data"))

_acceptance_lines = []


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line for the end-of-run acceptance summary (``ok=None`` is SKIP)."""
    def record(name, ok, detail):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        _acceptance_lines.append(f"[{status}] {name}: {detail}")
        print(f"[{status}] {name}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def linear_data():
    rng = np.random.default_rng(7)
    x = rng.uniform(-2, 2, size=(50, 1))
    y = 2 * x[:, 0] + rng.normal(0, 0.5, 50)
    return dataset_from_arrays(x, y)


def energy_like(n=768, d=8, seed=1):
    """Smooth nonlinear target on coarse, discrete-valued features."""
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 6, size=(n, d)).astype(float) / 5.0
    y = (15 * X[:, 0] + 8 * np.sin(3 * X[:, 1]) + 6 * X[:, 2] * X[:, 3]
         + 3 * X[:, 4] ** 2 + rng.normal(0, 0.5, n))
    return dataset_from_arrays(X, y)
