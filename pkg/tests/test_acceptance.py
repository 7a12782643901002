"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the
"acceptance criteria" section at the end of the pytest run.
"""

import subprocess
import sys
import time
from typing import Optional

import pytest

from conftest import DATA_DIR, REPO, energy_like
from natboost.boosting import BoostConfig
from natboost.data import Dataset, load_csv
from natboost.evaluation import format_row, run_benchmark
from natboost.tree import DEPTH_CLIPPED

pytestmark = pytest.mark.acceptance

DEFAULTS = BoostConfig()
BASELINE = BoostConfig(n_estimators=2000, learning_rate=0.01, growth_mode=DEPTH_CLIPPED,
                       max_depth=3)


def load_energy() -> Optional[Dataset]:
    """ENB2012 layout: X1..X8, heating load, cooling load. Heating load is the target."""
    path = DATA_DIR / "energy.csv"
    if not path.exists():
        return None
    ds = load_csv(path, 8)
    # the cooling load column must not leak in as a feature
    return Dataset(ds.features[:, :8], ds.targets, ds.feature_names[:8])


def check_table_row(report_criterion, name, label, ds, rmse_range, nll_range, budget_s):
    t0 = time.perf_counter()
    res = run_benchmark(ds, DEFAULTS, trials=20, base_seed=0)
    wall = time.perf_counter() - t0
    ok = (rmse_range[0] <= res.rmse_mean <= rmse_range[1]
          and nll_range[0] <= res.nll_mean <= nll_range[1] and wall < budget_s)
    report_criterion(name, ok,
                     f"{format_row(label, ds.n_rows, res)} | RMSE range {rmse_range}, "
                     f"NLL range {nll_range}, wall {wall:.1f}s (budget {budget_s}s)")
    assert rmse_range[0] <= res.rmse_mean <= rmse_range[1]
    assert nll_range[0] <= res.nll_mean <= nll_range[1]
    assert wall < budget_s


def test_criterion_1_energy(report_criterion):
    name = "criterion 1 energy"
    ds = load_energy()
    if ds is None:
        report_criterion(name, False, f"{DATA_DIR / 'energy.csv'} not available; cannot evaluate")
        pytest.fail("energy.csv missing from the data directory")
    check_table_row(report_criterion, name, "energy", ds, (0.28, 0.62), (-0.1, 0.9), 600)


def test_criterion_2_concrete(report_criterion):
    ds = load_csv(DATA_DIR / "concrete.csv", "compressive_strength")
    check_table_row(report_criterion, "criterion 2 concrete", "concrete", ds,
                    (4.0, 5.6), (2.70, 3.25), 900)


def test_criterion_3_wine(report_criterion):
    ds = load_csv(DATA_DIR / "winequality-red.csv", "quality")
    check_table_row(report_criterion, "criterion 3 wine", "wine", ds,
                    (0.55, 0.72), (0.80, 1.10), 1200)


def test_criterion_4_speed(report_criterion):
    name = "criterion 4 speed"
    ds = load_energy()
    if ds is None:
        # the synthetic figure is context for the ledger, not a substitute for the criterion
        z = energy_like()
        fast = run_benchmark(z, DEFAULTS, trials=3).att_seconds
        slow = run_benchmark(z, BASELINE, trials=3).att_seconds
        report_criterion(name, False,
                         f"{DATA_DIR / 'energy.csv'} not available; cannot evaluate "
                         f"(informational, Energy-like synthetic 768x8: "
                         f"{slow / fast:.2f}x, required 2.0x on real Energy)")
        pytest.fail("energy.csv missing from the data directory")
    fast = run_benchmark(ds, DEFAULTS, trials=20).att_seconds
    slow = run_benchmark(ds, BASELINE, trials=20).att_seconds
    ratio = slow / fast
    report_criterion(name, ratio >= 2.0,
                     f"leaf m=500 ATT {fast:.2f}s vs depth-3 m=2000 ATT {slow:.2f}s: "
                     f"{ratio:.2f}x (required >= 2.0x)")
    assert ratio >= 2.0


def test_criterion_5_large_datasets(report_criterion):
    report_criterion("criterion 5 large datasets", None,
                     "non-gating: Protein and Year MSD are out of desk scale; "
                     "optional Kin8nm/Naval/Power runs are not shipped")
    pytest.skip("criterion 5 is not gating")


PROPERTY_SUITE = [
    "tests/test_distribution.py::TestGradient::test_random_points_vs_finite_differences",
    "tests/test_distribution.py::TestFisher::test_monte_carlo",
    "tests/test_distribution.py::TestNaturalGradient::test_fisher_identity_random",
    "tests/test_tree.py::TestBestFirst::test_structure",
    "tests/test_tree.py::TestDepthWise::test_structure",
    "tests/test_tree.py::TestBestFirst::test_exhaustive_greedy_oracle",
    "tests/test_boosting.py::TestFit::test_training_nll_strictly_decreases",
    "tests/test_boosting.py::TestSerialization::test_round_trip_bitwise",
    "tests/test_boosting.py::TestSerialization::test_deterministic_bytes",
    "tests/test_evaluation.py::TestNllOriginal::test_identity_holds_on_random_scalers",
    "tests/test_evaluation.py::TestNllOriginal::test_scale_two_shifts_by_log2",
]


def test_criterion_6_property_suites(report_criterion):
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *PROPERTY_SUITE],
        cwd=REPO, capture_output=True, text=True)
    wall = time.perf_counter() - t0
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and wall < 60
    report_criterion("criterion 6 property suites", ok,
                     f"{summary} | wall {wall:.1f}s (budget 60s)")
    assert proc.returncode == 0, proc.stdout[-3000:]
    assert wall < 60
