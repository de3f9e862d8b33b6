import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def sset_sweep():
    """Adaptive and non-adaptive curves for s-sets, n = 4096, s = 8, m = n.

    mu runs over 1.0, 1.25, ..., 6.0 with 300 trials per point.  The adaptive
    target at each mu is the one whose sufficient magnitude equals mu at this
    budget.  Shared by the harness tests and the acceptance run because it
    takes several minutes.
    """
    from adaptive_support.classes import SSet
    from adaptive_support.harness import ADAPTIVE, NONADAPTIVE, ExperimentConfig, phase_sweep

    grid = tuple(1.0 + 0.25 * i for i in range(21))
    curves = {}
    for proc in (ADAPTIVE, NONADAPTIVE):
        cfg = ExperimentConfig(SSet(4096, 8), proc, mu_grid=grid, trials=300, base_seed=2024,
                               budget_matched=True)
        curves[proc] = phase_sweep(cfg)
    return curves


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")
