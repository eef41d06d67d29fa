import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from atomhom import estimators, experiment  # noqa: E402
from atomhom.config import ScenarioConfig  # noqa: E402

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def reference_scan():
    """The default scenario's full delay scan, shared by the end-to-end checks."""
    cfg = ScenarioConfig.default()
    t0 = time.perf_counter()
    batches = experiment.run_dip_scan(cfg.source, cfg.schedule, cfg.detector,
                                      cfg.scan.tau_grid, cfg.scan.shots_per_tau, cfg.run_seed)
    elapsed = time.perf_counter() - t0
    points = estimators.dip_scan(batches, cfg.volumes["c"], cfg.volumes["d"])
    fit = estimators.fit_dip_scan(points)
    return {"cfg": cfg, "batches": batches, "points": points, "fit": fit, "elapsed": elapsed}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
