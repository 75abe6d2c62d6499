import json
from pathlib import Path

import numpy as np
import pytest

from kahlerflow import RunConfig, run_flow
from kahlerflow.geometry import ConformalMetric, latitude_grid

ORACLE_PATH = Path(__file__).parent / "oracles" / "frozen.json"


@pytest.fixture(scope="session")
def oracle():
    return json.loads(ORACLE_PATH.read_text())


def perturbed_metric(N, eps=0.05, coeffs=(0.0, 0.0, 1.0, 0.5)):
    g = latitude_grid(N)
    return ConformalMetric.normalized(g, eps * np.polynomial.polynomial.polyval(g.x, coeffs))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def short_traj():
    """Coarse perturbed run with fine cadence, shared by the identity tests."""
    cfg = RunConfig(N=64, t_end=0.6, cadence=0.01, sector_cap=3)
    return run_flow(cfg)


@pytest.fixture(scope="session")
def round_traj():
    return run_flow(RunConfig(N=32, amplitude=0.0, t_end=0.2, cadence=0.05, sector_cap=3))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
