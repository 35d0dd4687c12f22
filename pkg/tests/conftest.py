import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qvlasov.forcefield import ForceField
from qvlasov.grid import PhaseSpaceGrid

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_force(grid: PhaseSpaceGrid, n_t: int, rng, scale: float = 1.0) -> ForceField:
    return ForceField(scale * rng.standard_normal((n_t, grid.d, grid.n_spatial)), grid.n_gr)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def demo_grid():
    return PhaseSpaceGrid(1, 64, 2.0, 1.0)


# one verdict line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    def record(criterion: str, ok: bool, detail: str):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
