from __future__ import annotations

import numpy as np
import pytest

from covsel.model import SensorPool, SystemModel, generate_synthetic_pool

# Seeded instance: m=3, n_c=200, Q=0.5 I, sigma2=0.5.
SEEDED = dict(m=3, n_c=200, sigma2=0.5, q_scale=0.5, seed=2024)
DELTA = 0.10


@pytest.fixture(scope="session")
def seeded_instance() -> tuple[SystemModel, SensorPool]:
    return generate_synthetic_pool(**SEEDED)


@pytest.fixture
def small_instance() -> tuple[SystemModel, SensorPool]:
    return generate_synthetic_pool(2, 12, 0.5, 0.5, seed=5)


@pytest.fixture
def basis_pool() -> SensorPool:
    return SensorPool.from_arrays(np.eye(2), 1.0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
