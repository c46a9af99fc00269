import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oobgini import Categorical, Continuous, Dataset  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def toy():
    """Six rows, one continuous and one 3-level categorical feature."""
    return Dataset(
        ("x", "c"),
        (Continuous(), Categorical(3)),
        (np.array([0.5, 1.5, 2.5, 3.5, 4.5, 5.5]), np.array([0, 1, 2, 0, 1, 2])),
        np.array([0, 0, 1, 1, 0, 1]),
    )


@pytest.fixture
def random_data():
    def make(n=40, seed=0, levels=(2, 5)):
        rng = np.random.default_rng(seed)
        cols = [rng.normal(size=n)] + [rng.integers(0, k, n) for k in levels]
        kinds = (Continuous(),) + tuple(Categorical(k) for k in levels)
        names = ("x",) + tuple(f"c{k}" for k in levels)
        y = rng.integers(0, 2, n)
        y[:2] = (0, 1)
        return Dataset(names, kinds, tuple(cols), y)

    return make
