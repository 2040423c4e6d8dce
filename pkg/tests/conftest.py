import numpy as np
import pytest

from panelfactor import PanelDataset

ACCEPTANCE_LINES = []


def random_panel(rng, n, t, d_x=1, d_w=1, noise=1.0):
    w = rng.normal(size=(n * t, d_w))
    x = 0.5 * w[:, :1] + rng.normal(size=(n * t, d_x))
    y = x @ np.arange(1, d_x + 1) + np.sin(w).sum(axis=1) + noise * rng.normal(size=n * t)
    return PanelDataset(n, t, y, x, w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_panel(rng):
    return random_panel(rng, 6, 5, d_x=2, d_w=1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
