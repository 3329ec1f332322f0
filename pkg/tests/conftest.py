import numpy as np
import pytest

from degenkernel.grid import build_grid
from degenkernel.model import ModelParams
from degenkernel.spectral import ModeBank


@pytest.fixture(autouse=True)
def _no_env_cache(monkeypatch):
    monkeypatch.delenv("DEGENKERNEL_CACHE_DIR", raising=False)


@pytest.fixture(scope="session")
def params():
    return ModelParams(3, 3.0, 4.0)


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(20.0, 400, 1.5)


@pytest.fixture(scope="session")
def small_bank(params, small_grid):
    return ModeBank(params, small_grid, cache_dir=None)


@pytest.fixture(scope="session")
def default_grid():
    return build_grid(20.0, 1600, 1.5)


@pytest.fixture(scope="session")
def default_bank(params, default_grid):
    return ModeBank(params, default_grid, cache_dir=None)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
