import numpy as np
import pytest

from dpcp.datagen import SynthConfig, synthesize


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_world():
    """A 6-meter, 30-slot world small enough for dense oracles."""
    return synthesize(SynthConfig(N=6, T=30, r=2, sigma2=1e-3, p_out=0.05, p_obs=0.8, d_c=0.6, seed=7))


_CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA] = []


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records an acceptance line and asserts ``ok``."""

    def record(n, ok, detail):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash[_CRITERIA].append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[_CRITERIA]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
