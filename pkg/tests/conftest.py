import numpy as np
import pytest

from gsmgp.kernels import SubKernelGrid


def random_grids(rng, m, sigma_max=0.01):
    return [SubKernelGrid(float(rng.uniform(0.0, 0.5)), float(rng.uniform(1e-4, sigma_max))) for _ in range(m)]


def random_pd(rng, n, ridge=1.0):
    A = rng.standard_normal((n, n))
    return A @ A.T + ridge * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one summary line per acceptance criterion."""

    def record(label, ok, detail=""):
        _VERDICTS.append(f"{label}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip())
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
