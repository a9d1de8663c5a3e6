import numpy as np
import pytest


def flatten(arrays):
    return np.concatenate([np.ravel(a) for a in arrays]) if arrays else np.zeros(0)


def unflatten(vec, like):
    out, i = [], 0
    for a in like:
        out.append(vec[i:i + a.size].reshape(a.shape))
        i += a.size
    return out


def grad_close(analytic, numeric, rtol=1e-5, floor=1e-9):
    """Per-coordinate relative agreement with an absolute floor for coordinates
    whose true value is at the central-difference rounding level."""
    a, n = np.asarray(analytic), np.asarray(numeric)
    return np.abs(a - n) <= rtol * np.maximum(np.abs(a), np.abs(n)) + floor


@pytest.fixture
def rng():
    from ffinr.numerics import Rng

    return Rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
