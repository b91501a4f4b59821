import numpy as np
import pytest


def fd_gradient(dictionary, points, step=1e-5):
    """Central finite-difference gradient of every basis function."""
    x = np.asarray(points, dtype=np.float64)
    n, m, d = dictionary.size, x.shape[0], x.shape[1]
    out = np.empty((n, m, d))
    for j in range(d):
        xp = x.copy()
        xm = x.copy()
        xp[:, j] += step
        xm[:, j] -= step
        vp = dictionary.evaluate(xp).values
        vm = dictionary.evaluate(xm).values
        out[:, :, j] = (vp - vm) / (2.0 * step)
    return out


def fd_hessian(dictionary, points, step=1e-5):
    """Central finite differences of the analytic gradient."""
    x = np.asarray(points, dtype=np.float64)
    n, m, d = dictionary.size, x.shape[0], x.shape[1]
    out = np.empty((n, m, d, d))
    for j in range(d):
        xp = x.copy()
        xm = x.copy()
        xp[:, j] += step
        xm[:, j] -= step
        gp = dictionary.evaluate(xp).gradients
        gm = dictionary.evaluate(xm).gradients
        out[:, :, :, j] = (gp - gm) / (2.0 * step)
    return out


def rel_err(approx, exact):
    """Max abs deviation scaled by the overall magnitude of `exact`."""
    scale = max(np.max(np.abs(exact)), 1.0)
    return np.max(np.abs(approx - exact)) / scale


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20260826))


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-criterion lines collected during the run."""
    try:
        from test_acceptance import REPORT_LINES
    except ImportError:
        return
    if REPORT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in REPORT_LINES:
            terminalreporter.write_line(line)
