import warnings

import numpy as np
import pytest

from iddmd.snapshots import SnapshotRecord, SnapshotSet

# lines collected by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def simulate_linear(ops, params, x0s, n_steps):
    """Records of x_k = (A0 + sum eps_i A_i) x_{k-1}."""
    recs = []
    for eps, x0 in zip(params, x0s):
        a = ops[0] + sum(e * ai for e, ai in zip(np.atleast_1d(eps), ops[1:]))
        x = np.empty((len(x0), n_steps))
        x[:, 0] = x0
        for k in range(1, n_steps):
            x[:, k] = a @ x[:, k - 1]
        recs.append(SnapshotRecord(np.atleast_1d(eps), x))
    return recs


@pytest.fixture
def scalar_set():
    """x_k = (0.9 + 0.05 eps) x_{k-1}, eps in {0, 1}."""
    ops = [np.array([[0.9]]), np.array([[0.05]])]
    recs = simulate_linear(ops, [0.0, 1.0], [np.array([1.0]), np.array([1.0])], 20)
    return SnapshotSet(recs, 1.0, ("eps",))


@pytest.fixture(autouse=True)
def _quiet_runtime_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield
