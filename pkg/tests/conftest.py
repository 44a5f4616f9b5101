import numpy as np
import pytest

from arpvol.sync import TickSeries


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brownian_ticks(p, n, seed=0, sigma=1.0, noise=0.0, keep=1.0):
    """Synchronous (or randomly thinned) Brownian log-prices on [0, 1]."""
    r = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n + 1)
    X = np.vstack([np.zeros(p), np.cumsum(r.standard_normal((n, p)) * sigma / np.sqrt(n), axis=0)])
    out = []
    for i in range(p):
        m = r.random(n + 1) < keep
        m[[0, -1]] = True
        y = X[m, i] + noise * r.standard_normal(m.sum())
        out.append(TickSeries(i, t[m], y))
    return out


_ACCEPTANCE: dict = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    """Store a one-line acceptance outcome, printed in the terminal summary."""
    _ACCEPTANCE[criterion] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
