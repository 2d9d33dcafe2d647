import numpy as np
import pytest

from corrbound.geometry import random_config
from corrbound.rng import stream_rng


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def config_pairs(seed, count, n_max, d_values=(1, 2, 3), box=None, n_min=1):
    """Deterministic (X, Y) pairs for oracle loops."""
    out = []
    for t in range(count):
        r = stream_rng(seed, t)
        n = int(r.integers(n_min, n_max + 1))
        d = int(r.choice(d_values))
        b = box or (max(5, 2 * n + 2) if d == 1 else 5)
        while b**d < 2 * n:
            b += 1
        out.append((random_config(r, n, d, b), random_config(r, n, d, b)))
    return out


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
