import numpy as np
import pytest

from pollnet.model import DistributionSpec as D
from pollnet.model import NetworkModel
from pollnet.modelfile import katayama


@pytest.fixture
def kat():
    return katayama()


def tandem2(r=(1.0, 1.0)):
    p = np.array([[0.0, 1.0], [0.0, 0.0]])
    return NetworkModel([1.0, 0.0], [D.deterministic(1)] * 2, [D.deterministic(x) for x in r], p)


def symmetric(n=3, service=None, switchover=None):
    service = service or D.exponential(1.0)
    switchover = switchover or D.exponential(1.0)
    return NetworkModel([1.0] * n, [service] * n, [switchover] * n, np.zeros((n, n)), name=f"sym{n}")


def random_dist(rng, allow_zero=False):
    kind = rng.integers(4)
    if allow_zero and rng.random() < 0.15:
        return D.deterministic(0.0)
    if kind == 0:
        return D.deterministic(rng.uniform(0.1, 2))
    if kind == 1:
        return D.exponential(rng.uniform(0.1, 2))
    if kind == 2:
        lo = rng.uniform(0, 1)
        return D.uniform(lo, lo + rng.uniform(0.05, 2))
    return D.gamma(rng.uniform(0.3, 4), rng.uniform(0.5, 3))


def random_model(seed, n_max=6, n_min=1):
    """A valid network with random substochastic routing and a positive switch-over total."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    p = rng.random((n, n)) * (rng.random((n, n)) < 0.5)
    rows = p.sum(axis=1)
    p = p / np.where(rows > 0, rows, 1)[:, None] * rng.uniform(0, 0.95, n)[:, None]
    w = rng.random(n) * (rng.random(n) < 0.7)
    w[rng.integers(n)] += 0.5
    sw = [random_dist(rng, allow_zero=True) for _ in range(n)]
    if sum(s.mean for s in sw) == 0:
        sw[0] = D.exponential(1.0)
    return NetworkModel(w, [random_dist(rng) for _ in range(n)], sw, p, name=f"random{seed}")


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for the acceptance summary, then assert it."""

    def record(label, passed, detail):
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
        assert passed, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
