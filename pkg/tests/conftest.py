import numpy as np
import pytest

from mergelab.protocols import build_one_way, build_two_way
from mergelab.states import GammaParams, build_instance


def random_state_vector(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_valid_gammas(rng):
    """Unit-modulus, nonreal gammas avoiding gamma2 = +-i gamma1^2."""
    while True:
        t1, t2 = rng.uniform(0.05, np.pi - 0.05, size=2) * rng.choice([-1, 1], size=2)
        g = GammaParams(np.exp(1j * t1), np.exp(1j * t2))
        if min(abs(g.gamma2 - 1j * g.gamma1 ** 2), abs(g.gamma2 + 1j * g.gamma1 ** 2)) > 1e-3:
            return g


@pytest.fixture(scope="session")
def instance():
    return build_instance()


@pytest.fixture(scope="session")
def two_way():
    return build_two_way()


@pytest.fixture(scope="session")
def one_way():
    return build_one_way()


_CRITERIA = {}


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = self.detail if exc_type is None else f"{exc_type.__name__}: {exc}".splitlines()[0]
        _CRITERIA[self.number] = f"criterion {self.number:>2} {status}  {self.title}" + (f"  ({detail})" if detail else "")
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
