import numpy as np
import pytest

from lossyphase import fock
from lossyphase.gaussian import InputSpec

ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


def pytest_terminal_summary(terminalreporter):
    lines = terminalreporter.config.stash.get(ACCEPTANCE, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per criterion, then assert it."""
    lines = request.config.stash[ACCEPTANCE]

    def report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[number] = line
        print(line)
        assert ok, line

    return report


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture(scope="session")
def small_state():
    """Lossy two-mode input padded by one level, cheap enough for matrix tests."""
    spec = InputSpec(0.5, 0.3, 0.1)
    state = fock.pad(fock.lossy_input_state(spec), 1)
    return spec, state


def random_density(rng, dims, rank=None):
    n = int(np.prod(dims))
    rank = rank or n
    z = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = z @ z.conj().T
    return fock.FockState(rho / np.trace(rho).real, tuple(dims), 0.0)
