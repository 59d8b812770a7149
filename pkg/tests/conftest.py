import numpy as np
import pytest
from hypothesis import settings

from latticenoise.channels import ChannelSpec
from latticenoise.pipeline import design_with_pattern

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

CHANNELS = ("phase_flip", "bit_flip", "bit_phase_flip", "depolarizing")
P_VALUES = (0.125, 0.25, 0.5)


def random_density(rng, pure=False):
    if pure:
        ket = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        ket /= np.linalg.norm(ket)
        return np.outer(ket, ket.conj())
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


class DesignCache:
    """Designs and patterns built once per test session."""

    def __init__(self):
        self._store = {}
        self.timings = {}

    def get(self, kind, p):
        import time

        key = (kind, float(p))
        if key not in self._store:
            t0 = time.perf_counter()
            self._store[key] = design_with_pattern(ChannelSpec(kind, p=p))
            self.timings[key] = time.perf_counter() - t0
        return self._store[key]


@pytest.fixture(scope="session")
def designs():
    return DesignCache()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
