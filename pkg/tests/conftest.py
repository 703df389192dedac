import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from adaprelora import _backend, sampling

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(params=_backend.available_backends())
def backend(request):
    """Run the test once per importable kernel backend."""
    previous = _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def e1_pair():
    # B = e1 (2x1), A = e1^T (1x2): the hand-checkable instance
    from adaprelora.generator import FactorPair

    return FactorPair([[1.0], [0.0]], [[1.0, 0.0]])


def instances(count, stream=0):
    return [sampling.random_instance(seed, stream) for seed in range(count)]


ACCEPTANCE_LINES = []


@pytest.fixture
def report(capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def _report(label, passed, detail):
        line = f"{label} {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
