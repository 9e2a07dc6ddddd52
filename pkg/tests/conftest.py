import numpy as np
import pytest

from logentropy.logsobolev import random_positive_field
from logentropy.manifold import ManifoldSpec, conformal_metric, node_coordinates, round_metric


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def flat_torus():
    return conformal_metric(ManifoldSpec.torus(16))


@pytest.fixture
def unit_sphere():
    return conformal_metric(ManifoldSpec.axisym_sphere(64))


@pytest.fixture
def bumpy_sphere():
    spec = ManifoldSpec.axisym_sphere(64)
    th = node_coordinates(spec)
    return conformal_metric(spec, 0.05 * np.cos(2 * th))


@pytest.fixture
def bumpy_torus():
    spec = ManifoldSpec.torus(16, 12)
    x, y = node_coordinates(spec)
    return conformal_metric(spec, 0.2 * np.cos(x) + 0.1 * np.sin(2 * y))


@pytest.fixture
def round2():
    return round_metric(ManifoldSpec.round_sphere(2), 1.0)


def positive_field(metric, rng):
    """A smooth positive field that is not constant."""
    return random_positive_field(metric, rng, amplitude=rng.uniform(0.2, 1.5))


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion (printed in the summary)."""

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
