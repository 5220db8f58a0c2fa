import numpy as np
import pytest

from thermored.building import WeatherSeries, load_building
from thermored.cli import data_file
from thermored.statespace import StateSpaceModel


def random_stable(rng, n, m=1, p=1, feedthrough=False):
    """Random stable model with eigenvalues spread over two decades."""
    A = rng.standard_normal((n, n))
    shift = np.max(np.linalg.eigvals(A).real) + rng.uniform(0.05, 1.0)
    A = A - shift * np.eye(n)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    D = rng.standard_normal((p, m)) if feedthrough else np.zeros((p, m))
    return StateSpaceModel(A, B, C, D)


def random_systems(count, seed, n_max=30):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(2, n_max + 1))
        m = int(rng.integers(1, 4)) if i % 2 else 1
        p = int(rng.integers(1, 4)) if i % 2 else 1
        out.append(random_stable(rng, n, m, p, feedthrough=bool(i % 3 == 0)))
    return out


@pytest.fixture(scope="session")
def weather():
    return WeatherSeries.from_csv(data_file("weather_tropical.csv"))


@pytest.fixture(scope="session")
def closed_building():
    return load_building(data_file("dwelling_closed.json"))


@pytest.fixture(scope="session")
def open_building():
    return load_building(data_file("dwelling_open.json"))


@pytest.fixture(scope="session")
def two_zone():
    return load_building(data_file("two_zone.json"))


def pytest_terminal_summary(terminalreporter):
    import sys
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, title, detail = results[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {title}: {detail}")
