import numpy as np
import pytest

from ringtrap.config import load_config
from ringtrap.exciton import ExcitonSystem, SiteConfig, dipole_coupling_matrix, ring_geometry

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def config():
    return load_config()


@pytest.fixture
def report():
    """Record a one-line criterion verdict; echoed again in the terminal summary."""
    def _report(criterion, passed, text):
        line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {text}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return passed
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def make_ring(n=4, radius=8.0, center=True, strength=50000.0, trap=2.0, loss=0.01,
              ring_energy=12500.0, center_energy=12300.0):
    """Small ring with an optional trapping site at the centre."""
    centers = [([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])] if center else []
    pos, dip = ring_geometry(n, radius, centers)
    sites = [SiteConfig(i + 1, pos[i], ring_energy + 37.0 * i, dip[i], 0.0, loss)
             for i in range(n)]
    if center:
        sites.append(SiteConfig(n + 1, pos[n], center_energy, dip[n], trap, 0.0))
    V = dipole_coupling_matrix(sites, strength)
    return ExcitonSystem(tuple(sites), V, n_ring=n)


@pytest.fixture
def small_system():
    return make_ring()


def random_density(rng, M):
    A = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
    rho = A @ A.conj().T
    return rho / np.trace(rho)
