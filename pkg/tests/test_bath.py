import math

import numpy as np
import pytest
from scipy import integrate, special

from conftest import make_ring
from ringtrap.bath import (BathSpec, correlation_matrix, cutoff_correlation, cutoff_filter,
                           effective_local_ER, neighbor_count, rate_matrix, single_site_rate,
                           spatial_correlation, spectral_density)
from ringtrap.errors import InvalidInputError
from ringtrap.units import CM_TO_RAD_PS, K_BOLTZMANN
from ringtrap.validation import cutoff_argument, j0_quadrature

BATH = BathSpec(100.0, 300.0, 293.0, 20.0)


def test_reorganisation_energy_integral():
    # E_R = (1/pi) int J(w)/w dw ... for the Drude form int_0^inf J(w)/w dw = E_R
    val, _ = integrate.quad(lambda w: spectral_density(w, BATH) / w, 0, np.inf)
    assert val == pytest.approx(BATH.reorg_energy, rel=1e-8)


def test_rate_against_hand_formula():
    w = 150.0
    n = 1.0 / (math.exp(w / (K_BOLTZMANN * 293.0)) - 1.0)
    J = 2 * 100.0 * 300.0 * w / (math.pi * (300.0**2 + w**2))
    assert single_site_rate(w, BATH) == pytest.approx(2 * math.pi * J * (1 + n) * CM_TO_RAD_PS,
                                                     rel=1e-13)
    assert single_site_rate(-w, BATH) == pytest.approx(2 * math.pi * J * n * CM_TO_RAD_PS,
                                                      rel=1e-13)


def test_zero_frequency_limit_is_continuous():
    g0 = single_site_rate(0.0, BATH)
    assert single_site_rate(1e-6, BATH) == pytest.approx(g0, rel=1e-6)
    assert single_site_rate(-1e-6, BATH) == pytest.approx(g0, rel=1e-6)


def test_detailed_balance():
    w = np.linspace(1.0, 2000.0, 100)
    ratio = single_site_rate(w, BATH) / single_site_rate(-w, BATH)
    assert np.allclose(ratio, np.exp(w / BATH.kT), rtol=1e-12)


@pytest.mark.parametrize("x", [0.0, 0.3, 1.1, 2.404825557695773, 7.5, 25.0])
def test_j0_matches_quadrature(x):
    assert abs(special.j0(x) - j0_quadrature(x)) < 1e-12


def test_kernel_limits_and_psd(config):
    pos = config.system.positions
    assert np.array_equal(correlation_matrix(pos, 0.0), np.eye(len(pos)))
    assert np.array_equal(correlation_matrix(pos, math.inf), np.ones((len(pos), len(pos))))
    for rb in (1.0, 10.0, 40.0, 300.0):
        assert np.linalg.eigvalsh(correlation_matrix(pos, rb)).min() > -1e-10
    assert spatial_correlation(0.0, 5.0) == 1.0


def test_bath_validation():
    with pytest.raises(InvalidInputError):
        BathSpec(-1.0)
    with pytest.raises(InvalidInputError):
        BathSpec(cutoff=0.0)
    with pytest.raises(InvalidInputError):
        BathSpec(corr_length=-2.0)


def test_rate_matrix_is_kernel_times_rate(config):
    r = rate_matrix(75.0, config.system.positions, BATH)
    assert np.allclose(r.gamma, single_site_rate(75.0, BATH) * r.correlation)


def test_cutoff_keeps_strong_pairs(config):
    G = correlation_matrix(config.system.positions, 20.0)
    C = cutoff_correlation(G, 0.7)
    assert np.all((C == 0) | (C >= 0.7) | np.eye(len(G), dtype=bool))
    r = cutoff_filter(rate_matrix(10.0, config.system.positions, BATH), 0.7)
    assert np.allclose(r.correlation, C)


def test_cutoff_argument_root():
    z = cutoff_argument(0.7)
    assert special.j0(z) == pytest.approx(0.7, abs=1e-14)
    assert 1.0 < z < 1.2


def test_neighbor_count_by_brute_force(config):
    system = config.system
    pos = system.positions[: system.n_ring]
    z = cutoff_argument(0.7)
    for rb in (5.0, 20.0, 40.0):
        # site 0 and its neighbours by chord length; count those within z * R_B
        d = np.linalg.norm(pos - pos[0], axis=1)
        assert neighbor_count(system, rb, 0.7) == np.sum(d <= z * rb)


def test_effective_er_two_sites():
    system = make_ring(2, radius=5.0, center=False)
    d = np.linalg.norm(system.positions[0] - system.positions[1])
    assert effective_local_ER(system, 20.0, 100.0) == pytest.approx(
        100.0 * (1 - special.j0(d / 20.0)), rel=1e-14)
