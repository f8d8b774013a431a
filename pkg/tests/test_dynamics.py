import math

import numpy as np
import pytest

from conftest import make_ring, random_density
from ringtrap.bath import BathSpec
from ringtrap.dynamics import (branching_ratio, dopri45, efficiency_linear_solve, efficiency_ode,
                               lawson_dopri45, propagate, site_populations)
from ringtrap.errors import StiffnessError, UnboundedIntegralError
from ringtrap.estimator import assemble_model
from ringtrap.exciton import ExcitonSystem, SiteConfig
from ringtrap.units import CM_TO_RAD_PS
from ringtrap.validation import single_site_system


def pair(coupling=40.0, trap=0.0, loss=0.0):
    sites = (SiteConfig(1, [0, 0, 0], 12000.0, [1, 0, 0], 0.0, loss),
             SiteConfig(2, [6, 0, 0], 12000.0, [1, 0, 0], trap, 0.0))
    return ExcitonSystem(sites, np.array([[0.0, coupling], [coupling, 0.0]]))


def test_dopri45_exponential():
    _, y, _ = dopri45(lambda t, y: (-0.5 + 3j) * y, np.array([1.0 + 0j]), 0.0, 2.0, rtol=1e-10)
    assert abs(y[0] - np.exp((-0.5 + 3j) * 2.0)) < 1e-9


def test_lawson_handles_fast_phase_exactly():
    # y' = i w y - k y with the phase in the integrating factor
    a = np.array([5000j])
    _, y, samples = lawson_dopri45(a, lambda y: -0.3 * y, np.array([1.0 + 0j]), 1.0,
                                   rtol=1e-10, sample_times=[0.5])
    assert abs(y[0] - np.exp((5000j - 0.3) * 1.0)) < 1e-9
    assert abs(samples[0][0] - np.exp((5000j - 0.3) * 0.5)) < 1e-9


def test_stiffness_error_on_step_collapse():
    with pytest.raises(StiffnessError), np.errstate(all="ignore"):
        dopri45(lambda t, y: y**3, np.array([1.0 + 0j]), 0.0, 1.0, h_min=1e-6)


def test_scalar_decay():
    system = single_site_system(kappa=2.0, gamma=0.5)
    L = assemble_model(system, BathSpec(100.0, 300.0, 293.0, 0.0)).liouvillian
    times = np.linspace(0, 1.0, 11)
    traj = propagate(np.array([1.0 + 0j]), L, 1.0, sample_times=times)
    assert np.allclose(site_populations(traj.states)[:, 0], np.exp(-2 * 2.5 * times), atol=1e-9)


def test_rabi_oscillation():
    V = 40.0
    L = assemble_model(pair(V), BathSpec(0.0, 300.0, 293.0, 0.0)).liouvillian
    times = np.linspace(0, 0.5, 26)
    traj = propagate(np.array([1.0, 0.0]), L, 0.5, sample_times=times)
    expected = np.cos(V * CM_TO_RAD_PS * times) ** 2
    assert np.allclose(site_populations(traj.states)[:, 0], expected, atol=1e-8)


def test_callable_generator_agrees_with_liouvillian():
    m = assemble_model(make_ring(), BathSpec(60.0, 300.0, 293.0, 8.0))
    L = m.liouvillian
    rho0 = random_density(np.random.default_rng(0), m.system.n_sites)
    times = [0.0, 0.05, 0.2]
    a = propagate(rho0, L, 0.2, sample_times=times, tol=1e-10)
    b = propagate(rho0, lambda t, r: L.rhs(r), 0.2, sample_times=times, tol=1e-10)
    assert np.abs(a.states - b.states).max() < 1e-7


@pytest.mark.parametrize("rb", [0.0, 8.0, math.inf])
def test_ode_matches_linear_solve(rb):
    m = assemble_model(make_ring(), BathSpec(60.0, 300.0, 293.0, rb))
    psi = np.array([1, 1, 0, 0, 0], dtype=complex) / math.sqrt(2)
    lin = efficiency_linear_solve(psi, m.system, m.liouvillian)
    ode = efficiency_ode(psi, m.system, m.liouvillian, t_max=5000.0, tail_tol=1e-10, tol=1e-10)
    assert abs(ode.eta - lin.eta) < 1e-8
    assert lin.bookkeeping_error < 1e-10
    assert ode.bookkeeping_error < 1e-8


def test_yield_is_linear_in_the_state():
    m = assemble_model(make_ring(), BathSpec(60.0, 300.0, 293.0, 8.0))
    rng = np.random.default_rng(1)
    r1, r2 = random_density(rng, 5), random_density(rng, 5)
    e1, e2, e12 = efficiency_linear_solve([r1, r2, 0.3 * r1 + 0.7 * r2], m.system, m.liouvillian)
    assert e12.eta == pytest.approx(0.3 * e1.eta + 0.7 * e2.eta, abs=1e-13)


def test_two_site_trap_branching():
    # coherent pair, trap on site 2, loss on site 1: eta lies strictly between 0 and 1
    system = pair(trap=1.0, loss=0.2)
    m = assemble_model(system, BathSpec(0.0, 300.0, 293.0, 0.0))
    r = efficiency_linear_solve(np.array([1.0, 0.0]), system, m.liouvillian)
    assert 0 < r.eta < 1 and r.eta + r.eta_loss == pytest.approx(1.0, abs=1e-12)


def test_branching_ratio():
    assert branching_ratio(4.0, 1e-3) == pytest.approx(4.0 / 4.001, rel=1e-15)
    system = single_site_system()
    m = assemble_model(system, BathSpec(100.0, 300.0, 293.0, 0.0))
    r = efficiency_linear_solve(np.array([1.0]), system, m.liouvillian)
    assert r.eta == pytest.approx(4.0 / 4.001, abs=1e-12)


def test_no_sink_is_unbounded():
    system = pair()
    m = assemble_model(system, BathSpec(50.0, 300.0, 293.0, 0.0))
    with pytest.raises(UnboundedIntegralError):
        efficiency_linear_solve(np.array([1.0, 0.0]), system, m.liouvillian)
    with pytest.raises(UnboundedIntegralError):
        efficiency_ode(np.array([1.0, 0.0]), system, m.liouvillian)


def test_short_horizon_warns():
    m = assemble_model(make_ring(), BathSpec(60.0, 300.0, 293.0, 0.0))
    with pytest.warns(RuntimeWarning):
        r = efficiency_ode(np.eye(5)[0], m.system, m.liouvillian, t_max=0.01)
    assert r.residual_trace > 1e-6 and r.warnings
