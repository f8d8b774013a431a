"""Invariant battery behind ``ringtrap validate``.

Each check returns a :class:`Check`; the battery is quick (well under a
minute) and runs on the supplied configuration.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .bath import (BathSpec, correlation_matrix, effective_local_ER, neighbor_count,
                   single_site_rate, spatial_correlation)
from .dynamics import branching_ratio, efficiency_linear_solve, efficiency_ode
from .estimator import assemble_model
from .exciton import ExcitonSystem, SiteConfig, initial_state
from .lindblad import apply_dissipator, local_dissipator, sum_F


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: {self.value:.3e} (tol {self.tolerance:.1e})"


def j0_quadrature(x):
    """J0 from its integral representation, (1/pi) int_0^pi cos(x sin t) dt."""
    with warnings.catch_warnings():
        # quad flags roundoff near machine precision; the result is still ~1e-15 accurate
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(lambda t: math.cos(x * math.sin(t)), 0.0, math.pi,
                                epsabs=1e-14, epsrel=1e-14, limit=200)
    return val / math.pi


def cutoff_argument(y=0.7):
    """First root z* of J0(z) = y."""
    return optimize.brentq(lambda z: special.j0(z) - y, 0.0, 2.404825557695773, xtol=1e-15)


def random_hermitian(rng, M):
    A = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
    return 0.5 * (A + A.conj().T)


def single_site_system(kappa=4.0, gamma=1e-3, energy=12000.0):
    site = SiteConfig(1, [0.0, 0.0, 0.0], energy, [1.0, 0.0, 0.0], kappa, gamma)
    return ExcitonSystem((site,), np.zeros((1, 1)), n_ring=1)


def two_site_system(d, energies=(12000.0, 12150.0), coupling=80.0):
    sites = (SiteConfig(1, [0.0, 0.0, 0.0], energies[0], [1.0, 0.0, 0.0], 0.0, 0.0),
             SiteConfig(2, [d, 0.0, 0.0], energies[1], [1.0, 0.0, 0.0], 0.0, 0.0))
    V = np.array([[0.0, coupling], [coupling, 0.0]])
    return ExcitonSystem(sites, V, n_ring=2)


def check_dissipator_null(config, n=10, seed=0):
    model = assemble_model(config.system, BathSpec(100.0, config.bath.cutoff,
                                                   config.bath.temperature, math.inf))
    gmax = max(np.abs(r.gamma).max() for r in model.rates)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n):
        rho = random_hermitian(rng, config.system.n_sites)
        d = model.liouvillian.dissipate(rho)
        if i == 0:  # one direct site-basis evaluation as a cross-check
            d2 = apply_dissipator(rho, model.lset, model.rates)
            worst = max(worst, np.linalg.norm(d2) / (gmax * np.linalg.norm(rho)))
        worst = max(worst, np.linalg.norm(d) / (gmax * np.linalg.norm(rho)))
    return Check("dissipator vanishes at full correlation", worst <= 1e-12, worst, 1e-12)


def check_sum_identity(config, seed=0):
    model = assemble_model(config.system, config.bath)
    rng = np.random.default_rng(seed)
    rho = random_hermitian(rng, config.system.n_sites)
    ks = rng.choice(len(model.lset), size=min(20, len(model.lset)), replace=False)
    worst = max(np.abs(sum_F(rho, model.lset, k)).max() for k in ks)
    return Check("sum over F_mn vanishes per bin", worst <= 1e-12, worst, 1e-12)


def check_two_site_reduction(n=5, seed=1):
    from .exciton import build_hamiltonian, eigendecompose
    from .bath import rate_matrices
    from .lindblad import lindblad_operators

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        d, rb, er = rng.uniform(3, 30), rng.uniform(2, 60), rng.uniform(5, 200)
        system = two_site_system(d)
        basis = eigendecompose(build_hamiltonian(system)).with_bins()
        lset = lindblad_operators(basis)
        bath = BathSpec(er, 300.0, 293.0, rb)
        full = rate_matrices(basis.frequency_bins, system.positions, bath)
        eff = BathSpec(er * (1.0 - special.j0(d / rb)), 300.0, 293.0, 0.0)
        gammas = single_site_rate(np.array([fb.omega for fb in basis.frequency_bins]), eff)
        rho = random_hermitian(rng, 2)
        a = apply_dissipator(rho, lset, full)
        b = local_dissipator(rho, lset, gammas)
        worst = max(worst, np.abs(a - b).max() / max(1.0, np.abs(a).max()))
    return Check("two-site correlated = local at effective E_R", worst <= 1e-12, worst, 1e-12)


def check_detailed_balance(config):
    bath = config.bath
    w = np.linspace(1.0, 2000.0, 100)
    ratio = single_site_rate(w, bath) / single_site_rate(-w, bath)
    err = np.abs(ratio / np.exp(w / bath.kT) - 1.0).max()
    return Check("detailed balance", err <= 1e-10, err, 1e-10)


def check_branching(kappa=4.0, gamma=1e-3):
    system = single_site_system(kappa, gamma)
    model = assemble_model(system, BathSpec(100.0, 300.0, 293.0, 0.0))
    psi = np.array([1.0 + 0j])
    exact = branching_ratio(kappa, gamma)
    lin = efficiency_linear_solve(psi, system, model.liouvillian).eta
    ode = efficiency_ode(psi, system, model.liouvillian).eta
    err = max(abs(lin - exact), abs(ode - exact))
    return Check("single-site branching ratio", err <= 1e-9, err, 1e-9)


def check_bookkeeping(config):
    model = assemble_model(config.system, config.bath)
    psi = initial_state(8, -1, 1, config.system)
    r = efficiency_ode(psi, config.system, model.liouvillian)
    lin = efficiency_linear_solve(psi, config.system, model.liouvillian)
    err = max(r.bookkeeping_error, lin.bookkeeping_error)
    return Check("probability bookkeeping", err <= 1e-6, err, 1e-6)


def check_j0_and_psd(config):
    xs = np.linspace(0.0, 30.0, 61)
    err = max(abs(special.j0(x) - j0_quadrature(x)) for x in xs)
    ok = err <= 1e-10
    worst = 0.0
    for rb in (5.0, 20.0, 40.0, 100.0):
        G = correlation_matrix(config.system.positions, rb, check_psd=False)
        worst = min(worst, np.linalg.eigvalsh(G).min())
    ok = ok and worst >= -1e-10
    return Check("J0 accuracy and kernel PSD", ok, max(err, -worst), 1e-10)


def check_neighbor_count(config):
    n = neighbor_count(config.system, 20.0, 0.7)
    return Check("neighbour count at R_B=20", n == 5.0, n, 0.0)


def check_limits(config):
    system = config.system
    states = [initial_state(8, s, 1, system) for s in (1, -1)]
    b = config.bath
    local = assemble_model(system, BathSpec(b.reorg_energy, b.cutoff, b.temperature, 0.0),
                           kernel="local")
    full0 = assemble_model(system, BathSpec(b.reorg_energy, b.cutoff, b.temperature, 0.0))
    inf = assemble_model(system, BathSpec(b.reorg_energy, b.cutoff, b.temperature, math.inf))
    coh = assemble_model(system, BathSpec(0.0, b.cutoff, b.temperature, 0.0))
    e = lambda m: np.array([r.eta for r in efficiency_linear_solve(states, system, m.liouvillian)])
    err = max(np.abs(e(local) - e(full0)).max(), np.abs(e(inf) - e(coh)).max())
    return Check("R_B=0 and R_B=inf limits", err <= 1e-9, err, 1e-9)


def check_single_site_sign(config):
    system = config.system
    model = assemble_model(system, config.bath)
    a, b = efficiency_linear_solve([initial_state(1, 1, 3, system), initial_state(1, -1, 3, system)],
                                   system, model.liouvillian)
    err = abs(a.eta - b.eta)
    return Check("m=1 sign is a global phase", err <= 1e-12, err, 1e-12)


def check_effective_er(config):
    system = two_site_system(10.0)
    er = effective_local_ER(system, 20.0, 100.0)
    err = abs(er - 100.0 * (1.0 - spatial_correlation(10.0, 20.0)))
    return Check("effective E_R for two sites", err <= 1e-12, err, 1e-12)


def run_all(config):
    checks = [
        check_dissipator_null(config), check_sum_identity(config), check_two_site_reduction(),
        check_detailed_balance(config), check_branching(), check_bookkeeping(config),
        check_j0_and_psd(config), check_neighbor_count(config), check_limits(config),
        check_single_site_sign(config), check_effective_er(config),
    ]
    return checks
