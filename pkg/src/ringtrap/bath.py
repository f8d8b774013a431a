"""Drude bath, thermal rates and the spatial correlation kernel.

Rates returned here are in ps^-1; spectral densities and frequencies in cm^-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import InvalidInputError, NonCPError, SingularGeometryError
from .units import CM_TO_RAD_PS, K_BOLTZMANN

PSD_TOL = 1e-10


@dataclass(frozen=True)
class BathSpec:
    """Bath parameters: E_R and cutoff in cm^-1, temperature in K, R_B in Angstrom."""

    reorg_energy: float = 100.0
    cutoff: float = 300.0
    temperature: float = 293.0
    corr_length: float = 0.0
    kernel_dim: str = "2D"

    def __post_init__(self):
        if self.reorg_energy < 0:
            raise InvalidInputError("reorg_energy must be >= 0")
        if not self.cutoff > 0:
            raise InvalidInputError("cutoff must be > 0")
        if not self.temperature > 0:
            raise InvalidInputError("temperature must be > 0")
        if not self.corr_length >= 0:
            raise InvalidInputError("corr_length must be >= 0 or inf")
        if self.kernel_dim != "2D":
            raise InvalidInputError(f"unsupported kernel dimension {self.kernel_dim!r}")

    @property
    def kT(self) -> float:
        return K_BOLTZMANN * self.temperature


@dataclass(frozen=True)
class RateMatrix:
    """gamma[m, n] = correlation[m, n] * gamma(omega), in ps^-1."""

    omega: float
    gamma: np.ndarray
    correlation: np.ndarray


def spectral_density(omega, bath: BathSpec):
    """Drude spectral density ``2 E_R w_c w / (pi (w_c^2 + w^2))``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise InvalidInputError("spectral density takes |omega|")
    wc = bath.cutoff
    out = 2.0 * bath.reorg_energy * wc * omega / (np.pi * (wc**2 + omega**2))
    return out if out.ndim else float(out)


def thermal_occupation(omega, T):
    """Bose-Einstein occupation ``1 / (exp(omega / kT) - 1)``; omega in cm^-1."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega == 0):
        raise InvalidInputError("occupation diverges at omega=0")
    out = 1.0 / np.expm1(omega / (K_BOLTZMANN * T))
    return out if out.ndim else float(out)


def single_site_rate(omega, bath: BathSpec):
    """On-site rate ``2 pi J(|w|) |N(-w)|`` converted to ps^-1.

    Positive omega is a downhill transition (emission into the bath).  The
    omega=0 value is the analytic Drude limit ``4 E_R kT / w_c``.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.empty_like(w)
    zero = w == 0
    out[zero] = 4.0 * bath.reorg_energy * bath.kT / bath.cutoff
    nz = ~zero
    aw = np.abs(w[nz])
    n = 1.0 / np.expm1(aw / bath.kT)
    occ = np.where(w[nz] > 0, 1.0 + n, n)
    out[nz] = 2.0 * np.pi * spectral_density(aw, bath) * occ
    out *= CM_TO_RAD_PS
    return out if np.ndim(omega) else float(out[0])


def spatial_correlation(d, corr_length):
    """Kernel J0(d / R_B) with exact R_B = inf (-> 1) and R_B = 0 (-> delta) limits."""
    d = np.asarray(d, dtype=float)
    if corr_length == math.inf:
        out = np.ones_like(d)
    elif corr_length == 0:
        out = (d == 0).astype(float)
    else:
        out = special.j0(d / corr_length)
    return out if out.ndim else float(out)


def pair_distances(positions):
    r = np.asarray(positions, dtype=float)
    d = np.linalg.norm(r[:, None, :] - r[None, :, :], axis=-1)
    off = ~np.eye(len(r), dtype=bool)
    if np.any(d[off] <= 0):
        raise SingularGeometryError("coincident site positions")
    return d


def correlation_matrix(positions, corr_length, check_psd=True):
    """Matrix of J0(d_mn / R_B); optionally verified positive semidefinite."""
    G = spatial_correlation(pair_distances(positions), corr_length)
    if check_psd:
        lam = np.linalg.eigvalsh(G).min()
        if lam < -PSD_TOL:
            raise NonCPError(f"correlation kernel not PSD (min eigenvalue {lam:.3e})")
    return G


def rate_matrix(omega, positions, bath: BathSpec, correlation=None) -> RateMatrix:
    """Correlated rate matrix for one transition frequency."""
    G = correlation_matrix(positions, bath.corr_length) if correlation is None else correlation
    return RateMatrix(float(omega), single_site_rate(omega, bath) * G, G)


def rate_matrices(bins, positions, bath: BathSpec, correlation=None):
    """Rate matrices aligned with ``bins``, sharing one (checked) kernel matrix."""
    G = correlation_matrix(positions, bath.corr_length) if correlation is None else correlation
    omegas = np.array([fb.omega for fb in bins])
    gammas = single_site_rate(omegas, bath)
    return [RateMatrix(float(w), g * G, G) for w, g in zip(omegas, gammas)]


def effective_local_ER(system, corr_length, reorg_energy):
    """``E_R * (1 - <J0(d_mn / R_B)>)`` averaged over all ordered pairs m != n."""
    M = system.n_sites
    if M < 2:
        raise InvalidInputError("need at least two sites")
    G = spatial_correlation(pair_distances(system.positions), corr_length)
    mean_corr = (G.sum() - np.trace(G)) / (M * (M - 1))
    return reorg_energy * (1.0 - mean_corr)


def cutoff_filter(rate: RateMatrix, y) -> RateMatrix:
    """Drop off-diagonal correlations whose kernel value is below ``y``."""
    keep = rate.correlation >= y
    np.fill_diagonal(keep, True)
    return RateMatrix(rate.omega, np.where(keep, rate.gamma, 0.0),
                      np.where(keep, rate.correlation, 0.0))


def cutoff_correlation(correlation, y):
    """Same filtering as :func:`cutoff_filter` applied to a bare kernel matrix."""
    keep = correlation >= y
    np.fill_diagonal(keep, True)
    return np.where(keep, correlation, 0.0)


def neighbor_count(system, corr_length, y=0.7):
    """Size of the consecutive group of ring sites correlated above ``y``.

    Walks outwards from each ring site in both directions while the kernel
    stays >= y; returns the ring average (self included).
    """
    n = system.n_ring
    r = system.positions[:n]
    counts = []
    for i in range(n):
        c = 1
        for step in (1, -1):
            for k in range(1, n // 2 + 1):
                j = (i + step * k) % n
                if step == -1 and k == n // 2 and n % 2 == 0:
                    break  # antipode already visited
                if spatial_correlation(np.linalg.norm(r[i] - r[j]), corr_length) >= y:
                    c += 1
                else:
                    break
        counts.append(min(c, n))
    return float(np.mean(counts))
