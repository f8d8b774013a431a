"""Site network, single-excitation Hamiltonian, eigenbasis and initial states."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGeometryError, InvalidInputError, SingularGeometryError

DEFAULT_BIN_TOL = 1e-6
DISORDERED_BIN_TOL = 1e-3


@dataclass(frozen=True)
class SiteConfig:
    """One chromophore. Energies in cm^-1, rates in ps^-1, positions in Angstrom."""

    index: int
    position: np.ndarray
    site_energy: float
    dipole: np.ndarray
    trap_rate: float = 0.0
    loss_rate: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        dip = np.asarray(self.dipole, dtype=float).reshape(3)
        if not np.all(np.isfinite(pos)):
            raise InvalidInputError(f"site {self.index}: non-finite position")
        if abs(np.linalg.norm(dip) - 1.0) > 1e-9:
            raise InvalidInputError(f"site {self.index}: dipole is not a unit vector")
        if self.trap_rate < 0 or self.loss_rate < 0:
            raise InvalidInputError(f"site {self.index}: negative trap/loss rate")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "dipole", dip)


@dataclass(frozen=True)
class ExcitonSystem:
    """The M-site network.

    The first ``n_ring`` sites form the ring, numbered consecutively with
    azimuth; any remaining sites sit in the centre (the reaction centre).
    """

    sites: tuple
    couplings: np.ndarray
    disorder_sigma: float = 0.0
    label: str = ""
    n_ring: int | None = None

    def __post_init__(self):
        sites = tuple(self.sites)
        M = len(sites)
        V = np.array(self.couplings, dtype=float)
        if V.shape != (M, M):
            raise InvalidInputError(f"couplings must be {M}x{M}, got {V.shape}")
        if not np.allclose(V, V.T, rtol=0, atol=1e-12):
            raise InvalidInputError("coupling matrix is not symmetric")
        if np.any(np.diag(V) != 0):
            raise InvalidInputError("coupling matrix must have a zero diagonal")
        if self.disorder_sigma < 0:
            raise InvalidInputError("disorder_sigma must be non-negative")
        n_ring = M if self.n_ring is None else int(self.n_ring)
        if not 0 <= n_ring <= M:
            raise InvalidInputError("n_ring out of range")
        V.setflags(write=False)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "couplings", V)
        object.__setattr__(self, "n_ring", n_ring)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.sites])

    @property
    def dipoles(self) -> np.ndarray:
        return np.array([s.dipole for s in self.sites])

    @property
    def site_energies(self) -> np.ndarray:
        return np.array([s.site_energy for s in self.sites])

    @property
    def trap_rates(self) -> np.ndarray:
        return np.array([s.trap_rate for s in self.sites])

    @property
    def loss_rates(self) -> np.ndarray:
        return np.array([s.loss_rate for s in self.sites])

    @property
    def trap_sites(self) -> np.ndarray:
        """0-based indices of sites with a non-zero trapping rate."""
        return np.flatnonzero(self.trap_rates > 0)

    def distances(self) -> np.ndarray:
        r = self.positions
        return np.linalg.norm(r[:, None, :] - r[None, :, :], axis=-1)


@dataclass(frozen=True)
class FrequencyBin:
    """Eigenpairs (a, b) whose transition frequency eps_a - eps_b is ~omega."""

    omega: float
    pairs: np.ndarray  # (p, 2) int array of (from, to) eigen-indices


@dataclass(frozen=True)
class EigenBasis:
    energies: np.ndarray
    modes: np.ndarray
    frequency_bins: tuple = field(default=())

    @property
    def n_states(self) -> int:
        return len(self.energies)

    def with_bins(self, tolerance: float = DEFAULT_BIN_TOL) -> "EigenBasis":
        return EigenBasis(self.energies, self.modes, frequency_bins(self.energies, tolerance))


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    label: str = ""

    def __post_init__(self):
        psi = np.asarray(self.amplitudes, dtype=complex)
        if abs(np.linalg.norm(psi) - 1.0) > 1e-12:
            raise InvalidInputError("state is not normalised")
        object.__setattr__(self, "amplitudes", psi)

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def ring_geometry(n_ring, radius, center_sites=(), ring_dipoles=None):
    """Positions and unit dipoles of a planar ring plus optional centre sites.

    Ring site ``j`` (0-based) sits at azimuth ``2*pi*j/n_ring`` in the z=0
    plane.  Ring dipoles default to the counter-clockwise tangent.
    ``center_sites`` is a sequence of ``(position, dipole)`` pairs appended
    after the ring.

    Returns
    -------
    positions, dipoles : ndarray of shape (n_ring + n_center, 3)
    """
    if n_ring < 2 or not radius > 0:
        raise InvalidGeometryError(f"need n_ring >= 2 and radius > 0, got {n_ring}, {radius}")
    phi = 2.0 * np.pi * np.arange(n_ring) / n_ring
    ring_pos = radius * np.stack([np.cos(phi), np.sin(phi), np.zeros(n_ring)], axis=1)
    if ring_dipoles is None:
        ring_dip = np.stack([-np.sin(phi), np.cos(phi), np.zeros(n_ring)], axis=1)
    else:
        ring_dip = np.asarray(ring_dipoles, dtype=float).reshape(n_ring, 3)
    pos = [ring_pos] + [np.asarray(p, dtype=float).reshape(1, 3) for p, _ in center_sites]
    dip = [ring_dip] + [np.asarray(d, dtype=float).reshape(1, 3) for _, d in center_sites]
    dip = np.concatenate(dip)
    return np.concatenate(pos), dip / np.linalg.norm(dip, axis=1, keepdims=True)


def dipole_coupling_matrix(sites, dipole_strength, overrides=()):
    """Point-dipole couplings ``C * kappa_mn / d_mn**3`` in cm^-1.

    ``overrides`` is an iterable of ``(i, j, value)`` with 0-based positions
    into ``sites``; each replaces both (i, j) and (j, i).
    """
    r = np.array([s.position for s in sites])
    mu = np.array([s.dipole for s in sites])
    M = len(r)
    sep = r[None, :, :] - r[:, None, :]
    d = np.linalg.norm(sep, axis=-1)
    off = ~np.eye(M, dtype=bool)
    if np.any(d[off] <= 0):
        raise SingularGeometryError("coincident site positions")
    np.fill_diagonal(d, 1.0)
    rhat = sep / d[..., None]
    kappa = (mu @ mu.T
             - 3.0 * np.einsum("ik,ijk->ij", mu, rhat) * np.einsum("jk,ijk->ij", mu, rhat))
    V = dipole_strength * kappa / d**3
    np.fill_diagonal(V, 0.0)
    for i, j, value in overrides:
        if i == j:
            raise InvalidInputError("override on the diagonal")
        V[i, j] = V[j, i] = value
    return V


def build_hamiltonian(system: ExcitonSystem, disorder=None) -> np.ndarray:
    """Single-excitation Hamiltonian (cm^-1) with optional static site shifts."""
    M = system.n_sites
    delta = np.zeros(M) if disorder is None else np.asarray(disorder, dtype=float)
    if delta.shape != (M,):
        raise InvalidInputError(f"disorder must have length {M}, got shape {delta.shape}")
    H = np.array(system.couplings, dtype=float)
    H[np.diag_indices(M)] = system.site_energies + delta
    return H


def eigendecompose(H) -> EigenBasis:
    """Ascending eigenpairs with each eigenvector's largest component real positive."""
    H = np.asarray(H)
    scale = max(np.linalg.norm(H), 1.0)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise InvalidInputError("Hamiltonian must be square")
    if np.linalg.norm(H - H.conj().T) > 1e-9 * scale:
        raise InvalidInputError("Hamiltonian is not hermitian")
    energies, modes = np.linalg.eigh(H)
    modes = modes.astype(complex)
    for k in range(modes.shape[1]):
        col = modes[:, k]
        # first index among the (numerically) largest components, for stability
        mag = np.abs(col)
        j = int(np.flatnonzero(mag >= mag.max() - 1e-12)[0])
        modes[:, k] = col * (abs(col[j]) / col[j])
    return EigenBasis(energies, modes)


def frequency_bins(energies, tolerance=DEFAULT_BIN_TOL):
    """Cluster all ordered eigen-energy differences into transition-frequency bins.

    Differences within ``tolerance`` of zero form the omega=0 bin.  Positive
    differences are grouped greedily in ascending order so that members of a
    bin lie within ``tolerance`` of each other; negative bins are exact
    mirrors.  Bins are returned in ascending omega.
    """
    if tolerance < 0:
        raise InvalidInputError("tolerance must be non-negative")
    eps = np.asarray(energies, dtype=float)
    M = len(eps)
    diff = eps[:, None] - eps[None, :]
    a, b = np.nonzero(np.abs(diff) <= tolerance)
    # mirror symmetry of the zero bin forces its mean to 0 exactly
    zero = FrequencyBin(0.0, np.stack([a, b], axis=1))

    pa, pb = np.nonzero(diff > tolerance)
    vals = diff[pa, pb]
    order = np.lexsort((pb, pa, vals))
    pa, pb, vals = pa[order], pb[order], vals[order]
    positive = []
    start = 0
    for k in range(1, len(vals) + 1):
        if k == len(vals) or vals[k] - vals[start] > tolerance:
            pairs = np.stack([pa[start:k], pb[start:k]], axis=1)
            positive.append(FrequencyBin(float(vals[start:k].mean()), pairs))
            start = k
    negative = [FrequencyBin(-fb.omega, fb.pairs[:, ::-1].copy()) for fb in reversed(positive)]
    bins = tuple(negative) + (zero,) + tuple(positive)
    assert sum(len(fb.pairs) for fb in bins) == M * M
    return bins


def disorder_sample(sigma, M, seed):
    """Gaussian static disorder from a counter-based (Philox) stream."""
    if sigma < 0:
        raise InvalidInputError("sigma must be non-negative")
    if sigma == 0:
        return np.zeros(M)
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.normal(0.0, sigma, size=M)


def ring_window(m, start_site, n_ring):
    """0-based indices of the m consecutive ring sites beginning at label ``start_site``."""
    return (start_site - 1 + np.arange(m)) % n_ring


def initial_state(m, sign, start_site, system: ExcitonSystem) -> PureState:
    """``(1/sqrt(m)) sum_j sign**j |j>`` over m consecutive ring sites (cyclic).

    ``start_site`` is the 1-based label of the first ring site of the window.
    """
    n_ring = system.n_ring
    if not 1 <= m <= n_ring:
        raise InvalidInputError(f"m must lie in 1..{n_ring}, got {m}")
    if sign not in (1, -1):
        raise InvalidInputError("sign must be +1 or -1")
    if not 1 <= start_site <= n_ring:
        raise InvalidInputError(f"start_site must be a ring site label 1..{n_ring}")
    psi = np.zeros(system.n_sites, dtype=complex)
    j = np.arange(1, m + 1)
    psi[ring_window(m, start_site, n_ring)] = sign**j / np.sqrt(m)
    return PureState(psi, label=f"{m}{'+' if sign > 0 else '-'}@{start_site}")


def eigenstate_initials(basis: EigenBasis, system: ExcitonSystem, overlap_tol=1e-4):
    """Eigenstates whose total trap-site population is at most ``overlap_tol``.

    Returns a list of ``(energy, PureState)`` in ascending energy.
    """
    traps = system.trap_sites
    out = []
    for k in np.argsort(basis.energies, kind="stable"):
        vec = basis.modes[:, k]
        if np.sum(np.abs(vec[traps]) ** 2) <= overlap_tol:
            vec = vec / np.linalg.norm(vec)
            out.append((float(basis.energies[k]), PureState(vec, label=f"eig:{k}")))
    return out
