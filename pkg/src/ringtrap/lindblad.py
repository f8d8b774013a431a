"""Secular Lindblad operators, the correlated dissipator and the Liouvillian.

Vectorisation is column-major: ``vec(rho)[i + M*j] = rho[i, j]``, so that
``vec(A @ rho @ B) = kron(B.T, A) @ vec(rho)``.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import InvalidInputError
from .units import CM_TO_RAD_PS


def vec(rho):
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v, M):
    return np.asarray(v).reshape(M, M, order="F")


class LindbladSet:
    """Secular jump operators ``A_m(omega)`` for every frequency bin.

    Stored compactly: for bin ``k`` with eigenpairs ``(a_p, b_p)`` the
    coefficient ``X_k[p, m] = conj(U[m, b_p]) * U[m, a_p]`` is the matrix
    element ``<b_p| A_m(omega) |a_p>`` in the exciton basis.
    """

    def __init__(self, basis):
        if not basis.frequency_bins:
            raise InvalidInputError("eigenbasis carries no frequency bins")
        self.basis = basis
        self.modes = basis.modes
        self.omegas = np.array([fb.omega for fb in basis.frequency_bins])
        U = basis.modes
        self.pairs = []
        self.coefficients = []
        for fb in basis.frequency_bins:
            a, b = fb.pairs[:, 0], fb.pairs[:, 1]
            self.pairs.append((a, b))
            self.coefficients.append((U[:, b].conj() * U[:, a]).T)

    @property
    def n_sites(self) -> int:
        return self.modes.shape[0]

    def __len__(self):
        return len(self.omegas)

    def site_operators(self, k) -> np.ndarray:
        """Dense site-basis stack ``A[m] = A_m(omega_k)``, shape (M, M, M)."""
        a, b = self.pairs[k]
        U = self.modes
        return np.einsum("pm,ip,jp->mij", self.coefficients[k], U[:, b], U[:, a].conj())

    def mirror_index(self, k) -> int:
        return len(self.omegas) - 1 - k


def lindblad_operators(basis, M=None) -> LindbladSet:
    lset = LindbladSet(basis)
    if M is not None and M != lset.n_sites:
        raise InvalidInputError(f"basis has {lset.n_sites} sites, expected {M}")
    return lset


def _check_rates(lset, rates):
    if len(rates) != len(lset):
        raise InvalidInputError(f"{len(rates)} rate matrices for {len(lset)} bins")
    for w, r in zip(lset.omegas, rates):
        if abs(r.omega - w) > 1e-9 * max(1.0, abs(w)):
            raise InvalidInputError(f"rate matrix at omega={r.omega} misaligned with bin {w}")


def _bin_term(rho, A, gamma):
    """sum_mn gamma_mn [A_n rho A_m^+ - 1/2 {A_m^+ A_n, rho}] for one bin."""
    M = A.shape[-1]
    B = np.tensordot(gamma, A, axes=(0, 0))           # B_n = sum_m gamma_mn A_m
    Bd = B.conj().transpose(0, 2, 1)
    # anti = sum_n B_n^+ A_n, as one (M, M^2) x (M^2, M) product
    anti = Bd.transpose(1, 0, 2).reshape(M, M * M) @ A.reshape(M * M, M)
    Ar = np.matmul(A, rho[..., None, :, :])               # (..., n, M, M)
    Ar = np.moveaxis(Ar, -3, -2).reshape(rho.shape[:-2] + (M, M * M))
    jump = Ar @ Bd.reshape(M * M, M)
    return jump - 0.5 * (anti @ rho + rho @ anti)


def apply_dissipator(rho, lset: LindbladSet, rates):
    """Correlated secular dissipator evaluated directly in the site basis.

    ``rho`` may be a single (M, M) matrix or a stack (..., M, M).
    """
    _check_rates(lset, rates)
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros_like(rho)
    for k, r in enumerate(rates):
        if not np.any(r.gamma):
            continue
        out += _bin_term(rho, lset.site_operators(k), r.gamma)
    return out


def sum_F(rho, lset: LindbladSet, k):
    """sum_{m,n} F_mn(omega_k, rho) with unit weights."""
    M = lset.n_sites
    return _bin_term(np.asarray(rho, dtype=complex), lset.site_operators(k), np.ones((M, M)))


def local_dissipator(rho, lset: LindbladSet, gammas):
    """Uncorrelated dissipator sum_omega gamma(omega) sum_m F_mm(omega, rho)."""
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros_like(rho)
    for k, g in enumerate(gammas):
        if g == 0:
            continue
        for A in lset.site_operators(k):
            Ad = A.conj().T
            out += g * (A @ rho @ Ad - 0.5 * (Ad @ A @ rho + rho @ Ad @ A))
    return out


class EffectiveHamiltonian:
    """``H_S - i diag(Gamma_m + kappa_m)`` in rad/ps."""

    def __init__(self, hamiltonian_cm, sink_rates):
        self.hamiltonian_cm = np.asarray(hamiltonian_cm)
        self.sink_rates = np.asarray(sink_rates, dtype=float)
        self.matrix = CM_TO_RAD_PS * self.hamiltonian_cm - 1j * np.diag(self.sink_rates)

    @property
    def hermitian_part(self):
        return 0.5 * (self.matrix + self.matrix.conj().T)

    @property
    def antihermitian_part(self):
        return 0.5 * (self.matrix - self.matrix.conj().T)


def build_effective_hamiltonian(system, H) -> EffectiveHamiltonian:
    trap, loss = system.trap_rates, system.loss_rates
    if np.any(trap < 0) or np.any(loss < 0):
        raise InvalidInputError("negative sink rate")
    H = np.asarray(H)
    if H.shape != (system.n_sites, system.n_sites):
        raise InvalidInputError("Hamiltonian dimension does not match the system")
    return EffectiveHamiltonian(H, trap + loss)


class Liouvillian:
    """Generator of ``rho' = -i(H_eff rho - rho H_eff^+) + D(rho)``.

    Built in the exciton basis, where the secular dissipator is sparse:

    * ``h_nh``: non-hermitian effective Hamiltonian plus ``-i/2 Q`` with
      ``Q = sum gamma_mn A_m^+ A_n`` (rad/ps, exciton basis),
    * ``jumps``: sparse superoperator of the ``A_n rho A_m^+`` terms.

    ``matrix`` is the dense site-basis superoperator; ``matrix_eig`` the same
    in the exciton basis.
    """

    def __init__(self, heff: EffectiveHamiltonian, modes, h_sink_eig, Q, jumps):
        self.heff = heff
        self.modes = modes
        self.M = modes.shape[0]
        self.h_sink_eig = h_sink_eig
        self.Q = Q
        self.jumps = jumps

    @property
    def energies_rad(self):
        return np.real(np.diag(self.h_sink_eig))

    @cached_property
    def h_nh(self):
        return self.h_sink_eig - 0.5j * self.Q

    def _commutator_super(self, H):
        I = np.eye(self.M)
        return -1j * (np.kron(I, H) - np.kron(H.conj(), I))

    @cached_property
    def coherent_eig(self):
        return self._commutator_super(self.h_sink_eig)

    @cached_property
    def dissipative_eig(self):
        I = np.eye(self.M)
        anti = -0.5 * (np.kron(I, self.Q) + np.kron(self.Q.T, I))
        return self.jumps.toarray() + anti

    @cached_property
    def matrix_eig(self):
        return self.coherent_eig + self.dissipative_eig

    def to_site(self, S):
        """Change a superoperator from the exciton to the site basis."""
        U, M = self.modes, self.M
        # column-major vec: S4[j, i, l, k] = S[i + M j, k + M l]
        S4 = S.reshape(M, M, M, M)
        S4 = np.einsum("ib,bBaA->iBaA", U, S4.transpose(1, 0, 3, 2), optimize=True)
        S4 = np.einsum("jB,iBaA->ijaA", U.conj(), S4, optimize=True)
        S4 = np.einsum("ka,ijaA->ijkA", U.conj(), S4, optimize=True)
        S4 = np.einsum("lA,ijkA->ijkl", U, S4, optimize=True)
        return S4.transpose(1, 0, 3, 2).reshape(M * M, M * M)

    @cached_property
    def coherent(self):
        return self._commutator_super(self.heff.matrix)

    @cached_property
    def dissipative(self):
        return self.to_site(self.dissipative_eig)

    @cached_property
    def matrix(self):
        return self.coherent + self.dissipative

    def to_eig(self, rho):
        U = self.modes
        return U.conj().T @ rho @ U

    def to_site_rho(self, rho_eig):
        U = self.modes
        return U @ rho_eig @ U.conj().T

    def dissipate(self, rho):
        """Site-basis dissipator D(rho) from the assembled exciton-basis pieces."""
        r = self.to_eig(np.asarray(rho, dtype=complex))
        d = unvec(self.jumps @ vec(r), self.M) - 0.5 * (self.Q @ r + r @ self.Q)
        return self.to_site_rho(d)

    def rhs(self, rho):
        """Site-basis right-hand side evaluated via the exciton-basis pieces."""
        r = self.to_eig(rho)
        H = self.h_nh
        out = -1j * (H @ r - r @ H.conj().T) + unvec(self.jumps @ vec(r), self.M)
        return self.to_site_rho(out)


def build_liouvillian(heff: EffectiveHamiltonian, lset: LindbladSet, rates) -> Liouvillian:
    """Assemble the secular Liouvillian; no cross terms between different bins."""
    M = lset.n_sites
    if heff.matrix.shape != (M, M):
        raise InvalidInputError("effective Hamiltonian and Lindblad set disagree on M")
    _check_rates(lset, rates)
    U = lset.modes
    resid = U.conj().T @ heff.hamiltonian_cm @ U - np.diag(lset.basis.energies)
    if np.linalg.norm(resid) > 1e-8 * max(1.0, np.linalg.norm(heff.hamiltonian_cm)):
        raise InvalidInputError("eigenbasis does not diagonalise the Hamiltonian")
    sink = U.conj().T @ np.diag(heff.sink_rates) @ U
    sink = 0.5 * (sink + sink.conj().T)
    h_sink = np.diag(CM_TO_RAD_PS * lset.basis.energies) - 1j * sink

    Q = np.zeros((M, M), dtype=complex)
    rows, cols, vals = [], [], []
    for k, r in enumerate(rates):
        if not np.any(r.gamma):
            continue
        X = lset.coefficients[k]
        a, b = lset.pairs[k]
        K = X @ r.gamma.T @ X.conj().T
        # jump: out (b_p, b_q) <- in (a_p, a_q) with weight K[p, q]
        p, q = np.meshgrid(np.arange(len(a)), np.arange(len(a)), indexing="ij")
        rows.append((b[p] + M * b[q]).ravel())
        cols.append((a[p] + M * a[q]).ravel())
        vals.append(K.ravel())
        # anticommutator: Q[a_q, a_p] += K[p, q] when b_p == b_q
        same = b[p] == b[q]
        np.add.at(Q, (a[q][same], a[p][same]), K[same])
    if rows:
        jumps = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                  shape=(M * M, M * M))
    else:
        jumps = sparse.csr_matrix((M * M, M * M), dtype=complex)
    jumps.sum_duplicates()
    return Liouvillian(heff, U, h_sink, Q, jumps)
