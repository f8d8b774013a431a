"""Model assembly and a scikit-learn style estimator for the trapped yield."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .bath import (BathSpec, correlation_matrix, cutoff_correlation, effective_local_ER,
                   rate_matrices)
from .dynamics import efficiency_linear_solve, efficiency_ode
from .errors import InvalidInputError
from .exciton import (DEFAULT_BIN_TOL, DISORDERED_BIN_TOL, EigenBasis, ExcitonSystem,
                      build_hamiltonian, eigendecompose)
from .lindblad import (LindbladSet, Liouvillian, build_effective_hamiltonian,
                       build_liouvillian, lindblad_operators)

KERNELS = ("full", "cutoff", "effective", "local")
METHODS = ("linear", "ode", "jumps")


@dataclass
class Model:
    """Everything needed to evaluate yields for one parameter point."""

    system: ExcitonSystem
    bath: BathSpec
    hamiltonian: np.ndarray
    basis: EigenBasis
    lset: LindbladSet
    rates: list
    liouvillian: Liouvillian


def assemble_model(system, bath: BathSpec, kernel="full", y=0.7, bin_tol=None,
                   disorder=None) -> Model:
    """Build the Liouvillian for one system/bath pair.

    ``kernel`` selects the dephasing model:

    * ``full``: the J0 correlation kernel at ``bath.corr_length``,
    * ``cutoff``: the same with correlations below ``y`` dropped,
    * ``effective``: uncorrelated dephasing at the reduced reorganisation
      energy ``E_R (1 - <J0>)``,
    * ``local``: uncorrelated dephasing at the bare ``E_R``.
    """
    if kernel not in KERNELS:
        raise InvalidInputError(f"kernel must be one of {KERNELS}")
    H = build_hamiltonian(system, disorder)
    if bin_tol is None:
        bin_tol = DEFAULT_BIN_TOL if disorder is None or not np.any(disorder) else DISORDERED_BIN_TOL
    basis = eigendecompose(H).with_bins(bin_tol)
    M = system.n_sites
    if kernel == "full":
        G = correlation_matrix(system.positions, bath.corr_length)
    elif kernel == "cutoff":
        G = cutoff_correlation(correlation_matrix(system.positions, bath.corr_length), y)
    elif kernel == "effective":
        er = effective_local_ER(system, bath.corr_length, bath.reorg_energy)
        bath = BathSpec(max(er, 0.0), bath.cutoff, bath.temperature, 0.0)
        G = np.eye(M)
    else:
        G = np.eye(M)
    rates = rate_matrices(basis.frequency_bins, system.positions, bath, G)
    lset = lindblad_operators(basis, M)
    L = build_liouvillian(build_effective_hamiltonian(system, H), lset, rates)
    return Model(system, bath, H, basis, lset, rates, L)


def evaluate(model: Model, states, method="linear", n_traj=1000, seed=0, tol=1e-8):
    """Yield results for a list of initial states under one model."""
    states = list(states)
    if method == "linear":
        return efficiency_linear_solve(states, model.system, model.liouvillian) if states else []
    if method == "ode":
        return [efficiency_ode(s, model.system, model.liouvillian, tol=tol) for s in states]
    if method == "jumps":
        from .jumps import JumpModel, jump_unraveling

        jm = JumpModel(model.system, model.liouvillian, model.lset, model.rates)
        return [jump_unraveling(s, model.system, model.liouvillian, model.lset, model.rates,
                                n_traj=n_traj, seed=seed, model=jm) for s in states]
    raise InvalidInputError(f"method must be one of {METHODS}")


class TransferEfficiency(BaseEstimator):
    """Trapped-yield predictor for a fixed exciton network.

    ``fit`` takes an :class:`ExcitonSystem` (optionally with a disorder
    vector) and assembles the Liouvillian; ``predict`` maps initial states
    (pure-state objects, amplitude vectors or density matrices) to yields.

    >>> est = TransferEfficiency(corr_length=40.0).fit(system)   # doctest: +SKIP
    >>> est.predict([psi])                                       # doctest: +SKIP
    """

    def __init__(self, reorg_energy=100.0, cutoff=300.0, temperature=293.0, corr_length=0.0,
                 kernel="full", y=0.7, method="linear", bin_tol=None, n_traj=1000, seed=0,
                 tol=1e-8):
        self.reorg_energy = reorg_energy
        self.cutoff = cutoff
        self.temperature = temperature
        self.corr_length = corr_length
        self.kernel = kernel
        self.y = y
        self.method = method
        self.bin_tol = bin_tol
        self.n_traj = n_traj
        self.seed = seed
        self.tol = tol

    def _validate_params(self):
        if self.kernel not in KERNELS:
            raise InvalidInputError(f"kernel must be one of {KERNELS}")
        if self.method not in METHODS:
            raise InvalidInputError(f"method must be one of {METHODS}")
        if not 0.0 < self.y <= 1.0:
            raise InvalidInputError("y must lie in (0, 1]")
        if int(self.n_traj) < 1:
            raise InvalidInputError("n_traj must be >= 1")
        if not (self.corr_length >= 0 or math.isinf(self.corr_length)):
            raise InvalidInputError("corr_length must be >= 0 or inf")

    def fit(self, X, y=None, disorder=None):
        if not isinstance(X, ExcitonSystem):
            raise InvalidInputError("fit expects an ExcitonSystem")
        self._validate_params()
        bath = BathSpec(float(self.reorg_energy), float(self.cutoff), float(self.temperature),
                        float(self.corr_length))
        self.model_ = assemble_model(X, bath, self.kernel, self.y, self.bin_tol, disorder)
        self.n_sites_ = X.n_sites
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit() before predict()")

    def predict_results(self, X):
        self._check_fitted()
        states = [X] if _is_single_state(X, self.n_sites_) else list(X)
        return evaluate(self.model_, states, self.method, int(self.n_traj), int(self.seed),
                        self.tol)

    def predict(self, X):
        return np.array([r.eta for r in self.predict_results(X)])


def _is_single_state(X, M):
    if hasattr(X, "amplitudes"):
        return True
    arr = np.asarray(X) if not isinstance(X, (list, tuple)) or not X or \
        not hasattr(X[0], "amplitudes") else None
    if arr is None or arr.dtype == object:
        return False
    return arr.shape in ((M,), (M, M))
