"""Time propagation and the deterministic efficiency routes.

The trapped yield uses the flux ``2 kappa_m rho_mm``: with the sink term
``-i (Gamma_m + kappa_m)`` in the effective Hamiltonian, site populations
decay at ``2 (Gamma_m + kappa_m)``.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import InvalidInputError, StiffnessError, UnboundedIntegralError
from .lindblad import Liouvillian, unvec, vec

DEFAULT_RTOL = 1e-8
DEFAULT_TAIL_TOL = 1e-6


@dataclass
class EfficiencyResult:
    eta: float
    eta_loss: float
    residual_trace: float
    method: str
    wall_time: float = 0.0
    stderr: float = 0.0
    warnings: tuple = field(default=())

    @property
    def bookkeeping_error(self) -> float:
        return abs(self.eta + self.eta_loss + self.residual_trace - 1.0)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, M, M), site basis


def site_populations(rho):
    return np.real(np.diagonal(np.asarray(rho), axis1=-2, axis2=-1)).copy()


def _as_density(rho0, M):
    rho0 = np.asarray(getattr(rho0, "amplitudes", rho0), dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    if rho0.shape != (M, M):
        raise InvalidInputError(f"initial state must be {M}x{M}")
    return rho0


def sink_operators(L: Liouvillian, system):
    """Exciton-basis flux operators ``U^+ diag(2 kappa) U`` and ``U^+ diag(2 Gamma) U``."""
    U = L.modes
    trap = U.conj().T @ np.diag(2.0 * system.trap_rates) @ U
    loss = U.conj().T @ np.diag(2.0 * system.loss_rates) @ U
    return trap, loss


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def dopri45(f, y0, t0, t_end, rtol=DEFAULT_RTOL, atol=1e-14, h0=1e-3,
            sample_times=(), stop=None, post_step=None, h_min=1e-14):
    """Adaptive Dormand-Prince 5(4) for complex vector ODEs.

    The error norm is the max-norm of the embedded difference scaled by
    ``atol + rtol * max|y|``.  Steps are clipped to land on ``sample_times``.
    ``post_step(y)`` may project the accepted state; ``stop(t, y)`` ends the
    run early.

    Returns ``(t, y, samples)`` where ``samples`` lists the states at the
    requested sample times (in order).
    """
    t, y, h = float(t0), np.array(y0, dtype=complex), float(h0)
    targets = sorted(float(s) for s in sample_times if t0 <= s <= t_end)
    samples = []
    while targets and targets[0] <= t:
        samples.append(y.copy())
        targets.pop(0)
    k = np.empty((7,) + y.shape, dtype=complex)
    while t < t_end:
        if stop is not None and stop(t, y):
            break
        next_stop = min(t_end, targets[0]) if targets else t_end
        h_step = min(h, next_stop - t)
        k[0] = f(t, y)
        for i in range(1, 7):
            yi = y + h_step * np.tensordot(_A[i], k[:i], axes=1)
            k[i] = f(t + _C[i] * h_step, yi)
        y5 = y + h_step * np.tensordot(_B5, k, axes=1)
        err_vec = h_step * np.tensordot(_B5 - _B4, k, axes=1)
        scale = atol + rtol * max(np.abs(y).max(), np.abs(y5).max())
        err = np.abs(err_vec).max() / scale
        if err <= 1.0:
            t += h_step
            y = post_step(y5) if post_step is not None else y5
            if targets and t >= targets[0] - 1e-12 * max(1.0, abs(t)):
                t = max(t, targets[0])
                samples.append(y.copy())
                targets.pop(0)
            fac = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
            if h_step < h:  # clipped step says nothing about the natural size
                fac = max(fac, 1.0)
                h = max(h, h_step * fac)
            else:
                h = h_step * fac
        else:
            h = h_step * max(0.2, 0.9 * err ** -0.2)
            if h < h_min * max(1.0, abs(t)):
                raise StiffnessError(
                    f"step size underflow at t={t:.6g} ps; use the linear-solve route")
    return t, y, samples


def _hermitise(v, M):
    r = v[: M * M].reshape(M, M, order="F")
    r = 0.5 * (r + r.conj().T)
    v = v.copy()
    v[: M * M] = r.reshape(-1, order="F")
    return v


def lawson_dopri45(a, N, y0, t_end, rtol=DEFAULT_RTOL, atol=1e-14, h0=1e-3,
                   sample_times=(), stop=None, post_step=None, h_min=1e-14, scale_ref=None):
    """Lawson (integrating-factor) Dormand-Prince 5(4) for ``y' = a*y + N(y)``.

    ``a`` is a complex vector with non-positive real part, applied
    elementwise and handled exactly; only ``N`` is integrated numerically.
    Stages are weighted by ``exp((c_i - c_j) h a)`` with ``c_i >= c_j``, so
    every factor is a decaying exponential.  ``scale_ref(y)`` gives the
    magnitude the relative tolerance refers to (default ``max|y|``).  Same
    return convention as :func:`dopri45`.
    """
    a = np.asarray(a, dtype=complex)
    t, y, h = 0.0, np.array(y0, dtype=complex), float(h0)
    targets = sorted(float(s) for s in sample_times if 0.0 <= s <= t_end)
    samples = []
    while targets and targets[0] <= t:
        samples.append(y.copy())
        targets.pop(0)
    k = np.empty((7,) + y.shape, dtype=complex)
    while t < t_end:
        if stop is not None and stop(t, y):
            break
        next_stop = min(t_end, targets[0]) if targets else t_end
        hs = min(h, next_stop - t)
        E = {c: np.exp(c * hs * a) for c in set(_C[i] - _C[j] for i in range(7) for j in range(i + 1))}
        E.update({1.0 - c: np.exp((1.0 - c) * hs * a) for c in _C})
        k[0] = N(y)
        for i in range(1, 7):
            yi = E[_C[i]] * y
            for j in range(i):
                if _A[i][j] != 0.0:
                    yi = yi + hs * _A[i][j] * (E[_C[i] - _C[j]] * k[j])
            k[i] = N(yi)
        y5 = E[1.0] * y
        err_vec = np.zeros_like(y)
        for j in range(7):
            wk = E[1.0 - _C[j]] * k[j]
            y5 = y5 + hs * _B5[j] * wk
            err_vec = err_vec + hs * (_B5[j] - _B4[j]) * wk
        if scale_ref is None:
            scale = atol + rtol * max(np.abs(y).max(), np.abs(y5).max())
        else:
            scale = atol + rtol * max(scale_ref(y), scale_ref(y5))
        err = np.abs(err_vec).max() / scale
        if err <= 1.0:
            t += hs
            y = post_step(y5) if post_step is not None else y5
            if targets and t >= targets[0] - 1e-12 * max(1.0, abs(t)):
                t = max(t, targets[0])
                samples.append(y.copy())
                targets.pop(0)
            fac = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
            if hs < h:
                h = max(h, hs * max(fac, 1.0))
            else:
                h = hs * fac
        else:
            h = hs * max(0.2, 0.9 * err ** -0.2)
            if h < h_min * max(1.0, abs(t)):
                raise StiffnessError(
                    f"step size underflow at t={t:.6g} ps; use the linear-solve route")
    return t, y, samples


class _LawsonSystem:
    """Master equation split for :func:`lawson_dopri45`.

    With a non-negligible dissipator the state stays in the exciton basis:
    secular jumps connect coherences of equal frequency and carry no
    oscillation, so the integrating factor holds the exciton phases and
    ``N`` the jumps plus the non-hermitian remainder ``W``.  When the
    dissipator vanishes (``E_R = 0`` or full correlation) the state is
    ``V^-1 rho V^-+`` with ``V`` diagonalising the sink Hamiltonian; the
    dissipator, which then cancels to roundoff, is all that is left in ``N``.

    The yields are carried as ``G = F - sum_k f_k rho_k / a_k`` over the
    rotating components, so the oscillating part of the flux is integrated
    exactly.  Use :meth:`pack` and :meth:`yields` to convert.
    """

    COND_LIMIT = 1e8
    NEGLIGIBLE = 1e-9

    def __init__(self, L: Liouvillian, trap_op, loss_op):
        M = L.M
        self.M = M
        lam = None
        scale = np.abs(L.h_nh).max()
        if np.abs(L.dissipative_eig).max() <= self.NEGLIGIBLE * scale:
            lam, V = np.linalg.eig(L.h_sink_eig)
            if np.linalg.cond(V) >= self.COND_LIMIT:
                lam = None
        if lam is not None:
            self.V, self.Vinv = V, np.linalg.inv(V)
            self.W, self.Q = None, L.Q
        else:
            # phases only: decays stay explicit, which suits the
            # quasi-stationary populations fed by the jumps
            lam = np.diag(L.h_nh).real.astype(complex)
            self.V = self.Vinv = np.eye(M)
            self.W, self.Q = L.h_nh - np.diag(lam), None
        a = (-1j * (lam[:, None] - lam.conj()[None, :])).reshape(-1, order="F")
        self.a = np.concatenate([a, [0.0, 0.0]])
        self.jumps = L.jumps if L.jumps.nnz else None
        V, Vh = self.V, self.V.conj().T
        self.gram_t = (Vh @ V).T.reshape(-1, order="F")
        f = np.stack([(Vh @ op @ V).T.reshape(-1, order="F") for op in (trap_op, loss_op)])
        self.fast = np.abs(a) > 1e-9 * max(1.0, np.abs(a).max())
        self.f_slow = np.where(self.fast, 0.0, f)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.f_over_a = np.where(self.fast, f / np.where(self.fast, a, 1.0), 0.0)

    def to_frame(self, rho_eig):
        if self.W is not None:
            return rho_eig
        return self.Vinv @ rho_eig @ self.Vinv.conj().T

    def from_frame(self, r):
        if self.W is not None:
            return r
        return self.V @ r @ self.V.conj().T

    def pack(self, rho_eig):
        rv = vec(self.to_frame(rho_eig))
        return np.concatenate([rv, -(self.f_over_a @ rv)])

    def yields(self, y):
        rv = y[: self.M ** 2]
        return (y[self.M ** 2:] + self.f_over_a @ rv).real

    def trace(self, y):
        return float((self.gram_t @ y[: self.M ** 2]).real)

    def magnitude(self, y):
        """Size of the state and of the accumulated yields."""
        return max(np.abs(y[: self.M ** 2]).max(), np.abs(self.yields(y)).max())

    def __call__(self, y):
        M = self.M
        rv = y[: M * M]
        out = np.zeros(M * M + 2, dtype=complex)
        if self.jumps is not None:
            r = self.from_frame(rv.reshape(M, M, order="F"))
            j = (self.jumps @ r.reshape(-1, order="F")).reshape(M, M, order="F")
            if self.Q is not None:
                j -= 0.5 * (self.Q @ r + r @ self.Q)
            out[: M * M] = self.to_frame(j).reshape(-1, order="F")
        if self.W is not None:
            r = rv.reshape(M, M, order="F")
            out[: M * M] += (-1j * (self.W @ r - r @ self.W.conj().T)).reshape(-1, order="F")
        out[M * M:] = self.f_slow @ rv - self.f_over_a @ out[: M * M]
        return out


def default_horizon(system):
    """``10 / min(2 kappa_min, 2 Gamma_min)`` over the non-zero sink rates (ps)."""
    rates = [r for r in (system.trap_rates[system.trap_rates > 0].min(initial=np.inf),
                         system.loss_rates[system.loss_rates > 0].min(initial=np.inf))
             if np.isfinite(r)]
    if not rates:
        raise UnboundedIntegralError("system has no sink; the yield integral diverges")
    return 10.0 / (2.0 * min(rates))


def propagate(rho0, generator, t_end, tol=DEFAULT_RTOL, sample_times=None):
    """Integrate the master equation from ``rho0`` and sample ``rho(t)``.

    ``generator`` is either a :class:`Liouvillian` (integrated in the rotating
    exciton frame) or a callable ``rhs(t, rho)`` acting on site-basis matrices.
    The state is re-hermitised after every accepted step.
    """
    if sample_times is None:
        sample_times = np.linspace(0.0, t_end, 101)
    sample_times = np.asarray(sample_times, dtype=float)
    if isinstance(generator, Liouvillian):
        L = generator
        M = L.M
        rho0 = _as_density(rho0, M)
        zero = np.zeros((M, M))
        sysm = _LawsonSystem(L, zero, zero)
        y0 = sysm.pack(L.to_eig(rho0))
        _, _, ys = lawson_dopri45(sysm.a, sysm, y0, t_end, rtol=tol, sample_times=sample_times,
                                  post_step=lambda y: _hermitise(y, M), scale_ref=sysm.magnitude)
        states = np.array([L.to_site_rho(sysm.from_frame(unvec(y[: M * M], M))) for y in ys])
        return Trajectory(np.sort(sample_times), states)

    rho0 = np.asarray(rho0, dtype=complex)
    M = rho0.shape[0]

    def f(t, y):
        return vec(generator(t, unvec(y, M)))

    _, _, ys = dopri45(f, vec(rho0), 0.0, t_end, rtol=tol, sample_times=sample_times,
                       post_step=lambda y: _hermitise(y, M))
    return Trajectory(np.sort(sample_times), np.array([unvec(y, M) for y in ys]))


def efficiency_ode(rho0, system, L: Liouvillian, t_max=None, tail_tol=DEFAULT_TAIL_TOL,
                   tol=DEFAULT_RTOL):
    """Trapped yield by adaptive time integration of the flux ``2 kappa rho_mm``.

    Integration stops once the remaining trace drops below ``tail_tol`` or at
    ``t_max`` (default :func:`default_horizon`), in which case a warning is
    raised and the residual trace bounds the missing yield.
    """
    start = time.perf_counter()
    M = L.M
    rho0 = _as_density(rho0, M)
    if t_max is None:
        t_max = default_horizon(system)
    trap_op, loss_op = sink_operators(L, system)
    sysm = _LawsonSystem(L, trap_op, loss_op)

    def stop(t, y):
        return sysm.trace(y) < tail_tol

    y0 = sysm.pack(L.to_eig(rho0))
    t, y, _ = lawson_dopri45(sysm.a, sysm, y0, t_max, rtol=tol, stop=stop,
                             post_step=lambda v: _hermitise(v, M), scale_ref=sysm.magnitude)
    residual = sysm.trace(y)
    notes = ()
    if residual >= tail_tol:
        msg = (f"horizon t_max={t_max:.4g} ps reached with residual trace {residual:.3e}; "
               f"trapped yield uncertain by at most that amount")
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes = (msg,)
    eta, loss = sysm.yields(y)
    return EfficiencyResult(float(eta), float(loss), residual,
                            "ode", time.perf_counter() - start, warnings=notes)


def efficiency_linear_solve(rho0, system, L: Liouvillian):
    """Exact yield from ``int_0^inf rho dt = -L^{-1} rho(0)`` via dense LU.

    ``rho0`` may be a single state or a sequence of states; the factorisation
    is shared across them.
    """
    start = time.perf_counter()
    M = L.M
    single = not isinstance(rho0, (list, tuple)) and np.ndim(getattr(rho0, "amplitudes", rho0)) <= 2
    states = [rho0] if single else list(rho0)
    rhs = np.stack([-vec(L.to_eig(_as_density(r, M))) for r in states], axis=1)
    with warnings.catch_warnings():
        # singularity is detected from the pivots below and reported as an error
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(L.matrix_eig, check_finite=False)
    u = np.abs(np.diag(lu))
    if u.min() <= 1e-13 * u.max():
        raise UnboundedIntegralError("Liouvillian is singular: no decay channel reaches the state")
    x = linalg.lu_solve((lu, piv), rhs, check_finite=False)
    trap_op, loss_op = sink_operators(L, system)
    eta = np.real(vec(trap_op.T) @ x)
    loss = np.real(vec(loss_op.T) @ x)
    elapsed = (time.perf_counter() - start) / len(states)
    out = [EfficiencyResult(float(e), float(l), 0.0, "linear_solve", elapsed)
           for e, l in zip(eta, loss)]
    return out[0] if single else out


def branching_ratio(kappa, gamma):
    """Closed-form single-site yield kappa / (kappa + Gamma)."""
    return kappa / (kappa + gamma) if kappa + gamma > 0 else math.nan
