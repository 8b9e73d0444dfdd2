"""QFI of the joint system-plus-radiation state from transfer-matrix data.

All curves are indexed by the number of emission steps ``T = 1 .. T_max``.
The bulk curve starts from a purification of the stationary state, where
the closed form in the stationary variables (alpha, beta_tau, gamma) is
exact.  ``exact_qfi_curve`` handles an arbitrary initial state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from emitqfi._linalg import CArray, sandwich
from emitqfi.channel import KrausChannel, TransferSpectrum, discretize, fixed_point, spectral_decompose
from emitqfi.errors import ValidationError
from emitqfi.lindblad import LindbladModel


@dataclass(frozen=True)
class QfiVariables:
    """Stationary one- and two-point quantities entering the QFI."""

    alpha: float
    gamma: complex
    betas: CArray

    def curve(self, t_max: int) -> np.ndarray:
        return curve_from_variables(self.alpha, self.gamma, self.betas, t_max)

    def terms(self, t_max: int) -> dict[str, np.ndarray]:
        """The alpha, beta and gamma contributions to the curve; they sum to ``curve``."""
        _check_t(t_max)
        t = np.arange(1, t_max + 1)
        unit = curve_from_variables(0.0, 0.0, self.betas, t_max)
        return {"alpha": 4.0 * t * self.alpha, "beta": unit, "gamma": -4.0 * t**2 * abs(self.gamma) ** 2}


def _check_t(t_max: int) -> None:
    if int(t_max) != t_max or t_max < 1:
        raise ValidationError("T_max must be a positive integer")


def stationary_state(channel: KrausChannel, rho: np.ndarray | None = None) -> CArray:
    return fixed_point(channel) if rho is None else np.asarray(rho, dtype=complex)


def qfi_variables(channel: KrausChannel, tau_max: int, rho: np.ndarray | None = None) -> QfiVariables:
    """alpha, gamma and beta_tau for tau < tau_max at the state ``rho``.

    alpha is the norm of the one-step derivative, gamma its overlap with the
    undifferentiated step, and beta_tau the overlap between a derivative on
    the bra side and one on the ket side ``tau`` steps later.
    """
    k, dk = channel.kraus, channel.d_kraus
    rho = stationary_state(channel, rho)
    alpha = float(np.trace(sandwich(dk, rho, dk)).real)
    gamma = complex(np.trace(sandwich(dk, rho, k)))
    q = np.einsum("mji,mjk->ik", k.conj(), dk)  # sum K^dagger dK
    x = sandwich(k, rho, dk)
    betas = np.empty(max(tau_max, 0), dtype=complex)
    for tau in range(tau_max):
        betas[tau] = np.trace(q @ x)
        x = channel.apply(x)
    return QfiVariables(alpha, gamma, betas)


def curve_from_variables(alpha: float, gamma: complex, betas: np.ndarray, t_max: int) -> np.ndarray:
    """F(T) = 4 (T alpha + 2 sum_{tau<=T-2} (T-tau-1) Re beta_tau - T^2 |gamma|^2)."""
    _check_t(t_max)
    if len(betas) < t_max - 1:
        raise ValidationError("not enough beta values for the requested T_max")
    t = np.arange(1, t_max + 1)
    re_b = np.real(betas[: max(t_max - 1, 0)])
    # S(T) = sum_{tau=0}^{T-2} (T-1-tau) beta_tau, S(T+1) = S(T) + sum_{tau<=T-1} beta_tau
    s = np.concatenate([[0.0], np.cumsum(np.cumsum(re_b))])
    return 4.0 * (t * alpha + 2.0 * s - t**2 * abs(gamma) ** 2)


def qfi_curve(channel: KrausChannel, t_max: int, rho: np.ndarray | None = None) -> np.ndarray:
    """Joint QFI for T = 1..T_max starting from a purification of the fixed point."""
    _check_t(t_max)
    return qfi_variables(channel, t_max - 1, rho).curve(t_max)


def exact_qfi_curve(channel: KrausChannel, rho_in: np.ndarray, t_max: int) -> np.ndarray:
    """Joint QFI for T = 1..T_max from a purification of an arbitrary ``rho_in``.

    Propagates the system state and the accumulated bra-derivative operator,
    so the cost is O(T_max) channel applications.
    """
    _check_t(t_max)
    k, dk = channel.kraus, channel.d_kraus
    q = np.einsum("mji,mjk->ik", k.conj(), dk)
    rho = np.asarray(rho_in, dtype=complex)
    acc = np.zeros_like(rho)
    alpha_sum = 0.0
    gamma_sum = 0.0j
    cross_sum = 0.0
    out = np.empty(t_max)
    for step in range(t_max):
        alpha_sum += np.trace(sandwich(dk, rho, dk)).real
        gamma_sum += np.trace(q @ rho)
        cross_sum += np.trace(q @ acc).real
        out[step] = 4.0 * (alpha_sum + 2.0 * cross_sum - abs(gamma_sum) ** 2)
        acc = channel.apply(acc) + sandwich(k, rho, dk)
        rho = channel.apply(rho)
    return out


@dataclass(frozen=True)
class RateReport:
    """Asymptotic linear growth of the bulk QFI.

    ``per_step`` is the slope of F(T) per emission step.  When the channel
    carries a time step, ``f0`` and ``fc`` (and their sum ``rate``) are per
    unit time, otherwise per step.
    """

    f0: float
    fc: float
    per_step: float
    correlation_time: float
    dt: float | None

    @property
    def rate(self) -> float:
        return self.f0 + self.fc


def relaxation_modes(channel: KrausChannel, spectrum: TransferSpectrum | None = None) -> tuple[CArray, CArray]:
    """Eigenvalues and weights with ``beta_tau - |gamma|^2 = sum_mu K_mu lambda_mu^tau``.

    Sums over the decaying modes; ``K_mu = Tr(Q Psi_mu) <<J_mu|B>>`` with
    ``Q = sum K^dagger dK`` and ``B = sum K rho dK^dagger``.
    """
    sp = spectrum if spectrum is not None else spectral_decompose(channel)
    rho = sp.steady_state()
    k, dk = channel.kraus, channel.d_kraus
    q = np.einsum("mji,mjk->ik", k.conj(), dk)
    b = sandwich(k, rho, dk)
    dec = sp.decaying
    a_psi = np.einsum("ij,kji->k", q, sp.right[dec])
    j_b = np.einsum("kij,ij->k", sp.left[dec].conj(), b)
    return sp.eigenvalues[dec], a_psi * j_b


def asymptotic_rate(channel: KrausChannel, spectrum: TransferSpectrum | None = None) -> RateReport:
    """Large-T slope of the bulk QFI split into on-site and correlation parts.

    The slope per step is ``4 (alpha - |gamma|^2) + 8 Re sum K_mu / (1 - lambda_mu)``
    with the modes of ``relaxation_modes``.
    """
    sp = spectrum if spectrum is not None else spectral_decompose(channel)
    rho = sp.steady_state()
    k, dk = channel.kraus, channel.d_kraus
    alpha = float(np.trace(sandwich(dk, rho, dk)).real)
    gamma = complex(np.trace(sandwich(dk, rho, k)))
    lam, weights = relaxation_modes(channel, sp)
    f0 = 4.0 * (alpha - abs(gamma) ** 2)
    fc = 8.0 * float(np.sum(weights / (1.0 - lam)).real)
    scale = channel.dt if channel.dt else 1.0
    return RateReport(
        f0=f0 / scale,
        fc=fc / scale,
        per_step=f0 + fc,
        correlation_time=sp.correlation_time,
        dt=channel.dt,
    )


@dataclass(frozen=True)
class ContinuumRate:
    """dt -> 0 extrapolation of the QFI rate with a step-halving error estimate."""

    value: float
    error: float
    coarse: float
    fine: float


def continuum_rate(model: LindbladModel, dt: float, mode: str = "exact_isometry") -> ContinuumRate:
    """Richardson extrapolation of the per-time rate from steps ``dt`` and ``dt/2``.

    The discretized rate carries an O(dt) error, so the estimate is
    ``2 r(dt/2) - r(dt)`` and the error bound is ``|r(dt/2) - r(dt)|``.
    """
    coarse = asymptotic_rate(discretize(model, dt, mode)).rate
    fine = asymptotic_rate(discretize(model, dt / 2, mode)).rate
    return ContinuumRate(2.0 * fine - coarse, abs(fine - coarse), coarse, fine)


def secant_slope(curve: np.ndarray) -> float:
    """Slope between the last two points of a curve."""
    return float(curve[-1] - curve[-2])
