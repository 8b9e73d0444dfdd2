"""QFI growth when the transfer matrix has several peripheral modes.

The initial state fixes the weights ``c_mu = Tr(J_mu rho_in)`` on the
positive fixed basis.  Sector-resolved variables then give a curve whose
T^2 coefficient measures coherent (Heisenberg-like) accumulation.  These
variables are exact when the derivative maps keep each sector separate,
which holds for the spin monitor and the GHZ emitter.  ``exact_qfi_curve``
is exact for any channel and initial state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.optimize

from emitqfi._linalg import CArray, dag, sandwich
from emitqfi.channel import KrausChannel, TransferSpectrum, spectral_decompose
from emitqfi.errors import ValidationError
from emitqfi.haar import haar_average_exact
from emitqfi.qfi import QfiVariables, curve_from_variables, exact_qfi_curve


def mode_weights(spectrum: TransferSpectrum, rho_in: np.ndarray, peripheral: bool = True) -> CArray:
    """c_mu = <<J_mu|rho_in>> over the fixed (or all peripheral) modes."""
    n = spectrum.n_peripheral if peripheral else spectrum.n_fixed
    return np.einsum("kij,ij->k", spectrum.left[:n].conj(), rho_in)


def long_range_variables(
    channel: KrausChannel, spectrum: TransferSpectrum, rho_in: np.ndarray, tau_max: int
) -> QfiVariables:
    """Sector-weighted alpha, gamma and beta_tau over all peripheral modes."""
    k, dk = channel.kraus, channel.d_kraus
    n = spectrum.n_peripheral
    c = mode_weights(spectrum, rho_in)
    lefts, rights = spectrum.left[:n], spectrum.right[:n]
    alpha = sum(c[i] * np.vdot(lefts[i], sandwich(dk, rights[i], dk)) for i in range(n))
    # Q_mu = sum K^dag J_mu^dag dK, so Tr(Q_mu Y) = <<J_mu|E_{dK,K}(Y)>>
    qs = [np.matmul(np.matmul(dag(k), dag(lefts[i])), dk).sum(axis=0) for i in range(n)]
    gamma = sum(c[i] * np.trace(qs[i] @ rights[i]) for i in range(n))
    xs = [sandwich(k, rights[i], dk) for i in range(n)]
    betas = np.empty(max(tau_max, 0), dtype=complex)
    for tau in range(tau_max):
        betas[tau] = sum(c[i] * np.trace(qs[i] @ xs[i]) for i in range(n))
        xs = [channel.apply(x) for x in xs]
    if abs(np.imag(alpha)) > 1e-9 * max(1.0, abs(alpha)):
        raise ValidationError(f"alpha has imaginary part {np.imag(alpha):.3g}; peripheral basis is not conjugate-paired")
    return QfiVariables(float(np.real(alpha)), complex(gamma), betas)


def long_range_qfi_curve(
    channel: KrausChannel,
    rho_in: np.ndarray,
    t_max: int,
    spectrum: TransferSpectrum | None = None,
    method: Literal["variables", "exact"] = "variables",
) -> np.ndarray:
    """Joint QFI for T = 1..T_max from a purification of ``rho_in``.

    ``variables`` uses the sector-weighted stationary variables; ``exact``
    propagates the actual state and is valid for any channel.
    """
    rho_in = np.asarray(rho_in, dtype=complex)
    if method == "exact":
        return exact_qfi_curve(channel, rho_in, t_max)
    if method != "variables":
        raise ValidationError(f"unknown method {method!r}")
    sp = spectrum if spectrum is not None else spectral_decompose(channel)
    return curve_from_variables(*_astuple(long_range_variables(channel, sp, rho_in, t_max - 1)), t_max)


def _astuple(v: QfiVariables):
    return v.alpha, v.gamma, v.betas


def gamma_matrix(channel: KrausChannel, spectrum: TransferSpectrum) -> CArray:
    """Gamma[mu, nu] = <<J_mu|E_{dK,K}|Psi_nu>> over the fixed modes."""
    k, dk = channel.kraus, channel.d_kraus
    n = spectrum.n_fixed
    mapped = np.array([sandwich(dk, spectrum.right[j], k) for j in range(n)])
    return np.einsum("aij,bij->ab", spectrum.left[:n].conj(), mapped)


@dataclass(frozen=True)
class QuadraticCoefficient:
    """beta_infinity - |gamma|^2 split into mode-diagonal and off-diagonal parts."""

    diagonal: float
    off_diagonal: float

    @property
    def total(self) -> float:
        return self.diagonal + self.off_diagonal


def quadratic_coefficient(c: np.ndarray, gamma_mat: np.ndarray) -> QuadraticCoefficient:
    """T^2 coefficient of F(T)/4 for weights ``c``.

    beta_inf = sum_{mu,nu} c_mu Gamma[mu,nu] conj(Gamma[nu,mu]) and
    |gamma|^2 = |sum_mu c_mu Gamma[mu,mu]|^2.
    """
    c = np.real_if_close(np.asarray(c))
    g = np.asarray(gamma_mat)
    d = np.diag(g)
    cross = g * g.T.conj()  # Gamma[mu,nu] conj(Gamma[nu,mu])
    diag_part = np.sum(c * (1.0 - c) * np.abs(d) ** 2)
    off_beta = np.sum(c * (np.sum(cross, axis=1) - np.abs(d) ** 2))
    cc = np.outer(c, c)
    off_gamma = np.sum(cc * np.outer(d, d.conj())) - np.sum(c**2 * np.abs(d) ** 2)
    return QuadraticCoefficient(float(np.real(diag_part)), float(np.real(off_beta - off_gamma)))


def _value_and_grad(c: np.ndarray, g: np.ndarray) -> tuple[float, np.ndarray]:
    d = np.diag(g)
    w = np.real(np.sum(g * g.T.conj(), axis=1))
    s = np.sum(c * d)
    val = float(np.dot(c, w) - abs(s) ** 2)
    grad = w - 2.0 * np.real(np.conj(s) * d)
    return val, grad


@dataclass(frozen=True)
class OptimizedState:
    psi: CArray
    weights: np.ndarray
    value: float
    box_bound: float


def optimize_initial_state(
    gamma_mat: np.ndarray, fixed_left: np.ndarray, restarts: int = 8, seed: int = 0
) -> OptimizedState:
    """Pure initial state maximizing the T^2 coefficient.

    The weights of a pure state are ``c_mu = <psi|J_mu|psi>``.  ``box_bound``
    is the maximum over ``c`` in [0, 1]^n with sum c = 1, an upper bound on
    every physical value.
    """
    g_in = np.asarray(gamma_mat)
    scale = float(np.max(np.abs(g_in))) or 1.0
    g = g_in / scale  # keeps optimizer tolerances meaningful for tiny dt
    js = np.asarray(fixed_left)
    n, dim = js.shape[0], js.shape[1]
    rng = np.random.default_rng(seed)

    def weights(x):
        psi = x[:dim] + 1j * x[dim:]
        nrm = np.vdot(psi, psi).real
        return psi, np.einsum("i,kij,j->k", psi.conj(), js, psi).real / nrm, nrm

    def objective(x):
        psi, c, nrm = weights(x)
        val, dval = _value_and_grad(c, g)
        # d c_mu / d psi^* = (J_mu psi - c_mu psi) / |psi|^2
        grad_c = (np.einsum("k,kij,j->i", dval, js, psi) - np.dot(dval, c) * psi) / nrm
        return -val, -2.0 * np.concatenate([grad_c.real, grad_c.imag])

    best = None
    for _ in range(max(restarts, 1)):
        x0 = rng.standard_normal(2 * dim)
        res = scipy.optimize.minimize(objective, x0, jac=True, method="L-BFGS-B")
        if best is None or res.fun < best.fun:
            best = res
    psi, c, nrm = weights(best.x)
    psi = psi / np.sqrt(nrm)

    def box_obj(cv):
        v, gr = _value_and_grad(cv, g)
        return -v, -gr

    box = scipy.optimize.minimize(
        box_obj,
        np.full(n, 1.0 / n),
        jac=True,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * n,
        constraints=[{"type": "eq", "fun": lambda cv: np.sum(cv) - 1.0, "jac": lambda cv: np.ones_like(cv)}],
    )
    return OptimizedState(psi, c, float(-best.fun) * scale**2, float(-box.fun) * scale**2)


@dataclass(frozen=True)
class DegenerateHaarReport:
    """Exact Haar average and two T^2 leading terms.

    ``leading`` uses the exact second Haar moments of the mode weights.
    ``leading_naive`` weights the subtracted term by ``D/(D+1)`` with
    ``Tr(J_mu/D) Tr(J_nu/D) + Tr(J_mu J_nu)``. It
    disagrees with ``exact`` whenever some ``Tr(J_mu J_nu)`` term survives.
    """

    exact: float
    leading: float
    leading_naive: float
    steps: int


def degenerate_haar_average(
    channel: KrausChannel, steps: int, spectrum: TransferSpectrum | None = None
) -> DegenerateHaarReport:
    """Haar-averaged QFI with the T^2 leading term from averaged mode weights.

    For a Haar-random pure state E[c_mu] = Tr J_mu / D and
    E[c_mu c_nu] = (Tr J_mu Tr J_nu + Tr J_mu J_nu) / (D (D + 1)); the leading
    term is 4 T^2 times the averaged quadratic coefficient.
    """
    sp = spectrum if spectrum is not None else spectral_decompose(channel)
    dim = channel.dim
    js = sp.fixed_left
    g = gamma_matrix(channel, sp)
    d = np.diag(g)
    tr = np.einsum("kii->k", js).real
    tr2 = np.einsum("aij,bji->ab", js, js).real
    w = np.real(np.sum(g * g.T.conj(), axis=1))
    dd = np.outer(d, d.conj())
    second = (np.outer(tr, tr) + tr2) / (dim * (dim + 1))
    mean_q = np.dot(w, tr) / dim - float(np.real(np.sum(second * dd)))
    naive = dim / (dim + 1) * (np.outer(tr, tr) / dim**2 + tr2)
    naive_q = np.dot(w, tr) / dim - float(np.real(np.sum(naive * dd)))
    exact = haar_average_exact(channel, steps, with_bulk=False).exact
    return DegenerateHaarReport(exact, 4.0 * steps**2 * mean_q, 4.0 * steps**2 * naive_q, steps)
