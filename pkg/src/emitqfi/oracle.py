"""Brute-force reference computations on the full joint state.

Everything here builds the explicit state vector of system (plus an
optional purifying ancilla) and all emitted photons, so it is limited to
small ``D`` and ``T``.  These routines share no code with the
transfer-matrix formulas and serve as their oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from emitqfi._linalg import CArray, dag
from emitqfi.channel import KrausChannel
from emitqfi.errors import ValidationError

MAX_RADIATION_DIM = 2**12


@dataclass(frozen=True)
class JointState:
    """Amplitudes and their parameter derivative after T steps.

    ``amp[s, a, x]`` has system index ``s``, ancilla index ``a`` and photon
    record ``x``; the record is a base-d integer whose most significant digit
    is the most recent photon.
    """

    amp: CArray
    d_amp: CArray
    n_outcomes: int
    steps: int

    def flat(self) -> tuple[CArray, CArray]:
        d_sys, anc, rec = self.amp.shape
        return self.amp.reshape(d_sys * anc, rec), self.d_amp.reshape(d_sys * anc, rec)


def _initial(psi0: np.ndarray, dim: int) -> CArray:
    psi = np.asarray(psi0, dtype=complex)
    if psi.ndim == 1:
        psi = psi[:, None]
    if psi.ndim != 2 or psi.shape[0] != dim:
        raise ValidationError(f"initial state must have leading dimension {dim}")
    norm = np.linalg.norm(psi)
    if not np.isclose(norm, 1.0, atol=1e-10):
        raise ValidationError(f"initial state has norm {norm:.12g}, expected 1")
    return psi


def full_state(channel: KrausChannel, psi0: np.ndarray, steps: int) -> JointState:
    """Apply the emission isometry ``steps`` times to ``psi0``.

    ``psi0`` is a state vector of length D or a D x r purification matrix
    (columns index the ancilla).
    """
    if steps < 0:
        raise ValidationError("steps must be non-negative")
    k, dk = channel.kraus, channel.d_kraus
    d = channel.n_outcomes
    amp = _initial(psi0, channel.dim)[:, :, None]
    d_amp = np.zeros_like(amp)
    for _ in range(steps):
        # new[s, a, m, x] = sum_j K_m[s, j] amp[j, a, x]
        new = np.einsum("msj,jax->samx", k, amp)
        d_new = np.einsum("msj,jax->samx", dk, amp) + np.einsum("msj,jax->samx", k, d_amp)
        shape = (amp.shape[0], amp.shape[1], d * amp.shape[2])
        amp, d_amp = new.reshape(shape), d_new.reshape(shape)
    return JointState(amp, d_amp, d, steps)


def pure_qfi(state: JointState) -> float:
    """4 (<dpsi|dpsi> - |<psi|dpsi>|^2) of the joint pure state."""
    a, da = state.amp.ravel(), state.d_amp.ravel()
    return float(4.0 * (np.vdot(da, da).real - abs(np.vdot(a, da)) ** 2))


def pure_qfi_brute(channel: KrausChannel, psi0: np.ndarray, steps: int) -> float:
    return pure_qfi(full_state(channel, psi0, steps))


def radiation_state(state: JointState) -> tuple[CArray, CArray]:
    """Reduced density matrix of the photons and its derivative."""
    a, da = state.flat()
    rho = a.T @ a.conj()
    d_rho = da.T @ a.conj() + a.T @ da.conj()
    return rho, d_rho


def mixed_state_qfi(rho: np.ndarray, d_rho: np.ndarray, tol: float = 1e-12) -> float:
    """SLD quantum Fisher information 2 sum |<i|drho|j>|^2 / (p_i + p_j)."""
    w, v = np.linalg.eigh(0.5 * (rho + dag(rho)))
    dr = dag(v) @ d_rho @ v
    denom = w[:, None] + w[None, :]
    mask = denom > tol
    return float(2.0 * np.sum(np.abs(dr[mask]) ** 2 / denom[mask]))


def radiation_qfi_brute(channel: KrausChannel, psi0: np.ndarray, steps: int) -> float:
    """QFI of the photons alone, the system (and ancilla) traced out."""
    if channel.n_outcomes**steps > MAX_RADIATION_DIM:
        raise ValidationError(f"radiation dimension {channel.n_outcomes}^{steps} is too large")
    return mixed_state_qfi(*radiation_state(full_state(channel, psi0, steps)))


def photocount_cfi(channel: KrausChannel, psi0: np.ndarray, steps: int, tol: float = 1e-300) -> float:
    """Classical Fisher information of the photon records in the emission basis."""
    state = full_state(channel, psi0, steps)
    a, da = state.flat()
    p = np.sum(np.abs(a) ** 2, axis=0)
    dp = 2.0 * np.sum((a.conj() * da).real, axis=0)
    keep = p > tol
    return float(np.sum(dp[keep] ** 2 / p[keep]))


def joint_cfi(
    channel: KrausChannel,
    psi0: np.ndarray,
    steps: int,
    system_unitary: np.ndarray | None = None,
    tol: float = 1e-300,
) -> float:
    """Classical Fisher information of measuring the system and all photons.

    Photons are read out in the channel's emission basis (rotate the channel
    to change it); the system, after ``system_unitary``, in its computational
    basis.  Requires a pure ``psi0``.
    """
    state = full_state(channel, psi0, steps)
    if state.amp.shape[1] != 1:
        raise ValidationError("joint_cfi needs a pure initial state")
    a, da = state.amp[:, 0, :], state.d_amp[:, 0, :]
    if system_unitary is not None:
        u = np.asarray(system_unitary, dtype=complex)
        a, da = u @ a, u @ da
    p = np.abs(a) ** 2
    dp = 2.0 * (a.conj() * da).real
    keep = p > tol
    return float(np.sum(dp[keep] ** 2 / p[keep]))
