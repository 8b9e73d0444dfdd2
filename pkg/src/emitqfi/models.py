"""Concrete emitters: boundary time crystal, GHZ emitter, spin monitor and helpers."""

from __future__ import annotations

from functools import reduce

import numpy as np

from emitqfi._linalg import CArray, dag, hermitize
from emitqfi.channel import KrausChannel
from emitqfi.errors import ValidationError
from emitqfi.lindblad import LindbladModel

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def spin_operators(spin: float) -> tuple[CArray, CArray, CArray]:
    """S^x, S^y, S^z in the basis m = S, S-1, ..., -S."""
    two_s = round(2 * spin)
    if two_s < 0 or abs(two_s - 2 * spin) > 1e-12:
        raise ValidationError("spin must be a non-negative half-integer")
    m = spin - np.arange(two_s + 1)
    # <m+1|S^+|m> = sqrt(S(S+1) - m(m+1))
    plus = np.diag(np.sqrt(spin * (spin + 1) - m[1:] * (m[1:] + 1)), 1).astype(complex)
    minus = dag(plus)
    sx = 0.5 * (plus + minus)
    sy = -0.5j * (plus - minus)
    return sx, sy, np.diag(m).astype(complex)


def lowering(spin: float) -> CArray:
    sx, sy, _ = spin_operators(spin)
    return sx - 1j * sy


def boundary_time_crystal(n_spins: int, omega: float, kappa: float) -> LindbladModel:
    """Collective drive ``omega S^x`` and decay ``sqrt(kappa/S) S^-`` with S = N/2.

    The estimated parameter is ``omega``.  Works in the symmetric subspace of
    dimension N + 1.
    """
    if n_spins < 1:
        raise ValidationError("need at least one spin")
    if kappa <= 0:
        raise ValidationError("kappa must be positive")
    s = n_spins / 2
    sx, _, _ = spin_operators(s)
    lm = lowering(s)
    jump = np.sqrt(kappa / s) * lm
    return LindbladModel(
        omega * sx,
        jump[None],
        sx,
        np.zeros_like(jump)[None],
        label=f"btc N={n_spins}",
        meta={"n_spins": n_spins, "omega": omega, "kappa": kappa},
    )


def btc_steady_state_reference(n_spins: int, omega: float, kappa: float) -> CArray:
    """Closed-form stationary state proportional to eta eta^dagger.

    eta = sum_j (i g S^-)^j with g = 2 kappa / (omega N), the decay rate per
    spin over the drive.
    """
    s = n_spins / 2
    x = 1j * (2.0 * kappa / (omega * n_spins)) * lowering(s)
    eta = reduce(lambda acc, j: acc + np.linalg.matrix_power(x, j), range(n_spins + 1), np.zeros_like(x))
    rho = eta @ dag(eta)
    return hermitize(rho / np.trace(rho))


def ghz_emitter(delta: float) -> KrausChannel:
    """CNOT emitter with a phase ``e^{i theta delta}`` on system state |1> per step.

    ``K_m = |m><m| exp(i theta delta |1><1|)`` at theta = 0.  From |+> the
    joint state after T steps is (|0...0> + e^{i T delta theta}|1...1>)/sqrt(2),
    with QFI T^2 delta^2.
    """
    proj = np.array([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])], dtype=complex)
    gen = np.diag([0.0, delta]).astype(complex)
    return KrausChannel(proj, 1j * proj @ gen, label=f"ghz emitter delta={delta}")


def ghz_symmetry_residuals(channel: KrausChannel, theta: float = 0.7) -> dict[str, float]:
    """Residuals of the X(x)X(x)X flip symmetry and of moving a Z phase across the tensor.

    The CNOT tensor ``G_m = |m><m|`` satisfies ``X G_m X = G_{m xor 1}`` and
    commutes with ``exp(i theta Z)`` acting on either system leg.
    """
    g = channel.kraus
    flipped = np.array([PAULI_X @ g[1 - m] @ PAULI_X for m in range(2)])
    phase = np.diag(np.exp(1j * theta * np.diag(PAULI_Z)))
    moved = np.array([phase @ g[m] - g[m] @ phase for m in range(2)])
    return {"flip": float(np.max(np.abs(flipped - g))), "phase": float(np.max(np.abs(moved)))}


def _site_op(op: np.ndarray, site: int, n: int) -> CArray:
    mats = [np.eye(2, dtype=complex)] * n
    mats[site] = op
    return reduce(np.kron, mats)


def spin_monitor(
    n_spins: int, omega: float, kappa: float, energy: float = 1.0, h_single: np.ndarray | None = None
) -> LindbladModel:
    """Independent spins with ``H = omega sum_i h_i`` and ``L_i = sqrt(kappa) |-E><-E|_i``.

    ``h_single`` defaults to ``energy * Z`` so that |+E> = |0> and |-E> = |1>.
    The estimated parameter is ``omega``; the full 2^N space is used.
    """
    if not 1 <= n_spins <= 6:
        raise ValidationError("spin monitor supports 1 <= N <= 6")
    h1 = energy * PAULI_Z if h_single is None else np.asarray(h_single, dtype=complex)
    w, v = np.linalg.eigh(h1)
    low = v[:, 0:1] @ dag(v[:, 0:1])
    dh = sum(_site_op(h1, i, n_spins) for i in range(n_spins))
    jumps = np.array([np.sqrt(kappa) * _site_op(low, i, n_spins) for i in range(n_spins)])
    return LindbladModel(
        omega * dh,
        jumps,
        dh,
        np.zeros_like(jumps),
        label=f"spin monitor N={n_spins}",
        meta={"n_spins": n_spins, "omega": omega, "kappa": kappa, "energies": (float(w[1]), float(w[0]))},
    )


def monitor_ghz_state(model: LindbladModel) -> tuple[CArray, float]:
    """Equal superposition of the extreme eigenstates of the parameter generator and their energy gap."""
    w, v = np.linalg.eigh(model.d_hamiltonian)
    psi = (v[:, -1] + v[:, 0]) / np.sqrt(2)
    return psi, float(w[-1] - w[0])


def dephasing_sensor(kappa: float, theta: float = 0.0) -> LindbladModel:
    """Qubit with ``H = theta Z / 2`` and dephasing ``sqrt(kappa) Z``; parameter theta."""
    return LindbladModel(
        0.5 * theta * PAULI_Z,
        np.sqrt(kappa) * PAULI_Z[None],
        0.5 * PAULI_Z,
        np.zeros((1, 2, 2), complex),
        label="dephasing sensor",
        meta={"kappa": kappa, "theta": theta},
    )


def random_lindblad(dim: int, n_jumps: int, seed: int | np.random.Generator | None = None) -> LindbladModel:
    """Random Hamiltonian, jumps and derivative directions with O(1) norms."""
    rng = np.random.default_rng(seed)

    def gauss():
        return (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2 * dim)

    return LindbladModel(
        hermitize(gauss()),
        np.array([gauss() for _ in range(n_jumps)]),
        hermitize(gauss()),
        np.array([gauss() for _ in range(n_jumps)]),
        label=f"random lindblad D={dim}",
    )
