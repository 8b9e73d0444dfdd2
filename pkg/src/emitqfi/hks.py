"""Whether a derivative can be absorbed into a rotation of the emitted photons.

If ``H_s = i sum_m K_m^dagger dK_m`` lies in the span of ``{K_i^dagger K_j}``
there is a Hermitian ``h`` on the photon space with
``sum_m K_m^dagger dK_m = i sum_{m,m'} h[m, m'] K_m^dagger K_{m'}``.  Writing
``W = (1 (x) exp(-i theta h)) V`` removes the overlap
``sum_m W_m^dagger dW_m = 0``, and the joint state becomes
``|psi_V> = exp(i theta H) |psi_W>`` with ``H = sum_tau h_tau``.  The QFI
then splits as ``4 Var_W[H] + 4 <dpsi_W|dpsi_W> + 8 Im <psi_W|H|dpsi_W>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from emitqfi._linalg import CArray, dag, hermitize, sandwich
from emitqfi.channel import KrausChannel, fixed_point
from emitqfi.errors import ValidationError
from emitqfi.lindblad import LindbladModel


def effective_hamiltonian(channel: KrausChannel) -> CArray:
    """i sum_m K_m^dagger dK_m (Hermitian when the family is isometric)."""
    return 1j * np.einsum("mji,mjk->ik", channel.kraus.conj(), channel.d_kraus)


def _hermitian_unit_basis(n: int) -> np.ndarray:
    """Orthonormal real basis of n x n Hermitian matrices."""
    basis = []
    for i in range(n):
        e = np.zeros((n, n), complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), complex)
            e[i, j] = e[j, i] = 1 / np.sqrt(2)
            basis.append(e)
            e = np.zeros((n, n), complex)
            e[i, j], e[j, i] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            basis.append(e)
    return np.array(basis)


def _real_lstsq(columns: list[np.ndarray], target: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-norm real coefficients x with sum x_k columns[k] ~ target; returns residual norm."""
    a = np.array([c.reshape(-1) for c in columns]).T
    a_real = np.concatenate([a.real, a.imag])
    b = target.reshape(-1)
    b_real = np.concatenate([b.real, b.imag])
    x, *_ = np.linalg.lstsq(a_real, b_real, rcond=1e-12)
    return x, float(np.linalg.norm(a_real @ x - b_real))


@dataclass(frozen=True)
class HksReport:
    in_span: bool
    residual: float
    relative_residual: float
    h: CArray


def solve_h(channel: KrausChannel) -> tuple[CArray, float]:
    """Minimum-norm Hermitian h with sum K^dag dK = i sum h[m,m'] K_m^dag K_m'; returns (h, residual)."""
    k = channel.kraus
    q = np.einsum("mji,mjk->ik", k.conj(), channel.d_kraus)
    basis = _hermitian_unit_basis(channel.n_outcomes)
    pairs = np.einsum("mji,njk->mnik", k.conj(), k)  # K_m^dag K_n
    columns = [1j * np.einsum("mn,mnik->ik", e, pairs) for e in basis]
    x, res = _real_lstsq(columns, q)
    h = np.tensordot(x, basis, axes=1)
    return hermitize(h), res


def hks_test(channel: KrausChannel, tol: float = 1e-10) -> HksReport:
    """Test whether the effective Hamiltonian lies in span{K_i^dagger K_j}."""
    h, res = solve_h(channel)
    scale = float(np.linalg.norm(effective_hamiltonian(channel)))
    rel = res / scale if scale > 0 else 0.0
    return HksReport(rel <= tol, res, rel, h)


def hls_test(model: LindbladModel, tol: float = 1e-10) -> HksReport:
    """Continuous-time version: is dH in span{1, L_m, L_m^dagger, L_m^dagger L_n}?

    Only Hamiltonian dependence is covered; jump derivatives must vanish.
    ``h`` holds the complex expansion coefficients.
    """
    if np.any(model.d_jumps):
        raise ValidationError("the Lindblad span test requires parameter-independent jumps")
    dim = model.dim
    ops = [np.eye(dim, dtype=complex)]
    ops += list(model.jumps) + [dag(l) for l in model.jumps]
    ops += [dag(a) @ b for a in model.jumps for b in model.jumps]
    a = np.array([o.reshape(-1) for o in ops]).T
    target = model.d_hamiltonian.reshape(-1)
    coeffs, *_ = np.linalg.lstsq(a, target, rcond=1e-12)
    res = float(np.linalg.norm(a @ coeffs - target))
    scale = float(np.linalg.norm(target))
    rel = res / scale if scale > 0 else 0.0
    return HksReport(rel <= tol, res, rel, coeffs)


def build_w(channel: KrausChannel, h: np.ndarray) -> KrausChannel:
    """Rotated isometry W with dW_m = dK_m - i sum_m' h[m,m'] K_m'."""
    h = np.asarray(h, dtype=complex)
    dw = channel.d_kraus - 1j * np.einsum("mn,nij->mij", h, channel.kraus)
    return KrausChannel(channel.kraus, dw, channel.dt, channel.label, channel.meta)


def w_condition_residual(w: KrausChannel) -> float:
    """Frobenius norm of sum_m W_m^dagger dW_m."""
    return float(np.linalg.norm(np.einsum("mji,mjk->ik", w.kraus.conj(), w.d_kraus)))


def _photon_rotate(h: np.ndarray, ops: np.ndarray) -> np.ndarray:
    return np.einsum("mn,nij->mij", h, ops)


def _trace_functional(ket: np.ndarray, bra: np.ndarray) -> np.ndarray:
    """Q with Tr(sum_m ket_m X bra_m^dagger) = Tr(Q X)."""
    return np.einsum("mji,mjk->ik", bra.conj(), ket)


def _correlated_sum(channel, rho_in, steps, single, early, late) -> complex:
    """sum_s Tr single(rho_s) + sum_{s'<s} Tr late(T^{s-s'-1} early(rho_s')).

    ``single`` and ``late`` are (ket, bra) operator stacks; ``early`` likewise.
    """
    q_single = _trace_functional(*single)
    q_late = _trace_functional(*late)
    rho = np.asarray(rho_in, dtype=complex)
    acc = np.zeros_like(rho)
    total = 0.0j
    for _ in range(steps):
        total += np.trace(q_single @ rho) + np.trace(q_late @ acc)
        acc = channel.apply(acc) + sandwich(early[0], rho, early[1])
        rho = channel.apply(rho)
    return complex(total)


@dataclass(frozen=True)
class HksDecomposition:
    """Terms of the QFI after moving the derivative onto a photon rotation.

    ``overlap_term`` collects what is left when the W condition is only
    approximately met; it vanishes when it holds exactly.
    """

    steps: int
    variance_term: float
    derivative_term: float
    cross_term: float
    overlap_term: float
    mean_h: float
    w_overlap: complex

    @property
    def total(self) -> float:
        return self.variance_term + self.derivative_term + self.cross_term + self.overlap_term


def hks_qfi_decomposition(
    channel: KrausChannel, h: np.ndarray, steps: int, rho_in: np.ndarray | None = None
) -> HksDecomposition:
    """Split the joint QFI after ``steps`` emissions from a purification of ``rho_in``.

    Defaults to the fixed point of the channel.
    """
    if steps < 1:
        raise ValidationError("steps must be at least 1")
    rho = fixed_point(channel) if rho_in is None else np.asarray(rho_in, dtype=complex)
    h = np.asarray(h, dtype=complex)
    w = build_w(channel, h)
    k, dw = w.kraus, w.d_kraus
    hk = _photon_rotate(h, k)
    h2k = _photon_rotate(h @ h, k)
    hdw = _photon_rotate(h, dw)
    zero = np.zeros_like(k)
    mean_h = _correlated_sum(channel, rho, steps, (hk, k), (k, k), (zero, k)).real
    h2 = _h_squared(channel, rho, steps, hk, h2k, k)
    dnorm = _derivative_norm(channel, rho, steps, dw, k)
    overlap = _correlated_sum(channel, rho, steps, (dw, k), (k, k), (zero, k))
    cross = _cross(channel, rho, steps, hk, hdw, dw, k)
    var = float(h2 - mean_h**2)
    shift = 1j * mean_h + overlap
    overlap_term = -4.0 * (abs(shift) ** 2 - mean_h**2)
    return HksDecomposition(
        steps=steps,
        variance_term=4.0 * var,
        derivative_term=4.0 * dnorm,
        cross_term=8.0 * cross.imag,
        overlap_term=float(overlap_term),
        mean_h=float(mean_h),
        w_overlap=overlap,
    )


def _h_squared(channel, rho, steps, hk, h2k, k) -> float:
    singles = _correlated_sum(channel, rho, steps, (h2k, k), (k, k), (np.zeros_like(k), k))
    pairs = _correlated_sum(channel, rho, steps, (np.zeros_like(k), k), (hk, k), (hk, k))
    return float(singles.real + 2.0 * pairs.real)


def _derivative_norm(channel, rho, steps, dw, k) -> float:
    singles = _correlated_sum(channel, rho, steps, (dw, dw), (k, k), (np.zeros_like(k), k))
    pairs = _correlated_sum(channel, rho, steps, (np.zeros_like(k), k), (k, dw), (dw, k))
    return float(singles.real + 2.0 * pairs.real)


def _cross(channel, rho, steps, hk, hdw, dw, k) -> complex:
    """<psi_W| H |dpsi_W> summed over the positions of h and of the derivative."""
    zero = np.zeros_like(k)
    same = _correlated_sum(channel, rho, steps, (hdw, k), (k, k), (zero, k))
    deriv_first = _correlated_sum(channel, rho, steps, (zero, k), (dw, k), (hk, k))
    h_first = _correlated_sum(channel, rho, steps, (zero, k), (hk, k), (dw, k))
    return same + deriv_first + h_first


def hks_bound(channel: KrausChannel, steps: int) -> float:
    """Upper bound 4 (T ||A|| + (T^2 - T) ||B|| (||B|| + 2 sqrt||A||)) on the joint QFI.

    A = sum dK^dag dK and B = sum dK^dag K (spectral norms).
    """
    a = np.linalg.norm(np.einsum("mji,mjk->ik", channel.d_kraus.conj(), channel.d_kraus), 2)
    b = np.linalg.norm(np.einsum("mji,mjk->ik", channel.d_kraus.conj(), channel.kraus), 2)
    t = steps
    return float(4.0 * (t * a + (t * t - t) * b * (b + 2.0 * np.sqrt(a))))
