"""Lindblad models with a single estimated parameter.

A model stores the Hamiltonian, the jump operators and their derivatives
with respect to the parameter at the working point.  Moving the working
point is linear: ``H(theta) = H + theta * dH`` and likewise for the jumps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from emitqfi._linalg import CArray, as_operator_stack, dag, hermitize, unvec, vec
from emitqfi.errors import NonUniqueSteadyState, ValidationError


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian ``H``, jumps ``L_m`` and their parameter derivatives."""

    hamiltonian: CArray
    jumps: CArray
    d_hamiltonian: CArray
    d_jumps: CArray
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        h = np.asarray(self.hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValidationError(f"Hamiltonian must be square, got shape {h.shape}")
        dim = h.shape[0]
        dh = np.asarray(self.d_hamiltonian, dtype=complex)
        if dh.shape != h.shape:
            raise ValidationError("Hamiltonian derivative has the wrong shape")
        try:
            jumps = as_operator_stack(self.jumps, dim) if np.size(self.jumps) else np.zeros((0, dim, dim), complex)
            d_jumps = (
                as_operator_stack(self.d_jumps, dim) if np.size(self.d_jumps) else np.zeros((0, dim, dim), complex)
            )
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        if jumps.shape != d_jumps.shape:
            raise ValidationError("jump operators and their derivatives must have matching shapes")
        for name, arr in (("H", h), ("dH", dh), ("L", jumps), ("dL", d_jumps)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite entries")
        scale = max(1.0, float(np.max(np.abs(h))), float(np.max(np.abs(dh))))
        if np.max(np.abs(h - dag(h))) > 1e-10 * scale:
            raise ValidationError("Hamiltonian is not Hermitian")
        if np.max(np.abs(dh - dag(dh))) > 1e-10 * scale:
            raise ValidationError("Hamiltonian derivative is not Hermitian")
        object.__setattr__(self, "hamiltonian", hermitize(h))
        object.__setattr__(self, "d_hamiltonian", hermitize(dh))
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "d_jumps", d_jumps)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def n_jumps(self) -> int:
        return self.jumps.shape[0]

    def shifted(self, delta: float) -> LindbladModel:
        """The same family evaluated at ``theta + delta``."""
        return LindbladModel(
            self.hamiltonian + delta * self.d_hamiltonian,
            self.jumps + delta * self.d_jumps,
            self.d_hamiltonian,
            self.d_jumps,
            self.label,
            self.meta,
        )


def _generator(h_ket, h_bra, jumps_ket, jumps_bra) -> CArray:
    dim = h_ket.shape[0]
    eye = np.eye(dim)
    gen = -1j * np.kron(h_ket, eye) + 1j * np.kron(eye, h_bra.T)
    for lk, lb in zip(jumps_ket, jumps_bra):
        gen += np.kron(lk, lb.conj())
        gen -= 0.5 * np.kron(dag(lk) @ lk, eye)
        gen -= 0.5 * np.kron(eye, (dag(lb) @ lb).T)
    return gen


def liouvillian(model: LindbladModel) -> CArray:
    """Matrix of the Lindblad generator acting on row-major vectorized operators."""
    return _generator(model.hamiltonian, model.hamiltonian, model.jumps, model.jumps)


def tilted_liouvillian(model: LindbladModel, theta_ket: float, theta_bra: float) -> CArray:
    """Generator with the parameter set independently on the ket and bra sides.

    Both shifts are measured from the model's working point.  At equal shifts
    this is the ordinary Liouvillian of the shifted model.
    """
    ket = model.shifted(theta_ket)
    bra = model.shifted(theta_bra)
    return _generator(ket.hamiltonian, bra.hamiltonian, ket.jumps, bra.jumps)


def d_liouvillian(model: LindbladModel) -> CArray:
    """Derivative of the Liouvillian with respect to the parameter."""
    dim = model.dim
    eye = np.eye(dim)
    dh = model.d_hamiltonian
    out = -1j * (np.kron(dh, eye) - np.kron(eye, dh.T))
    for l, dl in zip(model.jumps, model.d_jumps):
        out += np.kron(dl, l.conj()) + np.kron(l, dl.conj())
        dll = dag(dl) @ l + dag(l) @ dl
        out -= 0.5 * (np.kron(dll, eye) + np.kron(eye, dll.T))
    return out


def steady_state(model: LindbladModel, tol: float = 1e-9) -> CArray:
    """Unique stationary state of the generator.

    Raises ``NonUniqueSteadyState`` when the kernel is more than one dimensional.
    """
    gen = liouvillian(model)
    u, s, vh = np.linalg.svd(gen)
    scale = max(1.0, float(s[0]))
    null = np.sum(s <= tol * scale)
    if null > 1:
        raise NonUniqueSteadyState(f"Liouvillian kernel has dimension {null}")
    rho = unvec(vh[-1].conj(), model.dim)
    rho = hermitize(rho / np.trace(rho))
    return rho


def liouvillian_spectrum(model: LindbladModel) -> CArray:
    """Eigenvalues of the Liouvillian sorted by decreasing real part."""
    w = scipy.linalg.eigvals(liouvillian(model))
    return w[np.argsort(-w.real, kind="stable")]


def liouvillian_gap(model: LindbladModel, tol: float = 1e-9) -> float:
    """Smallest decay rate among the non-stationary modes."""
    w = liouvillian_spectrum(model)
    scale = max(1.0, float(np.max(np.abs(w))))
    decaying = w[np.abs(w) > tol * scale]
    return float(-np.max(decaying.real))


def evolve(model: LindbladModel, rho: np.ndarray, t: float) -> CArray:
    """Exact propagation of a density matrix for time ``t``."""
    out = scipy.linalg.expm(liouvillian(model) * t) @ vec(rho)
    return unvec(out, model.dim)


@dataclass(frozen=True)
class StencilEstimate:
    value: float
    error: float


def _mixed_second_derivative(f, step: float) -> StencilEstimate:
    """4-point mixed derivative d^2 f / da db at 0 with one Richardson step-halving."""

    def stencil(h):
        return (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h)

    coarse, fine = stencil(step), stencil(step / 2)
    return StencilEstimate((4.0 * fine - coarse) / 3.0, abs(fine - coarse) / 3.0)


def molmer_qfi(model: LindbladModel, rho0: np.ndarray, t: float, d_theta: float = 1e-3) -> StencilEstimate:
    """Continuous-time QFI of system plus emitted field from the tilted generator.

    F(t) = 4 d^2/dtheta1 dtheta2 log|Tr exp(L_{theta1,theta2} t) rho0| at the
    working point, for a purification of ``rho0``.
    """
    v0 = vec(rho0)
    eye = vec(np.eye(model.dim))

    def f(a, b):
        out = scipy.linalg.expm(tilted_liouvillian(model, a, b) * t) @ v0
        return float(np.log(abs(np.vdot(eye, out))))

    est = _mixed_second_derivative(f, d_theta)
    return StencilEstimate(4.0 * est.value, 4.0 * est.error)


def molmer_rate(model: LindbladModel, d_theta: float = 1e-3) -> StencilEstimate:
    """Long-time QFI growth rate, 4 d^2 Re lambda_0 / dtheta1 dtheta2.

    ``lambda_0`` is the eigenvalue of the tilted generator that continues the
    stationary zero eigenvalue.
    """

    def f(a, b):
        w = scipy.linalg.eigvals(tilted_liouvillian(model, a, b))
        return float(w[np.argmin(np.abs(w))].real)

    est = _mixed_second_derivative(f, d_theta)
    return StencilEstimate(4.0 * est.value, 4.0 * est.error)
