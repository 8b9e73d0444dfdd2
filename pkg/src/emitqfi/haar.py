"""QFI averaged over Haar-random pure initial system states.

For a pure start ``psi`` the joint QFI is
``4 (<psi|N|psi> - |<psi|M|psi>|^2)`` with system operators ``N`` (norm of
the derivative) and ``M`` (overlap with the derivative), both obtained by
Heisenberg-picture recursions.  Haar moments then give the average in
closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from emitqfi._linalg import CArray, dag, hermitize
from emitqfi.channel import KrausChannel, random_isometry
from emitqfi.errors import NonUniqueSteadyState, ValidationError
from emitqfi.oracle import pure_qfi_brute
from emitqfi.qfi import qfi_curve


@dataclass(frozen=True)
class HaarReport:
    """Exact Haar average and its pieces.

    ``alpha_tilde = Tr`` of the summed one-step derivative norms started from the
    identity, ``gamma_tilde = Tr M`` and ``delta_tilde = Tr(M M^dagger)``.
    ``bulk`` is the QFI from the stationary state (None when the fixed point is
    not unique) and ``boundary = exact - bulk``.
    """

    steps: int
    exact: float
    bulk: float | None
    alpha_tilde: float
    gamma_tilde: complex
    delta_tilde: float
    trace_n: float

    @property
    def boundary(self) -> float | None:
        return None if self.bulk is None else self.exact - self.bulk


def heisenberg_operators(channel: KrausChannel, steps: int) -> tuple[CArray, CArray, float]:
    """Operators ``N``, ``M`` with ``<dPsi|dPsi> = <psi|N|psi>``, ``<Psi|dPsi> = <psi|M|psi>``.

    Also returns ``alpha_tilde``, the trace of the diagonal (single-step) part of ``N``.
    """
    if steps < 1:
        raise ValidationError("steps must be at least 1")
    k, dk = channel.kraus, channel.d_kraus
    dim = channel.dim
    p = np.einsum("mji,mjk->ik", dk.conj(), dk)  # sum dK^dag dK
    q = np.einsum("mji,mjk->ik", k.conj(), dk)  # sum K^dag dK

    def heis(x):
        return channel.apply_adjoint(x)

    def mixed(x):  # X -> sum dK^dag X K
        return np.matmul(np.matmul(dag(dk), x), k).sum(axis=0)

    # c[r] = sum_{n<r} mixed(heis^n(q)) for r remaining later steps
    c = [np.zeros((dim, dim), complex)]
    q_n = q
    for _ in range(steps - 1):
        c.append(c[-1] + mixed(q_n))
        q_n = heis(q_n)
    # Horner over the step where the earliest insertion happens
    n_op = np.zeros((dim, dim), complex)
    m_op = np.zeros((dim, dim), complex)
    diag = np.zeros((dim, dim), complex)
    for r in range(steps):
        w = p + c[r] + dag(c[r])
        n_op = w + heis(n_op) if r else w
        m_op = q + heis(m_op) if r else q
        diag = p + heis(diag) if r else p
    return hermitize(n_op), m_op, float(np.trace(diag).real)


def haar_average_exact(channel: KrausChannel, steps: int, with_bulk: bool = True) -> HaarReport:
    """Exact Haar average of the joint QFI after ``steps`` emissions.

    Uses E<psi|X|psi> = Tr X / D and
    E|<psi|M|psi>|^2 = (|Tr M|^2 + Tr M M^dagger) / (D (D + 1)).
    """
    dim = channel.dim
    n_op, m_op, alpha_tilde = heisenberg_operators(channel, steps)
    tr_n = float(np.trace(n_op).real)
    tr_m = complex(np.trace(m_op))
    mm = float(np.trace(m_op @ dag(m_op)).real)
    exact = 4.0 * (tr_n / dim - (abs(tr_m) ** 2 + mm) / (dim * (dim + 1)))
    bulk = None
    if with_bulk:
        try:
            bulk = float(qfi_curve(channel, steps)[-1])
        except NonUniqueSteadyState:
            bulk = None
    return HaarReport(steps, exact, bulk, alpha_tilde, tr_m, mm, tr_n)


def haar_state(dim: int, rng: np.random.Generator) -> CArray:
    """Haar-random pure state from a normalized complex Gaussian vector."""
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


def sample_rngs(seed: int, n_samples: int) -> list[np.random.Generator]:
    """Independent per-sample generators, reproducible for any sample subset."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_samples)]


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    n_samples: int


def haar_monte_carlo(channel: KrausChannel, steps: int, n_samples: int, seed: int = 0) -> MonteCarloEstimate:
    """Sample mean of the brute-force joint QFI over Haar-random pure starts."""
    if n_samples < 2:
        raise ValidationError("need at least two samples")
    values = np.array([pure_qfi_brute(channel, haar_state(channel.dim, rng), steps) for rng in sample_rngs(seed, n_samples)])
    return MonteCarloEstimate(float(values.mean()), float(values.std(ddof=1) / np.sqrt(n_samples)), n_samples)


def haar_random_channel(dim: int, n_outcomes: int, seed: int) -> KrausChannel:
    """Random isometry whose derivative comes from a Hermitian generator on the system input."""
    rng = np.random.default_rng(seed)
    k = random_isometry(dim, n_outcomes, rng)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    g = hermitize(g)
    return KrausChannel(k, -1j * k @ g, label="random")
