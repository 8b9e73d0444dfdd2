"""Small linear-algebra helpers shared across modules.

Vectorization is row-major (numpy C order), so that
``vec(A @ X @ B) == kron(A, B.T) @ vec(X)``.  With this convention the
transfer matrix of a channel with Kraus operators ``K_m`` is
``sum_m kron(K_m, K_m.conj())``.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

CArray = NDArray[np.complex128]


def vec(x: np.ndarray) -> CArray:
    return np.ascontiguousarray(x, dtype=complex).reshape(-1)


def unvec(v: np.ndarray, dim: int | None = None) -> CArray:
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    return np.asarray(v, dtype=complex).reshape(dim, dim)


def dag(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


def hermitize(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + dag(x))


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product Tr(a^dagger b)."""
    return complex(np.vdot(a, b))


def sandwich(left: np.ndarray, x: np.ndarray, right: np.ndarray) -> CArray:
    """sum_m left_m @ x @ right_m^dagger for stacks of operators."""
    return np.matmul(np.matmul(left, x), dag(right)).sum(axis=0)


def sandwich_adjoint(left: np.ndarray, x: np.ndarray, right: np.ndarray) -> CArray:
    """Adjoint of ``sandwich``: sum_m left_m^dagger @ x @ right_m."""
    return np.matmul(np.matmul(dag(left), x), right).sum(axis=0)


def superop(left: np.ndarray, right: np.ndarray) -> CArray:
    """Matrix of X -> sum_m left_m X right_m^dagger in row-major vec form."""
    return sum(np.kron(a, b.conj()) for a, b in zip(left, right))


def purify(rho: np.ndarray, tol: float = 1e-14) -> CArray:
    """Return a D x r matrix psi with psi @ psi^dagger = rho."""
    w, v = np.linalg.eigh(hermitize(rho))
    keep = w > tol * max(1.0, float(np.max(np.abs(w))))
    return v[:, keep] * np.sqrt(w[keep])


def inv_sqrt_and_derivative(s: np.ndarray, ds: np.ndarray) -> tuple[CArray, CArray]:
    """S^{-1/2} and its directional derivative along dS for Hermitian positive S.

    Uses the divided-difference (Daleckii-Krein) formula in the eigenbasis of S.
    """
    w, u = np.linalg.eigh(hermitize(s))
    if np.min(w) <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    f = w ** -0.5
    wi, wj = np.meshgrid(w, w, indexing="ij")
    fi, fj = np.meshgrid(f, f, indexing="ij")
    close = np.isclose(wi, wj, rtol=1e-12, atol=0.0)
    diff = np.where(close, 1.0, wi - wj)
    divided = np.where(close, -0.5 * wi ** -1.5, (fi - fj) / diff)
    inv_sqrt = (u * f) @ dag(u)
    d_inv_sqrt = u @ ((dag(u) @ ds @ u) * divided) @ dag(u)
    return inv_sqrt, d_inv_sqrt


def as_operator_stack(ops, dim: int | None = None) -> CArray:
    arr = np.asarray(ops, dtype=complex)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"expected a stack of square matrices, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"expected {dim}x{dim} operators, got {arr.shape[1:]}")
    return arr
