"""Kraus channels, their transfer matrices and spectral data.

One emission step is an isometry ``V = sum_m K_m (x) |m>`` from the system
to system plus one photon.  ``KrausChannel`` holds the Kraus operators at
the working point together with their parameter derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg

from emitqfi._linalg import (
    CArray,
    as_operator_stack,
    dag,
    hermitize,
    inv_sqrt_and_derivative,
    sandwich,
    superop,
    unvec,
)
from emitqfi.errors import (
    DefectivePeripheralBlock,
    NonUniqueSteadyState,
    NumericalError,
    PsdBasisFailure,
    ValidationError,
)
from emitqfi.lindblad import LindbladModel


@dataclass(frozen=True)
class KrausChannel:
    """Kraus operators ``K_m`` and derivatives ``dK_m``, each of shape (d, D, D)."""

    kraus: CArray
    d_kraus: CArray
    dt: float | None = None
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        try:
            k = as_operator_stack(self.kraus)
            dk = as_operator_stack(self.d_kraus)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        if k.shape != dk.shape:
            raise ValidationError(f"Kraus shape {k.shape} and derivative shape {dk.shape} differ")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(dk))):
            raise ValidationError("Kraus operators contain non-finite entries")
        if self.dt is not None and not self.dt > 0:
            raise ValidationError("dt must be positive")
        object.__setattr__(self, "kraus", k)
        object.__setattr__(self, "d_kraus", dk)

    @property
    def dim(self) -> int:
        return self.kraus.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.kraus.shape[0]

    def isometry_defect(self) -> float:
        """Frobenius norm of sum_m K_m^dagger K_m - 1."""
        s = np.einsum("mji,mjk->ik", self.kraus.conj(), self.kraus)
        return float(np.linalg.norm(s - np.eye(self.dim)))

    def apply(self, rho: np.ndarray) -> CArray:
        return sandwich(self.kraus, rho, self.kraus)

    def apply_adjoint(self, x: np.ndarray) -> CArray:
        k = self.kraus
        return np.matmul(np.matmul(dag(k), x), k).sum(axis=0)

    def rotated(self, unitary: np.ndarray) -> KrausChannel:
        """Change the photon basis: K'_m = sum_n U_mn K_n."""
        u = np.asarray(unitary, dtype=complex)
        k = np.einsum("mn,nij->mij", u, self.kraus)
        dk = np.einsum("mn,nij->mij", u, self.d_kraus)
        return KrausChannel(k, dk, self.dt, self.label, self.meta)


def discretize(
    model: LindbladModel,
    dt: float,
    mode: Literal["first_order", "exact_isometry"] = "exact_isometry",
    isometry_tol: float = 1e-3,
    norm_limit: float = 0.1,
) -> KrausChannel:
    """Kraus operators of one time step of the photocounting unravelling.

    ``first_order`` keeps ``K_0 = 1 - i H dt - 1/2 sum L^dagger L dt`` and
    ``K_m = sqrt(dt) L_m``; its isometry defect is O(dt^2).  ``exact_isometry``
    right-multiplies by ``S^{-1/2}`` with ``S = sum K^dagger K`` and
    differentiates through that correction.
    """
    if not np.isfinite(dt) or dt <= 0:
        raise ValidationError("dt must be positive")
    if mode not in ("first_order", "exact_isometry"):
        raise ValidationError(f"unknown discretization mode {mode!r}")
    dim = model.dim
    h, dh = model.hamiltonian, model.d_hamiltonian
    ls, dls = model.jumps, model.d_jumps
    gen_norm = np.linalg.norm(h, 2) + sum(np.linalg.norm(dag(l) @ l, 2) for l in ls)
    if gen_norm * dt > norm_limit:
        raise ValidationError(
            f"dt*||generator|| = {gen_norm * dt:.3g} exceeds {norm_limit}; reduce dt"
        )
    eye = np.eye(dim)
    ltl = sum((dag(l) @ l for l in ls), np.zeros((dim, dim), complex))
    d_ltl = sum((dag(dl) @ l + dag(l) @ dl for l, dl in zip(ls, dls)), np.zeros((dim, dim), complex))
    k0 = eye - 1j * h * dt - 0.5 * ltl * dt
    dk0 = -1j * dh * dt - 0.5 * d_ltl * dt
    kraus = np.concatenate([k0[None], np.sqrt(dt) * ls])
    d_kraus = np.concatenate([dk0[None], np.sqrt(dt) * dls])
    if mode == "exact_isometry":
        s = np.einsum("mji,mjk->ik", kraus.conj(), kraus)
        ds = np.einsum("mji,mjk->ik", d_kraus.conj(), kraus)
        ds = ds + dag(ds)
        r, dr = inv_sqrt_and_derivative(s, ds)
        d_kraus = d_kraus @ r + kraus @ dr
        kraus = kraus @ r
    ch = KrausChannel(kraus, d_kraus, dt, model.label, {"mode": mode, **model.meta})
    if mode == "first_order" and ch.isometry_defect() > isometry_tol:
        raise ValidationError(f"isometry defect {ch.isometry_defect():.3g} above {isometry_tol}")
    return ch


def transfer_matrix(channel: KrausChannel) -> CArray:
    """sum_m K_m (x) conj(K_m) in row-major vec form."""
    return superop(channel.kraus, channel.kraus)


def random_isometry(dim: int, n_outcomes: int, rng: np.random.Generator) -> CArray:
    """Haar-random isometry returned as a stack of Kraus operators."""
    z = rng.standard_normal((n_outcomes * dim, dim)) + 1j * rng.standard_normal((n_outcomes * dim, dim))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return q.reshape(n_outcomes, dim, dim)


def random_channel(dim: int, n_outcomes: int, seed: int | np.random.Generator | None = None) -> KrausChannel:
    """Haar-random isometry with a random tangent direction.

    The derivative is ``-i G V`` for a Gaussian Hermitian ``G`` on the joint
    output space, so the family stays isometric.
    """
    rng = np.random.default_rng(seed)
    v = random_isometry(dim, n_outcomes, rng).reshape(n_outcomes * dim, dim)
    n = n_outcomes * dim
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    g = hermitize(g) / np.sqrt(n)
    dv = -1j * g @ v
    return KrausChannel(
        v.reshape(n_outcomes, dim, dim), dv.reshape(n_outcomes, dim, dim), label=f"random D={dim} d={n_outcomes}"
    )


@dataclass(frozen=True)
class TransferSpectrum:
    """Biorthogonal eigen-decomposition of a transfer matrix.

    ``right[i]`` and ``left[i]`` are D x D operators with
    ``Tr(left[i]^dagger right[j]) = delta_ij`` and
    ``T = sum_i eigenvalues[i] |right[i]>> <<left[i]|``.
    Modes are ordered with the peripheral ones first: the fixed modes
    (phase zero), then the remaining peripheral modes, then the decaying
    modes by decreasing modulus.  The fixed modes use a positive basis: each
    left operator is positive semidefinite, they sum to the identity, and the
    matching right operators have unit trace.
    """

    eigenvalues: CArray
    right: CArray
    left: CArray
    n_fixed: int
    n_peripheral: int

    @property
    def dim(self) -> int:
        return self.right.shape[1]

    @property
    def phases(self) -> np.ndarray:
        return np.angle(self.eigenvalues[: self.n_peripheral])

    @property
    def fixed_right(self) -> CArray:
        return self.right[: self.n_fixed]

    @property
    def fixed_left(self) -> CArray:
        return self.left[: self.n_fixed]

    @property
    def decaying(self) -> slice:
        return slice(self.n_peripheral, len(self.eigenvalues))

    @property
    def subleading(self) -> complex:
        """Largest-modulus non-peripheral eigenvalue (0 if none)."""
        if self.n_peripheral == len(self.eigenvalues):
            return 0.0
        return complex(self.eigenvalues[self.n_peripheral])

    @property
    def gap(self) -> float:
        return 1.0 - abs(self.subleading)

    @property
    def correlation_time(self) -> float:
        """-1 / ln|lambda_2| in steps."""
        lam = abs(self.subleading)
        if lam == 0:
            return 0.0
        return -1.0 / np.log(lam)

    def steady_state(self) -> CArray:
        if self.n_fixed != 1 or self.n_peripheral != 1:
            raise NonUniqueSteadyState(
                f"{self.n_fixed} fixed and {self.n_peripheral} peripheral modes; a unique fixed point is required"
            )
        return self.right[0]

    def reconstruct(self) -> CArray:
        vr = self.right.reshape(len(self.eigenvalues), -1).T
        vl = self.left.reshape(len(self.eigenvalues), -1).T
        return (vr * self.eigenvalues) @ vl.conj().T


def _cluster(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group indices of numerically coincident eigenvalues."""
    order = np.argsort(-np.abs(values), kind="stable")
    groups: list[list[int]] = []
    for i in order:
        for g in groups:
            if abs(values[i] - values[g[0]]) <= tol * max(1.0, abs(values[g[0]])):
                g.append(i)
                break
        else:
            groups.append([i])
    return [np.array(g) for g in groups]


def _biorthogonalize(vl: np.ndarray, vr: np.ndarray, cond_limit: float) -> tuple[np.ndarray, np.ndarray, float]:
    gram = vl.conj().T @ vr
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > cond_limit:
        return vl, vr, cond
    return vl, vr @ np.linalg.inv(gram), cond


def _hermitian_basis(ops: np.ndarray, tol: float) -> np.ndarray:
    """Real basis of Hermitian operators spanning the same complex space."""
    cands = np.concatenate([hermitize(ops), hermitize(-1j * ops)])
    flat = np.concatenate([cands.real.reshape(len(cands), -1), cands.imag.reshape(len(cands), -1)], axis=1)
    u, s, vh = np.linalg.svd(flat, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    if rank != ops.shape[0]:
        raise PsdBasisFailure(f"fixed eigenspace is not closed under adjoint (rank {rank} vs {ops.shape[0]})")
    half = flat.shape[1] // 2
    dim = ops.shape[1]
    basis = vh[:rank, :half] + 1j * vh[:rank, half:]
    return hermitize(basis.reshape(rank, dim, dim))


def _positive_fixed_basis(left: np.ndarray, right: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Positive left basis and matching unit-trace right basis of the fixed space."""
    n, dim = left.shape[0], left.shape[1]
    herm_left = _hermitian_basis(left, tol)
    herm_right = _hermitian_basis(right, tol)
    # Support of all stationary states.
    stacked = np.concatenate(list(herm_right), axis=1)
    u, s, _ = np.linalg.svd(stacked)
    support = u[:, s > tol * max(1.0, s[0])]
    restricted = np.einsum("ai,kij,jb->kab", support.conj().T, herm_left, support)
    weights = np.cos(1.0 + 0.731 * np.arange(n)) + 0.17 * np.arange(n)
    generic = hermitize(np.tensordot(weights, restricted, axes=1))
    w, v = np.linalg.eigh(generic)
    candidates = []
    for idx in _cluster(w, 1e-7):
        proj = v[:, idx] @ v[:, idx].conj().T
        coeffs, *_ = np.linalg.lstsq(restricted.reshape(n, -1).T, proj.reshape(-1), rcond=None)
        if np.linalg.norm(restricted.reshape(n, -1).T @ coeffs - proj.reshape(-1)) > 1e-6:
            continue
        j = hermitize(np.tensordot(coeffs.real, herm_left, axes=1))
        if np.linalg.eigvalsh(j)[0] >= -1e-8:
            candidates.append(j)
    if len(candidates) < n:
        # Non-commutative fixed algebra: complete with shifted elements.
        pool = [np.eye(dim, dtype=complex)] + [b - np.linalg.eigvalsh(b)[0] * np.eye(dim) for b in herm_left]
        for cand in pool:
            trial = candidates + [cand]
            mat = np.array([c.reshape(-1) for c in trial])
            if np.linalg.matrix_rank(mat, tol=1e-8) == len(trial):
                candidates.append(cand)
            if len(candidates) == n:
                break
    if len(candidates) != n:
        raise PsdBasisFailure(f"found {len(candidates)} positive fixed operators, need {n}")
    jl = np.array(candidates)
    # Right operators biorthogonal to the chosen left ones.
    gram = np.einsum("kij,lij->kl", jl.conj(), herm_right)
    if np.linalg.cond(gram) > 1e10:
        raise PsdBasisFailure("positive left basis is degenerate against the fixed right space")
    psi = np.tensordot(np.linalg.inv(gram).T, herm_right, axes=1)
    psi = hermitize(psi)
    traces = np.einsum("kii->k", psi).real
    if np.any(np.abs(traces) < 1e-12):
        raise PsdBasisFailure("a fixed right operator is traceless")
    psi = psi / traces[:, None, None]
    jl = jl * traces[:, None, None]
    if np.any(np.linalg.eigvalsh(jl)[:, 0] < -1e-8):
        raise PsdBasisFailure("rescaled left basis lost positivity")
    return jl, psi


def spectral_decompose(
    channel: KrausChannel | np.ndarray,
    peripheral_tol: float = 1e-9,
    cluster_tol: float = 1e-10,
    cond_limit: float = 1e8,
) -> TransferSpectrum:
    """Two-sided eigen-decomposition of the transfer matrix with a positive fixed basis."""
    if isinstance(channel, KrausChannel):
        defect = channel.isometry_defect()
        if defect > 1e-9:
            raise ValidationError(
                f"channel is not trace preserving (defect {defect:.3g}); discretize with exact_isometry"
            )
        t = transfer_matrix(channel)
    else:
        t = np.asarray(channel, dtype=complex)
    n = t.shape[0]
    dim = int(round(np.sqrt(n)))
    if dim * dim != n:
        raise ValidationError("transfer matrix size is not a perfect square")
    w, vl, vr = scipy.linalg.eig(t, left=True, right=True)
    groups = _cluster(w, cluster_tol)
    fixed, peripheral, decaying = [], [], []
    for g in groups:
        lam = w[g].mean()
        if abs(abs(lam) - 1.0) <= peripheral_tol:
            (fixed if abs(lam - 1.0) <= peripheral_tol else peripheral).append(g)
        else:
            decaying.append(g)
    if len(fixed) != 1:
        raise NumericalError(f"expected one fixed eigenvalue cluster, found {len(fixed)}")
    peripheral.sort(key=lambda g: float(np.angle(w[g].mean())))
    values, rights, lefts = [], [], []
    done: dict[int, tuple] = {}
    for kind, g in [("fixed", fixed[0])] + [("peripheral", g) for g in peripheral] + [("decaying", g) for g in decaying]:
        lam = w[g].mean()
        l_vec, r_vec, cond = _biorthogonalize(vl[:, g], vr[:, g], cond_limit)
        if cond > cond_limit:
            if kind != "decaying":
                raise DefectivePeripheralBlock(f"peripheral eigenvalue {lam:.6g} has a defective block (cond {cond:.3g})")
            raise NumericalError(f"decaying eigenvalue {lam:.6g} has a defective block (cond {cond:.3g})")
        l_ops = l_vec.T.reshape(len(g), dim, dim)
        r_ops = r_vec.T.reshape(len(g), dim, dim)
        if kind == "fixed":
            l_ops, r_ops = _positive_fixed_basis(l_ops, r_ops, 1e-7)
            lam_vals = np.ones(len(g), dtype=complex)
        else:
            lam_vals = w[g]
            if kind == "peripheral":
                partner = next((k for k, v in done.items() if abs(v[0] - np.conj(lam)) <= cluster_tol), None)
                if partner is not None and len(done[partner][1]) == len(g):
                    # Conjugate pairs share adjoint bases.
                    r_ops = dag(done[partner][1])
                    l_ops = dag(done[partner][2])
                    lam_vals = np.conj(done[partner][3])
                done[len(done)] = (lam, r_ops, l_ops, lam_vals)
        values.extend(lam_vals)
        rights.extend(r_ops)
        lefts.extend(l_ops)
    n_fixed = len(fixed[0])
    n_peripheral = n_fixed + sum(len(g) for g in peripheral)
    return TransferSpectrum(np.array(values), np.array(rights), np.array(lefts), n_fixed, n_peripheral)


def fixed_point(channel: KrausChannel, tol: float = 1e-10) -> CArray:
    """Unique fixed point of the channel from the null space of T - 1."""
    t = transfer_matrix(channel) - np.eye(channel.dim**2)
    _, s, vh = np.linalg.svd(t)
    if np.sum(s <= tol * max(1.0, s[0])) > 1:
        raise NonUniqueSteadyState("channel has more than one fixed point")
    rho = unvec(vh[-1].conj(), channel.dim)
    return hermitize(rho / np.trace(rho))
