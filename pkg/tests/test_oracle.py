import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emitqfi.channel import KrausChannel
from emitqfi.errors import ValidationError
from emitqfi.haar import haar_random_channel, haar_state
from emitqfi.oracle import (
    full_state,
    joint_cfi,
    mixed_state_qfi,
    photocount_cfi,
    pure_qfi,
    pure_qfi_brute,
    radiation_qfi_brute,
    radiation_state,
)


def _shifted(ch: KrausChannel, g: np.ndarray, eps: float) -> KrausChannel:
    """Exact family K(eps) = K exp(-i eps g) for channels built with dK = -i K g."""
    w, v = np.linalg.eigh(g)
    u = (v * np.exp(-1j * eps * w)) @ v.conj().T
    return KrausChannel(ch.kraus @ u, ch.d_kraus @ u)


def test_pure_qfi_matches_fidelity_finite_difference():
    seed = 3
    ch = haar_random_channel(2, 2, seed)
    # recover the generator from dK = -i K g
    g = 1j * np.einsum("mji,mjk->ik", ch.kraus.conj(), ch.d_kraus)
    psi = haar_state(2, np.random.default_rng(seed))
    steps, eps = 4, 1e-4
    a = full_state(ch, psi, steps).amp.reshape(-1)
    b = full_state(_shifted(ch, g, eps), psi, steps).amp.reshape(-1)
    fd = 8 * (1 - abs(np.vdot(a, b))) / eps**2
    assert fd == pytest.approx(pure_qfi_brute(ch, psi, steps), rel=1e-5)


def test_joint_state_is_normalized_and_indexed_by_records():
    ch = haar_random_channel(3, 2, 1)
    state = full_state(ch, haar_state(3, np.random.default_rng(1)), 5)
    assert state.amp.shape == (3, 1, 2**5)
    assert np.linalg.norm(state.amp) == pytest.approx(1.0)
    # the overlap derivative is imaginary for a normalized family
    assert abs(np.vdot(state.amp, state.d_amp).real) < 1e-12


def test_mixed_state_qfi_reduces_to_pure_formula():
    ch = haar_random_channel(2, 2, 2)
    state = full_state(ch, np.array([1.0, 0.0]), 3)
    a, da = state.flat()
    v, dv = a.reshape(-1), da.reshape(-1)
    rho = np.outer(v, v.conj())
    drho = np.outer(dv, v.conj()) + np.outer(v, dv.conj())
    assert mixed_state_qfi(rho, drho) == pytest.approx(pure_qfi(state), rel=1e-9)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), steps=st.integers(1, 5))
def test_information_hierarchy(seed, steps):
    rng = np.random.default_rng(seed)
    ch = haar_random_channel(2, 2, seed)
    psi = haar_state(2, rng)
    cfi = photocount_cfi(ch, psi, steps)
    rad = radiation_qfi_brute(ch, psi, steps)
    full = pure_qfi_brute(ch, psi, steps)
    assert cfi <= rad + 1e-8
    assert rad <= full + 1e-8
    assert joint_cfi(ch, psi, steps) <= full + 1e-8


def test_radiation_state_is_a_density_matrix():
    ch = haar_random_channel(2, 3, 4)
    rho, drho = radiation_state(full_state(ch, np.array([0.6, 0.8]), 3))
    assert rho.shape == (27, 27)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert abs(np.trace(drho)) < 1e-12


def test_guards():
    ch = haar_random_channel(2, 2, 5)
    with pytest.raises(ValidationError):
        radiation_qfi_brute(ch, np.array([1.0, 0.0]), 13)
    with pytest.raises(ValidationError):
        full_state(ch, np.array([1.0, 1.0]), 2)
    with pytest.raises(ValidationError):
        joint_cfi(ch, np.eye(2) / np.sqrt(2), 2)
