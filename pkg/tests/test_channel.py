import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from emitqfi.channel import (
    KrausChannel,
    discretize,
    fixed_point,
    random_channel,
    spectral_decompose,
    transfer_matrix,
)
from emitqfi.errors import NonUniqueSteadyState, ValidationError
from emitqfi.lindblad import liouvillian
from emitqfi.models import dephasing_sensor, ghz_emitter, random_lindblad, spin_monitor
from emitqfi.qfi import exact_qfi_curve


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 3), d_out=st.integers(2, 3))
def test_random_channel_is_isometric_with_antihermitian_overlap(seed, dim, d_out):
    ch = random_channel(dim, d_out, seed)
    assert ch.isometry_defect() < 1e-12
    # d/dtheta (sum K^dag K) = 0 for an isometric family
    s = np.einsum("mji,mjk->ik", ch.kraus.conj(), ch.d_kraus)
    assert np.allclose(s + s.conj().T, 0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 3), d_out=st.integers(2, 3))
def test_spectrum_is_biorthogonal_and_reconstructs(seed, dim, d_out):
    ch = random_channel(dim, d_out, seed)
    sp = spectral_decompose(ch)
    gram = np.einsum("aij,bij->ab", sp.left.conj(), sp.right)
    assert np.allclose(gram, np.eye(dim * dim), atol=1e-8)
    assert np.allclose(sp.reconstruct(), transfer_matrix(ch), atol=1e-9)
    assert sp.n_fixed == sp.n_peripheral == 1
    assert np.allclose(sp.steady_state(), fixed_point(ch), atol=1e-10)
    assert np.allclose(sp.fixed_left[0], np.eye(dim), atol=1e-9)


def test_decaying_modes_are_sorted_inside_unit_disk():
    sp = spectral_decompose(random_channel(3, 2, 11))
    mags = np.abs(sp.eigenvalues[sp.decaying])
    assert np.all(mags < 1)
    assert np.all(np.diff(mags) <= 1e-12)
    assert sp.correlation_time == pytest.approx(-1 / np.log(mags[0]))


def test_degenerate_fixed_space_has_positive_partition_of_unity():
    ch = discretize(spin_monitor(2, 1.0, 1.0), 1e-2)
    sp = spectral_decompose(ch)
    assert sp.n_fixed == 4
    js, psis = sp.fixed_left, sp.fixed_right
    assert np.allclose(js.sum(axis=0), np.eye(4), atol=1e-9)
    assert min(np.linalg.eigvalsh(j).min() for j in js) > -1e-9
    assert np.allclose(np.einsum("kii->k", psis), 1.0)
    for j, psi in zip(js, psis):
        assert np.allclose(ch.apply_adjoint(j), j, atol=1e-9)
        assert np.allclose(ch.apply(psi), psi, atol=1e-9)
    with pytest.raises(NonUniqueSteadyState):
        sp.steady_state()


def test_dephasing_sensor_peripheral_structure():
    sp = spectral_decompose(discretize(dephasing_sensor(1.0), 1e-3))
    assert sp.n_fixed == 2
    js = sp.fixed_left
    # the fixed left operators are the two Z projectors
    diag = sorted(tuple(np.round(np.diag(j).real, 9)) for j in js)
    assert diag == [(0.0, 1.0), (1.0, 0.0)]


def test_ghz_emitter_has_two_fixed_modes():
    sp = spectral_decompose(ghz_emitter(0.5))
    assert sp.n_fixed == 2
    with pytest.raises(NonUniqueSteadyState):
        fixed_point(ghz_emitter(0.5))


def test_discretization_modes():
    model = random_lindblad(3, 2, seed=1)
    exact = discretize(model, 1e-3)
    first = discretize(model, 1e-3, "first_order")
    assert exact.isometry_defect() < 1e-13
    assert 0 < first.isometry_defect() < 1e-5
    assert np.allclose(exact.kraus, first.kraus, atol=1e-5)


@pytest.mark.parametrize("mode", ["first_order", "exact_isometry"])
def test_discretized_derivative_matches_finite_difference(mode):
    model = random_lindblad(2, 2, seed=2)
    dt, eps = 1e-2, 1e-6
    ch = discretize(model, dt, mode)
    fd = (discretize(model.shifted(eps), dt, mode).kraus - discretize(model.shifted(-eps), dt, mode).kraus) / (2 * eps)
    assert np.allclose(fd, ch.d_kraus, atol=1e-9)


def test_discretize_rejects_large_steps_and_bad_modes():
    model = random_lindblad(2, 1, seed=3)
    with pytest.raises(ValidationError):
        discretize(model, 10.0)
    with pytest.raises(ValidationError):
        discretize(model, 1e-3, "euler")
    with pytest.raises(ValidationError):
        discretize(model, -1e-3)


def test_spectral_decompose_rejects_non_trace_preserving_channel():
    ch = discretize(random_lindblad(2, 1, seed=4), 1e-2, "first_order")
    with pytest.raises(ValidationError):
        spectral_decompose(ch)


def test_kraus_channel_validation():
    with pytest.raises(ValidationError):
        KrausChannel(np.zeros((2, 2, 2)), np.zeros((2, 3, 3)))
    with pytest.raises(ValidationError):
        KrausChannel(np.full((1, 2, 2), np.nan), np.zeros((1, 2, 2)))


def test_photon_rotation_preserves_channel_action(rng):
    ch = random_channel(2, 3, 5)
    z = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    u, _ = np.linalg.qr(z)
    rot = ch.rotated(u)
    rho = np.array([[0.7, 0.2j], [-0.2j, 0.3]])
    assert np.allclose(rot.apply(rho), ch.apply(rho))
    assert np.allclose(transfer_matrix(rot), transfer_matrix(ch))


def test_first_order_step_matches_semigroup_to_second_order():
    model = random_lindblad(2, 2, seed=6)
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        step = scipy.linalg.expm(liouvillian(model) * dt)
        errs.append(np.max(np.abs(step - transfer_matrix(discretize(model, dt, "first_order")))))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_discretization_modes_converge_in_qfi():
    model = random_lindblad(2, 2, seed=7)
    rho = np.diag([0.6, 0.4]).astype(complex)
    gaps = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        n = int(round(0.5 / dt))
        first = exact_qfi_curve(discretize(model, dt, "first_order", isometry_tol=1e-2), rho, n)[-1]
        exact = exact_qfi_curve(discretize(model, dt), rho, n)[-1]
        gaps.append(abs(first - exact) / exact)
    assert gaps[0] / gaps[1] == pytest.approx(2, rel=0.1)
    assert gaps[1] / gaps[2] == pytest.approx(2, rel=0.1)
