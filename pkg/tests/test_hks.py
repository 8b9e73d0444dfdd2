import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emitqfi._linalg import purify
from emitqfi.channel import discretize, fixed_point, random_channel
from emitqfi.errors import ValidationError
from emitqfi.hks import (
    build_w,
    effective_hamiltonian,
    hks_bound,
    hks_qfi_decomposition,
    hks_test,
    hls_test,
    solve_h,
    w_condition_residual,
)
from emitqfi.models import boundary_time_crystal, dephasing_sensor, random_lindblad
from emitqfi.oracle import pure_qfi_brute


def test_dephasing_sensor_is_in_span():
    ch = discretize(dephasing_sensor(1.0), 1e-3)
    rep = hks_test(ch)
    assert rep.in_span and rep.relative_residual < 1e-12
    assert np.allclose(rep.h, rep.h.conj().T)
    assert w_condition_residual(build_w(ch, rep.h)) < 1e-15


def test_generic_three_level_channel_is_not_in_span():
    rep = hks_test(random_channel(3, 2, 1))
    assert not rep.in_span
    assert rep.relative_residual > 1e-3


def test_effective_hamiltonian_is_hermitian():
    h = effective_hamiltonian(random_channel(3, 3, 2))
    assert np.allclose(h, h.conj().T)


def test_span_verdict_is_invariant_under_photon_rotation(rng):
    ch = discretize(dephasing_sensor(1.0), 1e-3)
    z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    u, _ = np.linalg.qr(z)
    a, b = hks_test(ch), hks_test(ch.rotated(u))
    assert a.in_span == b.in_span
    assert abs(a.relative_residual - b.relative_residual) < 1e-9
    assert not hks_test(random_channel(3, 2, 1).rotated(np.eye(2)[::-1])).in_span


def test_btc_lindblad_span_and_discrete_convergence():
    model = boundary_time_crystal(4, 10.0, 1.0)
    assert hls_test(model).relative_residual < 1e-12
    residuals = [hks_test(discretize(model, dt)).relative_residual for dt in (1e-4, 1e-5)]
    assert residuals[1] == pytest.approx(residuals[0] / 10, rel=0.05)


def test_lindblad_span_needs_fixed_jumps():
    with pytest.raises(ValidationError):
        hls_test(random_lindblad(2, 1, seed=3))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), steps=st.integers(1, 5))
def test_decomposition_sums_to_qfi_for_any_generator(seed, steps):
    rng = np.random.default_rng(seed)
    ch = random_channel(2, 2, rng)
    h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    h = h + h.conj().T
    dec = hks_qfi_decomposition(ch, h, steps)
    ref = pure_qfi_brute(ch, purify(fixed_point(ch)), steps)
    assert dec.total == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_overlap_term_vanishes_when_condition_holds():
    ch = discretize(dephasing_sensor(1.0), 1e-3)
    h, _ = solve_h(ch)
    plus = np.array([1, 1]) / np.sqrt(2)
    dec = hks_qfi_decomposition(ch, h, 6, np.outer(plus, plus))
    assert abs(dec.overlap_term) < 1e-15
    assert abs(dec.w_overlap) < 1e-15


def test_decomposition_rejects_zero_steps():
    with pytest.raises(ValidationError):
        hks_qfi_decomposition(random_channel(2, 2, 5), np.zeros((2, 2)), 0)


def test_bound_dominates_qfi():
    ch = random_channel(2, 3, 6)
    for t in (1, 3, 6):
        assert pure_qfi_brute(ch, purify(fixed_point(ch)), t) <= hks_bound(ch, t) + 1e-12
