import numpy as np
import pytest

from emitqfi._linalg import vec
from emitqfi.channel import discretize
from emitqfi.errors import NonUniqueSteadyState, ValidationError
from emitqfi.lindblad import (
    LindbladModel,
    d_liouvillian,
    evolve,
    liouvillian,
    liouvillian_spectrum,
    molmer_qfi,
    molmer_rate,
    steady_state,
    tilted_liouvillian,
)
from emitqfi.models import boundary_time_crystal, dephasing_sensor, random_lindblad
from emitqfi.qfi import asymptotic_rate, exact_qfi_curve


def test_rejects_non_hermitian_hamiltonian():
    h = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(ValidationError):
        LindbladModel(h, [], np.zeros((2, 2)), [])


def test_rejects_mismatched_jump_derivatives():
    with pytest.raises(ValidationError):
        LindbladModel(np.eye(2), np.zeros((1, 2, 2)), np.eye(2), np.zeros((2, 2, 2)))


def test_evolution_preserves_trace_and_hermiticity():
    model = random_lindblad(3, 2, seed=1)
    rho = np.diag([1.0, 0.0, 0.0]).astype(complex)
    out = evolve(model, rho, 0.7)
    assert np.isclose(np.trace(out), 1.0)
    assert np.allclose(out, out.conj().T)


def test_steady_state_is_in_kernel():
    model = random_lindblad(3, 2, seed=2)
    rho = steady_state(model)
    assert np.allclose(liouvillian(model) @ vec(rho), 0, atol=1e-12)
    assert np.linalg.eigvalsh(rho).min() > -1e-12


def test_steady_state_rejects_degenerate_kernel():
    with pytest.raises(NonUniqueSteadyState):
        steady_state(dephasing_sensor(1.0))


def test_single_spin_btc_spectrum():
    kappa, omega = 1.0, 0.3
    w = liouvillian_spectrum(boundary_time_crystal(1, omega, kappa))
    root = np.sqrt(complex(kappa**2 / 4 - omega**2))
    expected = np.array([0, -kappa, -1.5 * kappa + root, -1.5 * kappa - root])
    assert np.allclose(np.sort_complex(w), np.sort_complex(expected), atol=1e-12)


def test_derivative_of_liouvillian_matches_finite_difference():
    model = random_lindblad(2, 2, seed=3)
    eps = 1e-6
    fd = (liouvillian(model.shifted(eps)) - liouvillian(model.shifted(-eps))) / (2 * eps)
    assert np.allclose(fd, d_liouvillian(model), atol=1e-8)


def test_tilted_generator_reduces_to_shifted_liouvillian():
    model = random_lindblad(2, 1, seed=4)
    assert np.allclose(tilted_liouvillian(model, 0.1, 0.1), liouvillian(model.shifted(0.1)))
    assert np.allclose(tilted_liouvillian(model, 0.0, 0.0), liouvillian(model))


def test_molmer_qfi_matches_discrete_curve_as_dt_shrinks():
    model = random_lindblad(2, 1, seed=5)
    rho = steady_state(model)
    t = 1.0
    ref = molmer_qfi(model, rho, t)
    errs = []
    for dt in (2e-3, 1e-3):
        curve = exact_qfi_curve(discretize(model, dt), rho, int(round(t / dt)))
        errs.append(abs(curve[-1] - ref.value))
    assert errs[1] < errs[0]
    assert errs[1] / ref.value < 2e-3


def test_molmer_rate_agrees_with_discrete_rate():
    model = random_lindblad(3, 2, seed=6)
    rate = molmer_rate(model)
    discrete = asymptotic_rate(discretize(model, 1e-3)).rate
    assert abs(discrete - rate.value) / rate.value < 5e-3
    assert rate.error < 1e-4 * rate.value
