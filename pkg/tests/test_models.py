import numpy as np
import pytest

from emitqfi.errors import ValidationError
from emitqfi.lindblad import liouvillian, steady_state
from emitqfi._linalg import vec
from emitqfi.models import (
    PAULI_Z,
    boundary_time_crystal,
    btc_steady_state_reference,
    dephasing_sensor,
    ghz_emitter,
    ghz_symmetry_residuals,
    lowering,
    monitor_ghz_state,
    spin_monitor,
    spin_operators,
)


@pytest.mark.parametrize("spin", [0.5, 1.0, 1.5, 4.0])
def test_spin_algebra(spin):
    sx, sy, sz = spin_operators(spin)
    assert np.allclose(sx @ sy - sy @ sx, 1j * sz)
    casimir = sx @ sx + sy @ sy + sz @ sz
    assert np.allclose(casimir, spin * (spin + 1) * np.eye(sx.shape[0]))
    assert np.allclose(lowering(spin), sx - 1j * sy)
    assert sz[0, 0] == spin


def test_spin_must_be_half_integer():
    with pytest.raises(ValidationError):
        spin_operators(0.3)


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_btc_steady_state_matches_closed_form(n):
    model = boundary_time_crystal(n, 3.0, 1.0)
    ref = btc_steady_state_reference(n, 3.0, 1.0)
    assert np.allclose(liouvillian(model) @ vec(ref), 0, atol=1e-12)
    assert np.allclose(steady_state(model), ref, atol=1e-10)


def test_btc_validation():
    with pytest.raises(ValidationError):
        boundary_time_crystal(0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        boundary_time_crystal(2, 1.0, 0.0)


def test_ghz_emitter_symmetries():
    res = ghz_symmetry_residuals(ghz_emitter(0.4))
    assert res == {"flip": 0.0, "phase": 0.0}
    ch = ghz_emitter(0.4)
    assert ch.isometry_defect() < 1e-15


def test_spin_monitor_structure():
    model = spin_monitor(3, omega=0.5, kappa=2.0)
    assert model.dim == 8 and model.n_jumps == 3
    assert model.meta["energies"] == (1.0, -1.0)
    psi, gap = monitor_ghz_state(model)
    assert gap == pytest.approx(6.0)
    assert np.linalg.norm(psi) == pytest.approx(1.0)
    # the jump projects onto the low-energy state
    assert np.allclose(model.jumps[0] @ model.jumps[0], np.sqrt(2.0) * model.jumps[0])
    with pytest.raises(ValidationError):
        spin_monitor(7, 1.0, 1.0)


def test_spin_monitor_custom_single_site_hamiltonian():
    h = np.array([[0.0, 1.0], [1.0, 0.0]])
    model = spin_monitor(1, 1.0, 1.0, h_single=h)
    low = np.array([1.0, -1.0]) / np.sqrt(2)
    assert np.allclose(model.jumps[0], np.outer(low, low))


def test_dephasing_sensor():
    model = dephasing_sensor(0.5, theta=0.2)
    assert np.allclose(model.hamiltonian, 0.1 * PAULI_Z)
    assert np.allclose(model.d_hamiltonian, 0.5 * PAULI_Z)
    assert np.allclose(model.jumps[0], np.sqrt(0.5) * PAULI_Z)
