import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emitqfi._linalg import purify
from emitqfi.channel import discretize, fixed_point, random_channel
from emitqfi.errors import ValidationError
from emitqfi.models import random_lindblad
from emitqfi.oracle import pure_qfi_brute
from emitqfi.qfi import (
    asymptotic_rate,
    continuum_rate,
    curve_from_variables,
    exact_qfi_curve,
    qfi_curve,
    qfi_variables,
    relaxation_modes,
    secant_slope,
)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 3), d_out=st.integers(2, 3), steps=st.integers(1, 6))
def test_bulk_curve_matches_brute_force(seed, dim, d_out, steps):
    ch = random_channel(dim, d_out, seed)
    curve = qfi_curve(ch, steps)
    brute = pure_qfi_brute(ch, purify(fixed_point(ch)), steps)
    assert curve[-1] == pytest.approx(brute, rel=1e-9, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), steps=st.integers(1, 6))
def test_exact_curve_from_arbitrary_start(seed, steps):
    rng = np.random.default_rng(seed)
    ch = random_channel(3, 2, rng)
    a = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    a /= np.linalg.norm(a)
    curve = exact_qfi_curve(ch, a @ a.conj().T, steps)
    assert curve[-1] == pytest.approx(pure_qfi_brute(ch, a, steps), rel=1e-9, abs=1e-12)


def test_exact_curve_from_fixed_point_equals_bulk_curve():
    ch = random_channel(3, 3, 2)
    assert np.allclose(exact_qfi_curve(ch, fixed_point(ch), 20), qfi_curve(ch, 20))


def test_terms_sum_to_curve():
    v = qfi_variables(random_channel(2, 3, 3), 14)
    terms = v.terms(15)
    assert np.allclose(terms["alpha"] + terms["beta"] + terms["gamma"], v.curve(15))
    assert terms["beta"][0] == 0.0


def test_curve_from_variables_against_direct_sum():
    rng = np.random.default_rng(0)
    betas = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    alpha, gamma = 1.3, 0.2 - 0.4j
    curve = curve_from_variables(alpha, gamma, betas, 8)
    for t in range(1, 9):
        s = sum((t - tau - 1) * betas[tau].real for tau in range(t - 1))
        assert curve[t - 1] == pytest.approx(4 * (t * alpha + 2 * s - t * t * abs(gamma) ** 2))


def test_validation_of_step_counts():
    ch = random_channel(2, 2, 4)
    with pytest.raises(ValidationError):
        qfi_curve(ch, 0)
    with pytest.raises(ValidationError):
        curve_from_variables(1.0, 0.0, np.zeros(2), 5)


def test_rate_matches_late_slope():
    ch = random_channel(3, 2, 5)
    rep = asymptotic_rate(ch)
    curve = qfi_curve(ch, 400)
    assert secant_slope(curve) == pytest.approx(rep.per_step, rel=1e-10)
    assert rep.dt is None and rep.rate == pytest.approx(rep.per_step)


def test_relaxation_modes_reproduce_betas():
    ch = random_channel(2, 3, 6)
    v = qfi_variables(ch, 30)
    lam, weights = relaxation_modes(ch)
    tau = np.arange(30)
    model = abs(v.gamma) ** 2 + (weights * lam ** tau[:, None]).sum(axis=1)
    assert np.allclose(v.betas, model, atol=1e-12)


def test_rate_is_per_unit_time_for_lindblad_channels():
    model = random_lindblad(2, 1, seed=7)
    ch = discretize(model, 1e-3)
    rep = asymptotic_rate(ch)
    assert rep.rate == pytest.approx(rep.per_step / 1e-3)
    est = continuum_rate(model, 2e-3)
    assert est.error < 1e-2 * est.value
    assert abs(est.value - est.fine) <= est.error + 1e-12
