"""Unit tests for the cutoff chi and the potential family F, f, f'."""

import numpy as np
import pytest

from stripflow import nonlinearity as nl


def test_chi_vanishes_below_one():
    s = np.linspace(-3.0, 1.0, 101)
    assert np.all(nl.chi(s) == 0.0)
    assert np.all(nl.chi_prime(s) == 0.0)
    assert np.all(nl.chi_pprime(s) == 0.0)


def test_chi_linear_above_two():
    s = np.linspace(2.0, 10.0, 81)
    np.testing.assert_allclose(nl.chi(s), s - 1.0, rtol=0, atol=0)
    np.testing.assert_allclose(nl.chi_prime(s), 1.0, rtol=0, atol=0)
    assert np.all(nl.chi_pprime(s) == 0.0)


def test_chi_wedge_and_monotone_in_blend():
    s = np.linspace(1.0 + 1e-6, 2.0 - 1e-6, 4001)
    c = nl.chi(s)
    assert np.all(c <= s - 1.0 + 1e-15)
    assert np.all(c >= 0.0)
    assert np.all(nl.chi_prime(s) >= 0.0)
    assert np.all(np.diff(c) >= 0.0)


@pytest.mark.parametrize("fn,dfn", [(nl.chi, nl.chi_prime), (nl.chi_prime, nl.chi_pprime)])
def test_chi_derivatives_match_finite_differences(fn, dfn):
    s = np.linspace(0.5, 3.5, 601)
    h = 1e-6
    num = (fn(s + h) - fn(s - h)) / (2.0 * h)
    np.testing.assert_allclose(dfn(s), num, rtol=2e-4, atol=2e-4)


@pytest.mark.parametrize("mode", ["ramp", "zero"])
def test_f_is_derivative_of_F(mode):
    spec = nl.ProblemSpec(mode=mode, lam=0.04)
    s = np.linspace(-0.5, 6.0, 401)
    h = 1e-6
    num = (nl.F(s + h, spec) - nl.F(s - h, spec)) / (2.0 * h)
    np.testing.assert_allclose(nl.f(s, spec), num, rtol=1e-5, atol=1e-5)
    num2 = (nl.f(s + h, spec) - nl.f(s - h, spec)) / (2.0 * h)
    np.testing.assert_allclose(nl.f_prime(s, spec), num2, rtol=1e-4, atol=1e-4)


def test_mode_properties():
    ramp = nl.ProblemSpec(mode=nl.Mode.RAMP_C1)
    zero = nl.ProblemSpec(mode=nl.Mode.ZERO_C0)
    assert ramp.boundary_values == (0.0, 1.0)
    assert zero.boundary_values == (0.0, 0.0)
    assert ramp.threshold == 0.5
    assert zero.threshold == -1.0 / 6.0
    assert ramp.forcing == 0.0
    assert zero.forcing == 2.0
    t = np.linspace(0.0, 1.0, 11)
    np.testing.assert_array_equal(ramp.trivial_profile(t), t)
    np.testing.assert_array_equal(zero.trivial_profile(t), t * (1 - t))


def test_mode_accepts_string_value():
    spec = nl.ProblemSpec(mode="ramp")
    assert spec.mode is nl.Mode.RAMP_C1
    spec = nl.ProblemSpec(mode="zero")
    assert spec.mode is nl.Mode.ZERO_C0
    with pytest.raises(ValueError):
        nl.ProblemSpec(mode="rampp")


def test_spec_validation_and_with_lambda():
    with pytest.raises(ValueError):
        nl.ProblemSpec(mode="ramp", lam=-1.0)
    with pytest.raises(ValueError):
        nl.ProblemSpec(mode="ramp", m=1)
    spec = nl.ProblemSpec(mode="ramp", lam=1.0)
    spec2 = spec.with_lambda(0.25)
    assert spec2.lam == 0.25 and spec.lam == 1.0
    assert spec2.mode is spec.mode


def test_potential_zero_mode_includes_forcing():
    spec = nl.ProblemSpec(mode="zero", lam=0.0)
    s = np.linspace(0.0, 0.9, 10)  # below the cutoff: F reduces to 2s
    np.testing.assert_allclose(nl.F(s, spec), 2.0 * s, atol=1e-15)
    np.testing.assert_allclose(nl.f(s, spec), 2.0, atol=1e-15)
