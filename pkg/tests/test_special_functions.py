"""Bessel evaluation and zero finding, checked against an independent
power-series oracle and classical identities."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degenstab.special_functions import (
    BesselOrder,
    BesselZero,
    DomainError,
    bessel_i,
    bessel_i_prime,
    bessel_j,
    bessel_j_prime,
    bessel_j_second,
    bessel_zero,
    bessel_zeros,
    mcmahon_guess,
)


def j_series(nu: float, x: float, terms: int = 200) -> float:
    """Independent oracle: the ascending power series with log-gamma terms.

    Accurate to ~1e-11 for x <= 10 (alternating-series cancellation grows
    like e^x, so the oracle is only used at moderate argument).
    """
    total = 0.0
    lx = math.log(x / 2.0)
    for m in range(terms):
        term = math.exp((2 * m + nu) * lx - math.lgamma(m + 1) - math.lgamma(m + nu + 1))
        total += term if m % 2 == 0 else -term
    return total


def i_series(nu: float, x: float, terms: int = 200) -> float:
    total = 0.0
    lx = math.log(x / 2.0)
    for m in range(terms):
        total += math.exp((2 * m + nu) * lx - math.lgamma(m + 1) - math.lgamma(m + nu + 1))
    return total


class TestEvaluation:
    def test_j_matches_series_oracle(self):
        for nu in (1.0 / 3.0, 0.25, 0.4, 0.5):
            order = BesselOrder(nu)
            for x in np.linspace(0.05, 10.0, 57):
                assert bessel_j(order, float(x)) == pytest.approx(
                    j_series(nu, float(x)), abs=5e-12
                )

    def test_i_matches_series_oracle(self):
        for nu in (1.0 / 3.0, 0.5):
            order = BesselOrder(nu)
            for x in np.linspace(0.05, 10.0, 31):
                ref = i_series(nu, float(x))
                assert bessel_i(order, float(x)) == pytest.approx(ref, rel=1e-12)

    def test_half_order_closed_forms(self):
        order = BesselOrder(0.5)
        x = np.linspace(0.1, 50.0, 997)
        assert np.max(np.abs(bessel_j(order, x) - np.sqrt(2 / (np.pi * x)) * np.sin(x))) < 1e-10
        closed_i = np.sqrt(2 / (np.pi * x)) * np.sinh(x)
        assert np.max(np.abs(bessel_i(order, x) - closed_i) / closed_i) < 1e-12

    def test_derivative_recurrence(self):
        # J_nu' = J_{nu-1} - (nu/x) J_nu, via the series oracle at nu-1
        nu = 0.4
        order = BesselOrder(nu)
        for x in (0.5, 1.7, 4.3, 9.1):
            ref = j_series(nu - 1.0, x) - nu / x * j_series(nu, x)
            assert bessel_j_prime(order, x) == pytest.approx(ref, abs=5e-12)

    def test_i_prime_recurrence(self):
        nu = 1.0 / 3.0
        order = BesselOrder(nu)
        for x in (0.5, 2.0, 6.0):
            ref = i_series(nu - 1.0, x) - nu / x * i_series(nu, x)
            assert bessel_i_prime(order, x) == pytest.approx(ref, rel=1e-11)

    def test_array_broadcast(self):
        order = BesselOrder(0.4)
        x = np.array([0.3, 1.0, 2.5])
        out = bessel_j(order, x)
        assert out.shape == x.shape
        assert out[1] == bessel_j(order, 1.0)

    def test_domain_errors(self):
        order = BesselOrder(0.4)
        with pytest.raises(DomainError):
            bessel_j(order, -1.0)
        with pytest.raises(DomainError):
            bessel_j_second(order, 0.0)


@settings(max_examples=150, deadline=None)
@given(
    nu=st.floats(min_value=0.05, max_value=0.5),
    x=st.floats(min_value=0.1, max_value=40.0),
)
def test_ode_residual_property(nu, x):
    """x^2 J'' + x J' + (x^2 - nu^2) J = 0, scaled by 1 + x^2."""
    order = BesselOrder(nu)
    res = (
        x**2 * bessel_j_second(order, x)
        + x * bessel_j_prime(order, x)
        + (x**2 - nu**2) * bessel_j(order, x)
    )
    assert abs(res) <= 1e-9 * (1.0 + x**2)


class TestZeros:
    def test_zero_residual_and_ordering(self):
        for nu in (1.0 / 3.0, 0.4, 0.5):
            order = BesselOrder(nu)
            zs = bessel_zeros(order, 60)
            assert np.all(np.diff(zs) > 0)
            assert np.max(np.abs(bessel_j(order, zs))) <= 1e-12

    def test_frozen_first_zero(self):
        # order 1/3 (the alpha = 0.5 case), from the series oracle + bisection
        z = bessel_zero(BesselOrder(1.0 / 3.0), 1)
        assert isinstance(z, BesselZero)
        assert z.value == pytest.approx(2.9025862484169496, abs=1e-12)

    def test_half_order_zeros_are_n_pi(self):
        zs = bessel_zeros(BesselOrder(0.5), 40)
        assert np.max(np.abs(zs - np.pi * np.arange(1, 41))) < 1e-12

    def test_mcmahon_cubic_convergence(self):
        for nu in (1.0 / 3.0, 0.4, 0.5):
            order = BesselOrder(nu)
            zs = bessel_zeros(order, 120)
            devs = [n**3 * abs(zs[n - 1] - mcmahon_guess(order, n)) for n in range(5, 121)]
            assert max(devs) <= 1.0
            # the scaled deviation does not grow toward the tail
            assert max(devs[60:]) <= 2.0 * max(devs[:20])

    def test_zero_index_validation(self):
        with pytest.raises(DomainError):
            bessel_zero(BesselOrder(0.4), 0)
