"""Eigenbasis of the degenerate diffusion operator: closed forms at the
non-degenerate end, orthonormality, lifting coefficients, quadrature."""

import numpy as np
import pytest

from degenstab.special_functions import DomainError
from degenstab.spectral_basis import (
    DegenerateParams,
    build_modes,
    eval_phi,
    gram_matrix_quadrature,
    hardy_poincare_check,
    inner_product_quadrature,
    project_function,
    write_modes_csv,
)


class TestParams:
    def test_derived_quantities(self):
        p = DegenerateParams(0.5)
        assert p.nu == pytest.approx(1.0 / 3.0)
        assert p.kappa == pytest.approx(0.75)
        p0 = DegenerateParams(0.0)
        assert p0.nu == pytest.approx(0.5)
        assert p0.kappa == pytest.approx(1.0)

    def test_alpha_validation(self):
        for bad in (-0.1, 1.0, 1.5):
            with pytest.raises(DomainError):
                DegenerateParams(bad)


class TestModes:
    def test_frozen_first_eigenvalue(self, params05, modes05):
        # lambda_1 = (kappa j_{1/3,1})^2 frozen from the series-oracle zero
        assert modes05[0].lam == pytest.approx(4.739066397843291, abs=1e-10)
        assert modes05[0].zero == pytest.approx(2.9025862484169496, abs=1e-12)

    def test_boundary_trace_formula(self, params05, modes05):
        kap = params05.kappa
        for m in modes05[:10]:
            assert m.boundary_trace == pytest.approx(np.sqrt(2 * kap) * kap * m.zero)

    def test_nondegenerate_limit_is_sine_basis(self):
        # alpha = 0: |phi_n(x)| = sqrt(2) |sin(n pi x)|
        p = DegenerateParams(0.0)
        modes = build_modes(p, 5)
        x = np.linspace(0.01, 1.0, 173)
        for m in modes:
            got = np.abs(eval_phi(m, p, x))
            want = np.sqrt(2.0) * np.abs(np.sin(m.n * np.pi * x))
            assert np.max(np.abs(got - want)) < 1e-10

    def test_eigenvalue_growth(self, modes05, params05):
        lams = np.array([m.lam for m in modes05])
        n = np.arange(1, len(lams) + 1)
        # lambda_n ~ (kappa pi n)^2
        ratio = lams / (params05.kappa * np.pi * n) ** 2
        assert abs(ratio[-1] - 1.0) < 0.02

    def test_vanishing_at_origin_boundary(self, params05, modes05):
        m = modes05[0]
        assert abs(eval_phi(m, params05, 1e-8)) < 1e-3
        assert abs(eval_phi(m, params05, 1.0)) < 1e-12


class TestQuadrature:
    def test_orthonormality(self, params05):
        modes = build_modes(params05, 16)
        fams = [(lambda m: (lambda x: eval_phi(m, params05, x)))(m) for m in modes]
        gram = gram_matrix_quadrature(fams, params05)
        assert np.max(np.abs(gram - np.eye(16))) < 1e-10

    def test_lifting_coefficient_sign_and_value(self, params05):
        # integration by parts gives <x^(1-a), phi_n> = -phi_n'(1)/lambda_n
        modes = build_modes(params05, 8)
        for m in modes:
            bn = inner_product_quadrature(
                lambda x: x ** (1.0 - params05.alpha),
                lambda x: eval_phi(m, params05, x),
                params05,
            )
            assert bn == pytest.approx(-m.boundary_trace / m.lam, abs=1e-10)

    def test_projection_recovers_modes(self, params05):
        modes = build_modes(params05, 6)
        coeffs = project_function(lambda x: eval_phi(modes[2], params05, x), modes, params05)
        want = np.zeros(6)
        want[2] = 1.0
        assert np.max(np.abs(coeffs - want)) < 1e-9

    def test_polynomial_integral(self, params05):
        # sanity outside the Bessel family: int_0^1 x * x^2 dx = 1/4
        val = inner_product_quadrature(lambda x: x, lambda x: x**2, params05)
        assert val == pytest.approx(0.25, abs=1e-12)


class TestHardyPoincare:
    def test_inequality_holds(self, params05):
        lhs, rhs = hardy_poincare_check(
            lambda x: x * (1.0 - x), params05, fprime=lambda x: 1.0 - 2.0 * x
        )
        assert 0.0 < lhs <= rhs

    def test_fd_derivative_fallback(self, params05):
        lhs_fd, rhs_fd = hardy_poincare_check(lambda x: x * (1.0 - x), params05)
        lhs, rhs = hardy_poincare_check(
            lambda x: x * (1.0 - x), params05, fprime=lambda x: 1.0 - 2.0 * x
        )
        assert lhs_fd == pytest.approx(lhs, rel=1e-8)
        assert rhs_fd == pytest.approx(rhs, rel=1e-5)


def test_modes_csv_roundtrip(tmp_path, params05):
    modes = build_modes(params05, 5)
    path = tmp_path / "modes.csv"
    write_modes_csv(modes, path)
    rows = path.read_text().strip().splitlines()
    assert len(rows) == 6  # header + 5 modes
    assert rows[0].split(",")[0] == "n"
    first = rows[1].split(",")
    assert float(first[2]) == pytest.approx(modes[0].lam)
