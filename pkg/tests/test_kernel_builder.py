"""Kernel construction: non-resonance screening, shifted modes, closed-form
Gram entries against the quadrature oracle, and the coefficient solve."""

import math

import numpy as np
import pytest

from degenstab.kernel_builder import (
    DecayConfig,
    ResonanceError,
    beta_n,
    build_gram,
    build_kernel,
    check_nonresonance,
    epsilon_n,
    gram_entry,
    kernel_eval,
    ncheck_count,
    one_minus_gram_diag,
    phi_minus_xi_norm_sq,
    psi_norm_sq,
    write_kernel_table_csv,
    xi_tilde_eval,
    xi_tilde_norm_sq,
)
from degenstab.special_functions import DomainError
from degenstab.spectral_basis import (
    DegenerateParams,
    build_modes,
    eval_phi,
    inner_product_quadrature,
)


class TestNonresonance:
    def test_exact_eigenvalue_rejected(self):
        p = DegenerateParams(0.0)
        modes = build_modes(p, ncheck_count(16, DecayConfig(np.pi**2)))
        res = check_nonresonance(modes, DecayConfig(np.pi**2))
        assert not res.ok
        assert res.offending is not None
        assert res.suggested_perturbation is not None

    def test_generic_rate_accepted(self):
        p = DegenerateParams(0.0)
        cfg = DecayConfig(5.0)
        modes = build_modes(p, ncheck_count(16, cfg))
        res = check_nonresonance(modes, cfg)
        assert res.ok
        assert res.min_distance > 0.1

    def test_eigenvalue_difference_rejected(self):
        # lambda = lambda_2 - lambda_1 collides with the shifted spectrum
        p = DegenerateParams(0.0)
        lam = 4 * np.pi**2 - np.pi**2
        cfg = DecayConfig(lam)
        modes = build_modes(p, ncheck_count(16, cfg))
        res = check_nonresonance(modes, cfg)
        assert not res.ok

    def test_margin_validation(self):
        with pytest.raises(DomainError):
            DecayConfig(-1.0)


class TestShiftedModes:
    def test_epsilon_frozen_value(self):
        # alpha = 0, lambda = 5, n = 10: eps = 10 pi - sqrt(100 pi^2 - 5)
        p = DegenerateParams(0.0)
        cfg = DecayConfig(5.0)
        modes = build_modes(p, 10)
        eps = epsilon_n(modes[9], p, cfg)
        assert eps == pytest.approx(0.07967851369629741, abs=1e-14)
        assert eps == pytest.approx(5.0 / (20.0 * np.pi), rel=2e-3)

    def test_epsilon_absent_below_rate(self):
        p = DegenerateParams(0.0)
        cfg = DecayConfig(20.0)  # above lambda_1 = pi^2
        modes = build_modes(p, 4)
        assert epsilon_n(modes[0], p, cfg) is None
        assert epsilon_n(modes[1], p, cfg) is not None

    def test_boundary_value_is_beta(self, params05, modes05, cfg05):
        for m in modes05[:6]:
            assert xi_tilde_eval(m, params05, cfg05, 1.0) == pytest.approx(
                beta_n(m, params05, cfg05), abs=1e-13
            )

    def test_beta_linear_decay(self, params05, modes05, cfg05):
        scaled = [m.n * abs(beta_n(m, params05, cfg05)) for m in modes05]
        assert max(scaled[32:]) <= 1.5 * max(scaled[:16])

    def test_norm_closed_form_vs_quadrature(self, params05, modes05, cfg05):
        for m in (modes05[0], modes05[3]):
            quad = inner_product_quadrature(
                lambda x: xi_tilde_eval(m, params05, cfg05, x),
                lambda x: xi_tilde_eval(m, params05, cfg05, x),
                params05,
            )
            assert xi_tilde_norm_sq(m, params05, cfg05) == pytest.approx(quad, rel=1e-10)

    def test_modified_branch_norm(self):
        # first mode sits below lambda = 20 at alpha = 0 and uses the
        # modified-Bessel branch
        p = DegenerateParams(0.0)
        cfg = DecayConfig(20.0)
        modes = build_modes(p, 4)
        quad = inner_product_quadrature(
            lambda x: xi_tilde_eval(modes[0], p, cfg, x),
            lambda x: xi_tilde_eval(modes[0], p, cfg, x),
            p,
        )
        assert xi_tilde_norm_sq(modes[0], p, cfg) == pytest.approx(quad, rel=1e-10)

    def test_zero_rate_limit_recovers_phi(self, params05, modes05):
        cfg0 = DecayConfig(0.0)
        x = np.linspace(0.05, 1.0, 37)
        for m in modes05[:3]:
            dev = np.max(
                np.abs(xi_tilde_eval(m, params05, cfg0, x) - eval_phi(m, params05, x))
            )
            assert dev < 1e-10


class TestGram:
    def test_closed_form_vs_oracle(self, params05, cfg05):
        modes = build_modes(params05, 6)
        for k in range(1, 7):
            for n in range(1, 7):
                oracle = inner_product_quadrature(
                    lambda x: xi_tilde_eval(modes[n - 1], params05, cfg05, x),
                    lambda x: eval_phi(modes[k - 1], params05, x),
                    params05,
                )
                closed = gram_entry(n, k, modes, params05, cfg05)
                assert closed == pytest.approx(oracle, abs=1e-10)

    def test_modified_branch_entry(self):
        p = DegenerateParams(0.0)
        cfg = DecayConfig(20.0)
        modes = build_modes(p, 6)
        oracle = inner_product_quadrature(
            lambda x: xi_tilde_eval(modes[0], p, cfg, x),
            lambda x: eval_phi(modes[2], p, x),
            p,
        )
        assert gram_entry(1, 3, modes, p, cfg) == pytest.approx(oracle, abs=1e-10)

    def test_stable_diagonal_matches_direct(self, params05, modes05, cfg05):
        for m in (modes05[0], modes05[7], modes05[40]):
            stable = one_minus_gram_diag(m, params05, cfg05)
            direct = 1.0 - gram_entry(m.n, m.n, modes05, params05, cfg05)
            assert stable == pytest.approx(direct, abs=1e-11)

    def test_diagonal_quadratic_decay(self, params05, modes05, cfg05):
        scaled = [
            m.n**2 * abs(one_minus_gram_diag(m, params05, cfg05)) for m in modes05
        ]
        assert max(scaled[32:]) <= 1.5 * max(scaled[:16])

    def test_identity_at_zero_rate(self, params05, modes05):
        gram0 = build_gram(modes05[:8], params05, DecayConfig(0.0))
        assert np.max(np.abs(gram0 - np.eye(8))) < 1e-10

    def test_resonant_entry_raises(self):
        p = DegenerateParams(0.0)
        modes = build_modes(p, 6)
        cfg = DecayConfig(3 * np.pi**2)  # lambda_2 - lambda_1
        with pytest.raises(ResonanceError):
            gram_entry(2, 1, modes, p, cfg)

    def test_quadratic_closeness(self, params05, modes05, cfg05, kernel05):
        norms = phi_minus_xi_norm_sq(modes05, params05, cfg05, kernel05.gram)
        scaled = np.arange(1, 65) ** 2 * norms
        assert np.max(scaled[32:]) <= 1.5 * np.max(scaled[:16])


class TestCoefficients:
    def test_invariants(self, kernel05):
        assert np.array_equal(kernel05.c, 1.0 + kernel05.d)
        assert np.array_equal(kernel05.psi1, -kernel05.c * kernel05.beta)
        assert math.isfinite(kernel05.condition)
        assert kernel05.tail_sq >= 0.0

    def test_zero_rate_gives_identity_kernel(self, params05, modes05):
        kd = build_kernel(modes05[:16], params05, DecayConfig(0.0))
        assert np.max(np.abs(kd.d)) < 1e-9
        assert np.max(np.abs(kd.psi1)) < 1e-9

    def test_refinement_drift_shrinks(self, params05, cfg05):
        ds = {}
        for n in (32, 64, 128):
            ds[n] = build_kernel(build_modes(params05, n), params05, cfg05).d
        drift_64 = np.max(np.abs(ds[64][:16] - ds[32][:16]))
        drift_128 = np.max(np.abs(ds[128][:16] - ds[64][:16]))
        # first-order convergence of the truncated system: the drift roughly
        # halves per doubling
        assert drift_128 <= 0.75 * drift_64

    def test_psi_norms_square_summable_trend(self, kernel05, modes05, params05):
        norms = psi_norm_sq(kernel05, modes05, params05)
        assert np.all(norms >= 0.0)
        # the tail of ||psi_n||^2 decays: last-quarter sum below head sum
        assert np.sum(norms[48:]) < np.sum(norms[:16])


class TestKernelEval:
    def test_vanishes_toward_degenerate_edge(self, kernel05, modes05, params05):
        ys = np.linspace(0.2, 0.8, 5)
        vals = [kernel_eval(kernel05, modes05, params05, 1e-7, float(y)) for y in ys]
        assert np.max(np.abs(vals)) < 1e-2

    def test_finite_on_grid(self, kernel05, modes05, params05):
        xs = np.linspace(0.1, 0.9, 7)
        for x in xs:
            for y in xs:
                assert math.isfinite(kernel_eval(kernel05, modes05, params05, float(x), float(y)))

    def test_table_csv(self, tmp_path, kernel05):
        path = tmp_path / "kernel.csv"
        write_kernel_table_csv(kernel05, path)
        rows = path.read_text().strip().splitlines()
        assert len(rows) == 65
