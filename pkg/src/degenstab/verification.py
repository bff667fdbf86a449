"""Property battery behind the `verify` subcommand.

Each gate re-checks one identity or bound of the construction numerically:
closed forms against the quadrature oracle, asymptotic trends against
running maxima, and the operator identities at truncation.  A gate returns
(name, passed, detail) so the CLI can render both JSON and a human report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from degenstab import closed_loop_sim, fredholm_transform, kernel_builder
from degenstab.kernel_builder import DecayConfig, build_gram, build_kernel, solve_coefficients
from degenstab.special_functions import (
    BesselOrder,
    bessel_i,
    bessel_j,
    bessel_j_prime,
    bessel_j_second,
    bessel_zeros,
    mcmahon_guess,
)
from degenstab.spectral_basis import (
    DegenerateParams,
    build_modes,
    eval_phi,
    gram_matrix_quadrature,
    hardy_poincare_check,
    inner_product_quadrature,
)


@dataclass(frozen=True)
class GateResult:
    name: str
    passed: bool
    detail: str


def _gate(results: list[GateResult], name: str, passed: bool, detail: str) -> None:
    results.append(GateResult(name=name, passed=bool(passed), detail=detail))


def _stabilized(values: np.ndarray, slack: float = 2.0) -> bool:
    """Running maximum stabilizes: the tail quarter adds no growth trend."""
    n = values.size
    head = np.max(values[: max(3 * n // 4, 1)])
    tail = np.max(values[3 * n // 4 :]) if n > 3 else head
    return tail <= slack * head


def run_verification(
    alpha: float,
    decay_rate: float,
    n_modes: int,
    resonance_margin: float | None,
    seed: int,
    sabotage_gram: bool = False,
    sim_cfg: closed_loop_sim.SimConfig | None = None,
) -> list[GateResult]:
    rng = np.random.default_rng(seed)
    results: list[GateResult] = []
    params = DegenerateParams(alpha)
    config = DecayConfig(decay_rate, resonance_margin)

    # --- special-function gates -------------------------------------------
    xs = np.linspace(0.1, 50.0, 400)
    half = BesselOrder(0.5)
    dev_j = np.max(
        np.abs(bessel_j(half, xs) - np.sqrt(2.0 / (np.pi * xs)) * np.sin(xs))
    )
    small = xs[xs <= 50.0]
    # I_1/2 grows like e^x / sqrt(x); compare relative to the closed form
    closed_i = np.sqrt(2.0 / (np.pi * small)) * np.sinh(small)
    dev_i = np.max(np.abs(bessel_i(half, small) - closed_i) / closed_i)
    _gate(
        results,
        "half_order_closed_forms",
        dev_j <= 1e-10 and dev_i <= 1e-10,
        f"max |J_1/2 - closed form| = {dev_j:.2e}, |I_1/2 - closed form| = {dev_i:.2e}",
    )

    nus = rng.uniform(0.05, 0.5, size=200)
    pts = rng.uniform(0.1, 50.0, size=200)
    worst = 0.0
    for nu_v, x_v in zip(nus, pts):
        o = BesselOrder(float(nu_v))
        res = abs(
            x_v**2 * bessel_j_second(o, x_v)
            + x_v * bessel_j_prime(o, x_v)
            + (x_v**2 - nu_v**2) * bessel_j(o, x_v)
        )
        worst = max(worst, res / (1.0 + x_v**2))
    _gate(
        results,
        "bessel_ode_residual",
        worst <= 1e-9,
        f"max scaled ODE residual over 200 random points = {worst:.2e}",
    )

    worst_zero = 0.0
    worst_mcmahon = 0.0
    for nu_v in (1.0 / 3.0, 0.4, 0.5):
        o = BesselOrder(nu_v)
        zs = bessel_zeros(o, 100)
        worst_zero = max(worst_zero, float(np.max(np.abs(bessel_j(o, zs)))))
        for n in range(5, 101):
            dev = abs(zs[n - 1] - mcmahon_guess(o, n))
            worst_mcmahon = max(worst_mcmahon, n**3 * dev)
    _gate(
        results,
        "zero_residuals",
        worst_zero <= 1e-12,
        f"max |J_nu(j_nu_n)| over n<=100 = {worst_zero:.2e}",
    )
    _gate(
        results,
        "mcmahon_cubic_decay",
        worst_mcmahon <= 1.0,
        f"max n^3 |j_nu_n - McMahon| over n in [5,100] = {worst_mcmahon:.3f}",
    )

    # --- eigenbasis gates --------------------------------------------------
    n_basis = min(n_modes, 16)
    modes_small = build_modes(params, n_basis)
    fams: list[Callable[[np.ndarray], np.ndarray]] = [
        (lambda m: (lambda x: eval_phi(m, params, x)))(m) for m in modes_small
    ]
    gram_q = gram_matrix_quadrature(fams, params)
    orth_dev = float(np.max(np.abs(gram_q - np.eye(n_basis))))
    _gate(
        results,
        "eigenbasis_orthonormality",
        orth_dev <= 1e-8,
        f"max |Gram - I| over n,k <= {n_basis} = {orth_dev:.2e}",
    )

    bn_dev = 0.0
    lift = lambda x: x ** (1.0 - params.alpha)  # noqa: E731
    for m in modes_small:
        bn = inner_product_quadrature(lift, lambda x, _m=m: eval_phi(_m, params, x), params)
        # integration by parts: <x^(1-alpha), phi_n> = -phi_n'(1)/lam_n
        bn_dev = max(bn_dev, abs(bn + m.boundary_trace / m.lam))
    _gate(
        results,
        "lifting_coefficient_identity",
        bn_dev <= 1e-8,
        f"max |<x^(1-alpha), phi_n> + phi_n'(1)/lam_n| = {bn_dev:.2e}",
    )

    # strong-form residual: flux x^a phi' evaluated analytically, divergence
    # by one central difference (nesting two differences floors at ~1e-6)
    grid = np.linspace(0.05, 0.95, 181)
    h = 1e-6
    worst_res = 0.0
    order = params.order
    kap = params.kappa
    for m in modes_small[:8]:
        def flux(x, _m=m):
            amp = math.sqrt(2.0 * kap) / _m.jprime
            arg = _m.zero * x**kap
            dphi = (1.0 - params.alpha) / 2.0 * x ** (-(1.0 + params.alpha) / 2.0) * bessel_j(
                order, arg
            ) + x ** ((1.0 - params.alpha) / 2.0) * bessel_j_prime(order, arg) * _m.zero * kap * x ** (
                kap - 1.0
            )
            return amp * x**params.alpha * dphi

        div = (flux(grid + h) - flux(grid - h)) / (2.0 * h)
        res = np.max(np.abs(div + m.lam * eval_phi(m, params, grid))) / m.lam
        worst_res = max(worst_res, float(res))
    _gate(
        results,
        "eigenpair_strong_form",
        worst_res <= 1e-8,
        f"max |(x^a phi')' + lam phi| / lam on x >= 0.05 = {worst_res:.2e}",
    )

    lhs, rhs = hardy_poincare_check(
        lambda x: x * (1.0 - x), params, fprime=lambda x: 1.0 - 2.0 * x
    )
    _gate(
        results,
        "hardy_poincare",
        lhs <= rhs,
        f"int f^2 = {lhs:.6f} <= weighted bound {rhs:.6f}",
    )

    # --- kernel gates ------------------------------------------------------
    modes_check = build_modes(params, kernel_builder.ncheck_count(n_modes, config))
    nr = kernel_builder.check_nonresonance(modes_check, config)
    _gate(
        results,
        "nonresonance",
        nr.ok,
        f"min distance to eigenvalue sums = {nr.min_distance:.3e} (margin {config.margin:.1e})",
    )
    if not nr.ok:
        return results

    modes = modes_check[:n_modes]
    gram = build_gram(modes, params, config)
    if sabotage_gram:
        gram = gram.copy()
        gram[1, 2] += 1e-3  # negative-control hook: deliberate off-by entry

    n_oracle = min(n_modes, 8)
    xi_fams = [
        (lambda m: (lambda x: kernel_builder.xi_tilde_eval(m, params, config, x)))(m)
        for m in modes[:n_oracle]
    ]
    phi_fams = [
        (lambda m: (lambda x: eval_phi(m, params, x)))(m) for m in modes[:n_oracle]
    ]
    cross = gram_matrix_quadrature(phi_fams + xi_fams, params)[:n_oracle, n_oracle:]
    oracle_dev = float(np.max(np.abs(cross - gram[:n_oracle, :n_oracle])))
    _gate(
        results,
        "gram_closed_form_vs_oracle",
        oracle_dev <= 1e-8,
        f"max |closed form - quadrature| over (n,k) <= {n_oracle} = {oracle_dev:.2e}",
    )

    ns = np.arange(1, n_modes + 1, dtype=float)
    diag_gap = np.array(
        [kernel_builder.one_minus_gram_diag(m, params, config) for m in modes]
    )
    above = ~np.isnan(
        np.array([kernel_builder.epsilon_n(m, params, config) or math.nan for m in modes])
    )
    diag_trend = ns[above] ** 2 * np.abs(diag_gap[above])
    betas = np.array([kernel_builder.beta_n(m, params, config) for m in modes])
    closeness = kernel_builder.phi_minus_xi_norm_sq(modes, params, config, gram)
    _gate(
        results,
        "diagonal_quadratic_gap",
        _stabilized(diag_trend),
        f"n^2 |1 - G[n][n]| running max {np.max(diag_trend):.3f}",
    )
    _gate(
        results,
        "boundary_value_linear_decay",
        _stabilized(ns * np.abs(betas)),
        f"n |beta_n| running max {np.max(ns * np.abs(betas)):.3f}",
    )
    _gate(
        results,
        "quadratic_closeness",
        _stabilized(ns**2 * closeness),
        f"n^2 ||phi_n - xi_n||^2 running max {np.max(ns**2 * closeness):.3f}",
    )

    kernel = solve_coefficients(modes, gram, params, config)
    half_n = n_modes // 2
    # the truncated system converges at first order in N: the tail ratio
    # and the refinement drift must both shrink under doubling, and the
    # solved coefficients stay square-summable (partial sums Cauchy)
    head = float(np.sum(kernel.d[:half_n] ** 2))
    tail = float(np.sum(kernel.d[half_n:] ** 2))
    kernel_half = build_kernel(modes[:half_n], params, config)
    head_h = float(np.sum(kernel_half.d[: half_n // 2] ** 2))
    tail_h = float(np.sum(kernel_half.d[half_n // 2 :] ** 2))
    ratio = tail / max(head, 1e-300)
    ratio_h = tail_h / max(head_h, 1e-300)
    _gate(
        results,
        "coefficient_tail_decay",
        ratio <= 0.02 or ratio <= ratio_h,
        f"sum d_n^2 tail/head = {ratio:.2e} (N/2 run: {ratio_h:.2e})",
    )

    drift = float(
        np.max(np.abs(kernel.d[: half_n // 2] - kernel_half.d[: half_n // 2]))
    )
    kernel_quarter = build_kernel(modes[: half_n // 2], params, config)
    drift_h = float(
        np.max(
            np.abs(kernel_half.d[: half_n // 4] - kernel_quarter.d[: half_n // 4])
        )
    )
    _gate(
        results,
        "coefficient_truncation_stability",
        drift <= 0.75 * drift_h,
        f"max |d_n(N) - d_n(N/2)| over first N/4 = {drift:.2e} "
        f"(previous doubling: {drift_h:.2e})",
    )

    # --- transform gates ---------------------------------------------------
    sys = fredholm_transform.assemble(kernel, modes)
    tb = float(np.max(np.abs(fredholm_transform.tb_residual(sys))))
    _gate(results, "boundary_compat_residual", tb <= 1e-8, f"max |r_k / g_k| = {tb:.2e}")

    sys_small = fredholm_transform.assemble(
        build_kernel(modes[:32], params, config), modes[:32]
    ) if n_modes >= 32 else sys
    modes_big = build_modes(params, max(2 * n_modes, 128))
    sys_big = fredholm_transform.assemble(
        build_kernel(modes_big, params, config), modes_big
    )
    drift_sigma = abs(sys_big.sigma_min - sys_small.sigma_min) / sys_small.sigma_min
    _gate(
        results,
        "transform_invertibility",
        # refinement must not push sigma_min toward zero: either it has
        # settled (<= 10% drift) or it improves with N
        sys_small.sigma_min > 0.0
        and (drift_sigma <= 0.10 or sys_big.sigma_min >= sys_small.sigma_min),
        f"sigma_min = {sys_small.sigma_min:.4f}, drift to N={len(modes_big)}: {100 * drift_sigma:.2f}%",
    )

    c_frob = float(np.linalg.norm(sys.C_mat))
    tilde_sigma = float(np.linalg.svd(sys.T_tilde, compute_uv=False)[-1])
    _gate(
        results,
        "fredholm_split",
        tilde_sigma > 0.0 and math.isfinite(c_frob),
        f"sigma_min(invertible part) = {tilde_sigma:.4f}, ||compact part||_F = {c_frob:.4f}",
    )

    op_res = fredholm_transform.operator_identity_residual(sys, modes)
    op_res_small = fredholm_transform.operator_identity_residual(
        sys_small, modes[: sys_small.truncation]
    )
    _gate(
        results,
        "operator_identity",
        op_res <= 1e-6 and (op_res <= op_res_small or op_res <= 1e-12),
        f"normalized residual = {op_res:.2e} (N/2 run: {op_res_small:.2e})",
    )

    spectrum = fredholm_transform.closed_loop_spectrum(sys, modes)
    lams = np.array([m.lam for m in modes])
    expected = np.sort(lams + config.decay_rate)
    observed = np.sort(-spectrum.real)
    spec_err = float(
        np.max(np.abs(observed[:half_n] - expected[:half_n]) / expected[:half_n])
    )
    _gate(
        results,
        "spectrum_shift",
        spec_err <= 1e-3,
        f"max relative eigenvalue error on lowest N/2 = {spec_err:.2e}",
    )

    # --- closed-loop decay -------------------------------------------------
    if sim_cfg is None:
        sim_cfg = closed_loop_sim.SimConfig(t_final=1.0, dt=0.005)
    u0 = 1.0 / np.arange(1, n_modes + 1, dtype=float)
    traj = closed_loop_sim.simulate_closed_loop(sys, modes, u0, sim_cfg)
    rate_floor = 0.95 * (modes[0].lam + config.decay_rate)
    _gate(
        results,
        "closed_loop_decay_rate",
        traj.fitted_rate >= rate_floor,
        f"fitted rate {traj.fitted_rate:.3f} >= 0.95 (lam_1 + lam) = {rate_floor:.3f}",
    )
    c_est = math.exp(traj.fit_intercept) / traj.l2_norm[0]
    cond = sys.sigma_max / sys.sigma_min
    _gate(
        results,
        "decay_constant_vs_conditioning",
        c_est <= 1.1 * cond,
        f"C estimate {c_est:.3f} <= 1.1 cond(T) = {1.1 * cond:.3f}",
    )
    dev = closed_loop_sim.conjugate_check(sys, modes, u0, sim_cfg)
    _gate(
        results,
        "trajectory_conjugacy",
        dev <= 1e-4,
        f"max relative deviation of T u(t) from target = {dev:.2e}",
    )
    return results
