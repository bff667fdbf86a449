"""Backstepping kernel construction.

The kernel is k(x,y) = sum_n psi_n(x) phi_n(y) with psi_n = phi_n - c_n xi_n,
where xi_n solves the shifted mode ODE and the coefficients c_n = 1 + d_n are
fixed by the boundary compatibility series.  Everything here reduces to
closed-form Bessel expressions plus one dense linear solve; the quadrature
oracle in spectral_basis independently validates every Gram entry.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from degenstab.special_functions import (
    DomainError,
    bessel_i,
    bessel_i_prime,
    bessel_j,
    bessel_j_prime,
)
from degenstab.spectral_basis import DegenerateParams, EigenMode, eval_phi


class ResonanceError(RuntimeError):
    """Target rate too close to an eigenvalue or an eigenvalue difference."""


class IllConditionedError(RuntimeError):
    """Coefficient system condition estimate above the trust threshold."""


@dataclass(frozen=True)
class DecayConfig:
    """Target closed-loop decay rate and the non-resonance safety margin."""

    decay_rate: float
    resonance_margin: float | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.decay_rate) or self.decay_rate < 0.0:
            raise DomainError(f"decay rate must be >= 0, got {self.decay_rate}")

    @property
    def margin(self) -> float:
        if self.resonance_margin is not None:
            return self.resonance_margin
        return 1e-6 * self.decay_rate


@dataclass(frozen=True)
class NonresonanceResult:
    ok: bool
    min_distance: float
    offending: tuple[int, int, float] | None  # (n, k, distance); k = 0 for lam = lam_n hits
    suggested_perturbation: float | None


def _nonresonance_distance(lam: float, lams: np.ndarray) -> tuple[float, tuple[int, int, float]]:
    """Smallest distance from lam to {lam_n} and {lam_n - lam_k}."""
    best = math.inf
    worst = (0, 0, math.inf)
    for i, ln in enumerate(lams):
        d = abs(lam - ln)
        if d < best:
            best, worst = d, (i + 1, 0, d)
        diffs = np.abs(lam - (ln - lams))
        diffs[i] = math.inf  # n = k gives the trivial zero difference
        j = int(np.argmin(diffs))
        if diffs[j] < best:
            best, worst = float(diffs[j]), (i + 1, j + 1, float(diffs[j]))
    return best, worst


def check_nonresonance(modes: Sequence[EigenMode], config: DecayConfig) -> NonresonanceResult:
    """Verify lam != lam_n and lam != lam_n - lam_k over the supplied modes.

    lam = lam_n - lam_k is exactly where the shifted mode at index n lines
    up with the eigenfunction at index k and the Gram denominator
    lam_k - lam_n + lam vanishes.  Callers should supply modes past the
    truncation actually used, far enough that consecutive eigenvalue gaps
    exceed lam (all later differences are then monotonically out of reach).
    On failure the smallest distance and the offending pair are reported,
    with a suggested upward perturbation of lam.
    """
    lams = np.array([m.lam for m in modes])
    best, worst = _nonresonance_distance(config.decay_rate, lams)
    if best >= config.margin:
        return NonresonanceResult(True, best, None, None)
    # smallest upward shift (in multiples of the margin) clearing every pair
    suggestion = None
    for mult in range(1, 10001):
        eps = mult * config.margin
        d, _ = _nonresonance_distance(config.decay_rate + eps, lams)
        if d >= config.margin:
            suggestion = eps
            break
    return NonresonanceResult(False, best, worst, suggestion)


def ncheck_count(n_modes: int, config: DecayConfig) -> int:
    """Mode count for the resonance scan: past it, consecutive eigenvalue
    gaps exceed lam, so no further difference can land on lam."""
    return n_modes + int(math.ceil(math.sqrt(max(config.decay_rate, 1.0)))) + 2


def epsilon_n(mode: EigenMode, params: DegenerateParams, config: DecayConfig) -> float | None:
    """Zero shift eps_n = j_{nu,n} - sqrt(lam_n - lam)/kappa, for lam_n > lam.

    Computed in the subtraction-free form eps = (lam/kappa^2)/(j + s) with
    s = sqrt(j^2 - lam/kappa^2); returns None for the finitely many modes
    with lam_n < lam, where the shift is not defined.
    """
    lam = config.decay_rate
    if mode.lam <= lam:
        return None
    kap = params.kappa
    s = math.sqrt(mode.zero**2 - lam / kap**2)
    return (lam / kap**2) / (mode.zero + s)


def _shifted_argument(mode: EigenMode, params: DegenerateParams, config: DecayConfig):
    """(argument, oscillatory?) for the shifted mode: sqrt(|lam_n - lam|)/kappa."""
    diff = mode.lam - config.decay_rate
    return math.sqrt(abs(diff)) / params.kappa, diff >= 0.0


def boundary_bessel_value(mode: EigenMode, params: DegenerateParams, config: DecayConfig) -> float:
    """J_nu(sqrt(lam_n-lam)/kappa), real modified branch when lam_n < lam."""
    arg, oscillatory = _shifted_argument(mode, params, config)
    order = params.order
    return bessel_j(order, arg) if oscillatory else bessel_i(order, arg)


def beta_n(mode: EigenMode, params: DegenerateParams, config: DecayConfig) -> float:
    """Boundary value xi_n(1); signed J_nu'(j_{nu,n}) normalization throughout."""
    return math.sqrt(2.0 * params.kappa) * boundary_bessel_value(mode, params, config) / mode.jprime


def xi_tilde_eval(mode: EigenMode, params: DegenerateParams, config: DecayConfig, x):
    """Shifted mode xi_n(x) on (0, 1]; coincides with phi_n when lam = 0."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0.0) or np.any(xs > 1.0):
        raise DomainError("xi_n is evaluated on (0, 1]")
    arg, oscillatory = _shifted_argument(mode, params, config)
    radial = bessel_j if oscillatory else bessel_i
    amp = math.sqrt(2.0 * params.kappa) / mode.jprime
    out = amp * xs ** ((1.0 - params.alpha) / 2.0) * radial(
        params.order, arg * xs**params.kappa
    )
    return float(out) if np.isscalar(x) or xs.ndim == 0 else out


def xi_tilde_norm_sq(mode: EigenMode, params: DegenerateParams, config: DecayConfig) -> float:
    """||xi_n||^2_{L2} from the weighted Bessel norm identity."""
    arg, oscillatory = _shifted_argument(mode, params, config)
    nu = params.nu
    order = params.order
    if arg == 0.0:  # lam = lam_n cannot pass non-resonance; lam = 0 gives phi_n
        return 1.0
    if oscillatory:
        jval = bessel_j(order, arg)
        jpv = bessel_j_prime(order, arg)
        w = (1.0 - nu**2 / arg**2) * jval**2 + jpv**2
    else:
        ival = bessel_i(order, arg)
        ipv = bessel_i_prime(order, arg)
        w = (1.0 + nu**2 / arg**2) * ival**2 - ipv**2
    return w / mode.jprime**2


def gram_entry(
    n: int,
    k: int,
    modes: Sequence[EigenMode],
    params: DegenerateParams,
    config: DecayConfig,
) -> float:
    """G[k][n] = <xi_n, phi_k>, from the Lommel cross-product integral.

    G[k][n] = -2 j_{nu,k} kappa^2 B_n / ((lam_k - lam_n + lam) J_nu'(j_{nu,n}))
    with B_n the shifted boundary Bessel value.  The denominator is protected
    by the non-resonance margin.
    """
    lam = config.decay_rate
    mn, mk = modes[n - 1], modes[k - 1]
    if lam == 0.0:
        return 1.0 if n == k else 0.0
    denom = mk.lam - mn.lam + lam
    if abs(denom) < config.margin:
        raise ResonanceError(
            f"denominator lam_{k} - lam_{n} + lam = {denom:.3e} inside resonance margin"
        )
    bval = boundary_bessel_value(mn, params, config)
    return -2.0 * mk.zero * params.kappa**2 * bval / (denom * mn.jprime)


def one_minus_gram_diag(mode: EigenMode, params: DegenerateParams, config: DecayConfig) -> float:
    """1 - G[n][n] without the large-n catastrophic cancellation.

    Writes G[n][n] = r * q with r = 2 j / (j + s) (exact) and
    q = -J_nu(j - eps) / (eps J_nu'(j)), so that
    1 - G = (1 - r) + r (1 - q) adds two small terms instead of
    subtracting two near-unit ones.  Falls back to the direct difference
    for below-rate modes and for lam = 0.
    """
    lam = config.decay_rate
    if lam == 0.0:
        return 0.0
    eps = epsilon_n(mode, params, config)
    if eps is None:
        return 1.0 - _diag_direct(mode, params, config)
    j = mode.zero
    s = j - eps
    r = 2.0 * j / (j + s)
    q = -bessel_j(params.order, s) / (eps * mode.jprime)
    return (1.0 - r) + r * (1.0 - q)


def _diag_direct(mode: EigenMode, params: DegenerateParams, config: DecayConfig) -> float:
    bval = boundary_bessel_value(mode, params, config)
    return -2.0 * mode.zero * params.kappa**2 * bval / (config.decay_rate * mode.jprime)


def build_gram(
    modes: Sequence[EigenMode], params: DegenerateParams, config: DecayConfig
) -> np.ndarray:
    """Full N x N Gram G[k][n] = <xi_n, phi_k> from the closed form."""
    count = len(modes)
    lam = config.decay_rate
    if lam == 0.0:
        return np.eye(count)
    zeros = np.array([m.lam for m in modes])
    jz = np.array([m.zero for m in modes])
    jp = np.array([m.jprime for m in modes])
    bvals = np.array([boundary_bessel_value(m, params, config) for m in modes])
    denom = zeros[:, None] - zeros[None, :] + lam  # (k, n)
    if np.min(np.abs(denom)) < config.margin:
        k, n = np.unravel_index(int(np.argmin(np.abs(denom))), denom.shape)
        raise ResonanceError(
            f"denominator lam_{k + 1} - lam_{n + 1} + lam inside resonance margin"
        )
    gram = -2.0 * params.kappa**2 * jz[:, None] * bvals[None, :] / (denom * jp[None, :])
    # recompute the delicate diagonal through the rearranged small-shift path
    for i, m in enumerate(modes):
        gram[i, i] = 1.0 - one_minus_gram_diag(m, params, config)
    return gram


@dataclass(frozen=True)
class KernelData:
    """Per-mode kernel quantities at truncation N.

    eps[n-1] is NaN for the finitely many modes with lam_n < lam.  Invariants
    c = 1 + d and psi1 = -c * beta hold exactly by construction.
    """

    config: DecayConfig
    truncation: int
    eps: np.ndarray
    beta: np.ndarray
    d: np.ndarray
    c: np.ndarray
    psi1: np.ndarray
    gram: np.ndarray
    condition: float
    tail_sq: float  # sum of d_n^2 over n > N/2


def solve_coefficients(
    modes: Sequence[EigenMode],
    gram: np.ndarray,
    params: DegenerateParams,
    config: DecayConfig,
    cond_limit: float = 1e10,
) -> KernelData:
    """Solve the truncated boundary-compatibility system for d_n.

    Modal form: sum_n phi_n'(1) d_n G[k][n] = sum_n phi_n'(1) (delta_kn - G[k][n]).
    Dense LU with one round of iterative refinement; the condition estimate is
    the scientific signal of near-resonance or too-small truncation.
    """
    count = len(modes)
    g = np.array([m.boundary_trace for m in modes])
    a_mat = gram * g[None, :]
    rhs = g - gram @ g
    condition = float(np.linalg.cond(a_mat))
    if not math.isfinite(condition) or condition > cond_limit:
        raise IllConditionedError(
            f"coefficient system condition {condition:.3e} exceeds {cond_limit:.1e}; "
            "increase the truncation or move the decay rate off resonance"
        )
    lu = lu_factor(a_mat)
    d = lu_solve(lu, rhs)
    d = d + lu_solve(lu, rhs - a_mat @ d)

    c = 1.0 + d
    beta = np.array([beta_n(m, params, config) for m in modes])
    psi1 = -c * beta
    eps = np.array(
        [
            e if (e := epsilon_n(m, params, config)) is not None else math.nan
            for m in modes
        ]
    )
    tail_sq = float(np.sum(d[count // 2 :] ** 2))
    return KernelData(
        config=config,
        truncation=count,
        eps=eps,
        beta=beta,
        d=d,
        c=c,
        psi1=psi1,
        gram=gram,
        condition=condition,
        tail_sq=tail_sq,
    )


def build_kernel(
    modes: Sequence[EigenMode], params: DegenerateParams, config: DecayConfig
) -> KernelData:
    """Gram assembly plus coefficient solve over the supplied modes."""
    gram = build_gram(modes, params, config)
    return solve_coefficients(modes, gram, params, config)


def psi_eval(
    data: KernelData,
    n: int,
    modes: Sequence[EigenMode],
    params: DegenerateParams,
    x,
):
    """psi_n(x) = phi_n(x) - c_n xi_n(x)."""
    mode = modes[n - 1]
    return eval_phi(mode, params, x) - data.c[n - 1] * xi_tilde_eval(
        mode, params, data.config, x
    )


def psi_norm_sq(data: KernelData, modes: Sequence[EigenMode], params: DegenerateParams) -> np.ndarray:
    """||psi_n||^2 = 1 - 2 c_n G[n][n] + c_n^2 ||xi_n||^2, per mode."""
    xi_sq = np.array([xi_tilde_norm_sq(m, params, data.config) for m in modes])
    diag = np.diag(data.gram)
    return 1.0 - 2.0 * data.c * diag + data.c**2 * xi_sq


def phi_minus_xi_norm_sq(
    modes: Sequence[EigenMode], params: DegenerateParams, config: DecayConfig, gram: np.ndarray
) -> np.ndarray:
    """||phi_n - xi_n||^2 from closed forms (quadratic-closeness diagnostic)."""
    xi_sq = np.array([xi_tilde_norm_sq(m, params, config) for m in modes])
    return 1.0 - 2.0 * np.diag(gram) + xi_sq


def kernel_eval(
    data: KernelData,
    modes: Sequence[EigenMode],
    params: DegenerateParams,
    x,
    y,
):
    """k(x,y) = sum_{n<=N} psi_n(x) phi_n(y) for x, y in (0, 1)."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    acc = np.zeros((xs.size, ys.size))
    for i, m in enumerate(modes):
        psi_x = eval_phi(m, params, xs) - data.c[i] * xi_tilde_eval(m, params, data.config, xs)
        acc += np.outer(psi_x, eval_phi(m, params, ys))
    if np.isscalar(x) and np.isscalar(y):
        return float(acc[0, 0])
    return acc


def write_kernel_table_csv(data: KernelData, path) -> None:
    """Per-mode kernel table: n, eps_n, beta_n, d_n, c_n, psi1_n."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "eps_n", "beta_n", "d_n", "c_n", "psi1_n"])
        for i in range(data.truncation):
            writer.writerow(
                [
                    i + 1,
                    f"{data.eps[i]:.17g}",
                    f"{data.beta[i]:.17g}",
                    f"{data.d[i]:.17g}",
                    f"{data.c[i]:.17g}",
                    f"{data.psi1[i]:.17g}",
                ]
            )


def write_kernel_grid_csv(
    data: KernelData,
    modes: Sequence[EigenMode],
    params: DegenerateParams,
    path,
    npts: int = 40,
) -> None:
    """Kernel heatmap samples on a uniform interior grid: x, y, k(x,y)."""
    pts = np.linspace(0.0, 1.0, npts + 2)[1:-1]
    vals = kernel_eval(data, modes, params, pts, pts)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "k_xy"])
        for i, xv in enumerate(pts):
            for j, yv in enumerate(pts):
                writer.writerow([f"{xv:.17g}", f"{yv:.17g}", f"{vals[i, j]:.17g}"])
