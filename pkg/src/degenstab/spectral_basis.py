"""Eigenpairs of the degenerate operator and weighted-L2 geometry.

The diffusion operator A u = (x^alpha u_x)_x on (0,1) with Dirichlet ends
has eigenfunctions built from J_nu at rescaled argument; this module
constructs the modes, evaluates them, and provides the quadrature oracle
used to cross-check every closed-form inner product in the pipeline.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from degenstab.special_functions import (
    BesselOrder,
    DomainError,
    bessel_j,
    bessel_j_prime,
    bessel_zeros,
)


class QuadratureError(RuntimeError):
    """Successive panel refinements failed to agree within tolerance."""


@dataclass(frozen=True)
class DegenerateParams:
    """Degeneracy exponent alpha in [0, 1) and its derived Bessel parameters.

    alpha = 0 is admitted as the classical-heat validation limit; every
    closed form specializes continuously there (nu = 1/2, kappa = 1).
    """

    alpha: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.alpha) or not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha}")

    @property
    def nu(self) -> float:
        return (1.0 - self.alpha) / (2.0 - self.alpha)

    @property
    def kappa(self) -> float:
        return (2.0 - self.alpha) / 2.0

    @property
    def order(self) -> BesselOrder:
        return BesselOrder(self.nu)


@dataclass(frozen=True)
class EigenMode:
    """One eigenpair: -A phi_n = lambda_n phi_n.

    zero          j_{nu,n}
    lam           lambda_n = (kappa * j_{nu,n})^2
    jprime        J_nu'(j_{nu,n})  (signed)
    boundary_trace phi_n'(1) = sqrt(2 kappa) * kappa * j_{nu,n} > 0
    """

    n: int
    zero: float
    lam: float
    jprime: float
    boundary_trace: float


def build_modes(params: DegenerateParams, count: int) -> list[EigenMode]:
    """Modes 1..count of the degenerate operator; deterministic."""
    if count < 1:
        raise DomainError(f"mode count must be >= 1, got {count}")
    order = params.order
    kap = params.kappa
    zeros = bessel_zeros(order, count)
    jp = bessel_j_prime(order, zeros)
    return [
        EigenMode(
            n=i + 1,
            zero=float(z),
            lam=float((kap * z) ** 2),
            jprime=float(jp[i]),
            boundary_trace=float(math.sqrt(2.0 * kap) * kap * z),
        )
        for i, z in enumerate(zeros)
    ]


def eval_phi(mode: EigenMode, params: DegenerateParams, x):
    """Normalized eigenfunction phi_n(x) on (0, 1].

    phi_n(x) = sqrt(2 kappa) / J_nu'(j_{nu,n}) * x^{(1-alpha)/2}
               * J_nu(j_{nu,n} x^kappa).
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0.0) or np.any(xs > 1.0):
        raise DomainError("eigenfunctions are evaluated on (0, 1]")
    amp = math.sqrt(2.0 * params.kappa) / mode.jprime
    out = amp * xs ** ((1.0 - params.alpha) / 2.0) * bessel_j(
        params.order, mode.zero * xs**params.kappa
    )
    return float(out) if np.isscalar(x) or xs.ndim == 0 else out


# ---------------------------------------------------------------------------
# Quadrature oracle.
#
# All integrals over (0,1) are pulled back through y = x^kappa, which turns
# the x^{(1-alpha)/2} eigenfunction envelopes into a plain factor of y and
# leaves only a mild y^{alpha/(2-alpha)} Jacobian power.  Panels are dyadic
# toward y = 0; each refinement level doubles the sub-panel count.
# ---------------------------------------------------------------------------

_GAUSS_NODES = 16
_DYADIC_LEVELS = 14


def _grid(params: DegenerateParams, subpanels: int):
    """Nodes/weights in x for integrating f(x) dx over (0,1)."""
    gx, gw = leggauss(_GAUSS_NODES)
    edges = np.concatenate(([0.0], 2.0 ** np.arange(-_DYADIC_LEVELS, 1, dtype=float)))
    ys = []
    ws = []
    for a, b in zip(edges[:-1], edges[1:]):
        sub = np.linspace(a, b, subpanels + 1)
        for c, d in zip(sub[:-1], sub[1:]):
            ys.append((d - c) / 2.0 * gx + (c + d) / 2.0)
            ws.append((d - c) / 2.0 * gw)
    y = np.concatenate(ys)
    w = np.concatenate(ws)
    inv_kap = 1.0 / params.kappa
    x = y**inv_kap
    # dx = (1/kappa) y^{1/kappa - 1} dy
    w = w * inv_kap * y ** (inv_kap - 1.0)
    return x, w


def inner_product_quadrature(
    f: Callable[[np.ndarray], np.ndarray],
    g: Callable[[np.ndarray], np.ndarray],
    params: DegenerateParams,
    tol: float = 1e-10,
    max_refine: int = 6,
) -> float:
    """L2(0,1) inner product of two vectorized callables.

    Refines until doubling the sub-panel count moves the value by less than
    `tol`; raises QuadratureError otherwise.
    """
    prev = None
    subpanels = 1
    for _ in range(max_refine + 1):
        x, w = _grid(params, subpanels)
        val = float(np.sum(w * f(x) * g(x)))
        if prev is not None and abs(val - prev) < tol:
            return val
        prev = val
        subpanels *= 2
    raise QuadratureError(
        f"inner product did not stabilize below {tol:g} (last delta at {subpanels // 2} sub-panels)"
    )


def gram_matrix_quadrature(
    funcs: Sequence[Callable[[np.ndarray], np.ndarray]],
    params: DegenerateParams,
    tol: float = 1e-10,
    max_refine: int = 6,
) -> np.ndarray:
    """All pairwise inner products of a function family on one shared grid.

    Evaluates every function once per refinement level, so an N-family Gram
    costs N function sweeps instead of N^2 scalar quadratures.
    """
    prev = None
    subpanels = 1
    for _ in range(max_refine + 1):
        x, w = _grid(params, subpanels)
        vals = np.vstack([f(x) for f in funcs])
        gram = (vals * w) @ vals.T
        if prev is not None and np.max(np.abs(gram - prev)) < tol:
            return gram
        prev = gram
        subpanels *= 2
    raise QuadratureError(f"Gram quadrature did not stabilize below {tol:g}")


def project_function(
    f: Callable[[np.ndarray], np.ndarray],
    modes: Sequence[EigenMode],
    params: DegenerateParams,
    tol: float = 1e-10,
) -> np.ndarray:
    """Modal coefficients <f, phi_n> for n = 1..len(modes)."""
    fams = [f] + [
        (lambda m: (lambda x: eval_phi(m, params, x)))(m) for m in modes
    ]
    gram = gram_matrix_quadrature(fams, params, tol=tol)
    return gram[0, 1:]


def hardy_poincare_check(
    f: Callable[[np.ndarray], np.ndarray],
    params: DegenerateParams,
    fprime: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-9,
) -> tuple[float, float]:
    """Both sides of the weighted Poincare bound for f with f(0)=f(1)=0.

    Returns (int f^2, 4/(1-alpha)^2 * int x^alpha f'^2); the caller asserts
    lhs <= rhs.  f' is taken by central differences when not supplied.
    """
    if fprime is None:
        h = 1e-6

        def fprime(x, _f=f, _h=h):  # noqa: ANN001
            return (_f(np.minimum(x + _h, 1.0)) - _f(np.maximum(x - _h, 0.0))) / (
                np.minimum(x + _h, 1.0) - np.maximum(x - _h, 0.0)
            )

    lhs = inner_product_quadrature(f, f, params, tol=tol)
    weighted = inner_product_quadrature(
        lambda x: x ** (params.alpha / 2.0) * fprime(x),
        lambda x: x ** (params.alpha / 2.0) * fprime(x),
        params,
        tol=tol,
    )
    rhs = 4.0 / (1.0 - params.alpha) ** 2 * weighted
    return lhs, rhs


def write_modes_csv(modes: Sequence[EigenMode], path) -> None:
    """Mode table: n, j_nu_n, lambda_n, jprime, boundary_trace."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "j_nu_n", "lambda_n", "jprime", "boundary_trace"])
        for m in modes:
            writer.writerow(
                [
                    m.n,
                    f"{m.zero:.17g}",
                    f"{m.lam:.17g}",
                    f"{m.jprime:.17g}",
                    f"{m.boundary_trace:.17g}",
                ]
            )
