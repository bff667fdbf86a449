"""Bessel functions of fractional order nu in (0, 1/2] and their positive zeros.

Evaluation of J_nu, I_nu and first derivatives is delegated to the vetted
cephes/amos routines in scipy.special (which switch between power series and
asymptotic expansions internally); this module owns the domain checks, the
ODE-based second derivative and the zero finder, which scipy does not provide
for non-integer order.  The test suite re-checks the evaluators against an
independent truncated power series and half-order closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp


class DomainError(ValueError):
    """Argument outside the validity domain of an evaluator."""


class ConvergenceError(RuntimeError):
    """Root refinement failed to reach the requested residual."""


#: residual target for refined zeros, |J_nu(j)| <= ZERO_TOL
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class BesselOrder:
    """Fractional order nu with 0 < nu <= 1/2.

    nu = 1/2 is the classical-heat validation limit where J_{1/2} and
    I_{1/2} reduce to elementary closed forms.
    """

    nu: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.nu) or not 0.0 < self.nu <= 0.5:
            raise DomainError(f"order nu must satisfy 0 < nu <= 1/2, got {self.nu}")


@dataclass(frozen=True)
class BesselZero:
    """The n-th positive zero of J_nu, refined to |J_nu(value)| <= ZERO_TOL."""

    order: BesselOrder
    index: int
    value: float


def _check_x(x, minimum: float = 0.0):
    x = np.asarray(x, dtype=float)
    if np.any(x < minimum) or not np.all(np.isfinite(x)):
        raise DomainError(f"argument must be finite and >= {minimum}")
    return x


def bessel_j(order: BesselOrder, x):
    """J_nu(x) for x >= 0.  Scalar in, scalar out; arrays pass through."""
    xs = _check_x(x)
    out = _sp.jv(order.nu, xs)
    return float(out) if np.isscalar(x) or xs.ndim == 0 else out


def bessel_j_prime(order: BesselOrder, x):
    """First derivative J_nu'(x) for x >= 0."""
    xs = _check_x(x)
    out = _sp.jvp(order.nu, xs)
    return float(out) if np.isscalar(x) or xs.ndim == 0 else out


def bessel_j_second(order: BesselOrder, x):
    """J_nu''(x) from the defining ODE: x^2 y'' + x y' + (x^2 - nu^2) y = 0.

    Requires x > 0; the identity degenerates at the origin.
    """
    xs = _check_x(x)
    if np.any(xs == 0.0):
        raise DomainError("second derivative via the ODE identity needs x > 0")
    nu = order.nu
    out = -_sp.jvp(nu, xs) / xs - (1.0 - nu**2 / xs**2) * _sp.jv(nu, xs)
    return float(out) if np.isscalar(x) or xs.ndim == 0 else out


def bessel_i(order: BesselOrder, x):
    """Modified Bessel I_nu(x) for x >= 0 (real-valued branch)."""
    xs = _check_x(x)
    out = _sp.iv(order.nu, xs)
    return float(out) if np.isscalar(x) or xs.ndim == 0 else out


def bessel_i_prime(order: BesselOrder, x):
    """First derivative I_nu'(x) for x >= 0."""
    xs = _check_x(x)
    out = _sp.ivp(order.nu, xs)
    return float(out) if np.isscalar(x) or xs.ndim == 0 else out


def mcmahon_guess(order: BesselOrder, n: int) -> float:
    """McMahon large-zero expansion; within O(1/n) of j_{nu,n} even at n=1."""
    a = math.pi * (n + order.nu / 2.0 - 0.25)
    return a - (4.0 * order.nu**2 - 1.0) / (8.0 * a)


def bessel_zero(order: BesselOrder, n: int, max_iter: int = 100) -> BesselZero:
    """n-th positive zero of J_nu by Newton from the McMahon guess.

    The iteration is safeguarded by a sign-change bracket around the guess;
    any Newton step leaving the bracket is replaced by a bisection step, so
    ordering and simplicity of the returned zeros are guaranteed.
    """
    if n < 1:
        raise DomainError(f"zero index must be >= 1, got {n}")
    guess = mcmahon_guess(order, n)

    # bracket by expanding around the guess; consecutive zeros are ~pi apart
    half = 0.5
    lo, hi = guess - half, guess + half
    flo, fhi = _sp.jv(order.nu, lo), _sp.jv(order.nu, hi)
    while flo * fhi > 0.0:
        half *= 1.5
        if half > 2.0:
            raise ConvergenceError(f"no sign change near McMahon guess for n={n}")
        lo, hi = guess - half, guess + half
        flo, fhi = _sp.jv(order.nu, lo), _sp.jv(order.nu, hi)

    x = guess
    fx = _sp.jv(order.nu, x)
    for _ in range(max_iter):
        if abs(fx) <= ZERO_TOL:
            return BesselZero(order=order, index=n, value=float(x))
        dfx = _sp.jvp(order.nu, x)
        step_ok = dfx != 0.0
        if step_ok:
            x_new = x - fx / dfx
            step_ok = lo < x_new < hi
        if not step_ok:
            x_new = 0.5 * (lo + hi)
        f_new = _sp.jv(order.nu, x_new)
        if f_new * flo < 0.0:
            hi, fhi = x_new, f_new
        else:
            lo, flo = x_new, f_new
        x, fx = x_new, f_new
    raise ConvergenceError(
        f"zero refinement for (nu={order.nu}, n={n}) stalled at |J|={abs(fx):.3e}"
    )


def bessel_zeros(order: BesselOrder, count: int) -> np.ndarray:
    """First `count` positive zeros of J_nu, strictly increasing."""
    vals = np.array([bessel_zero(order, n).value for n in range(1, count + 1)])
    if np.any(np.diff(vals) <= 0.0):
        raise ConvergenceError("computed zeros are not strictly increasing")
    return vals
