"""Fredholm-backstepping boundary stabilization of the weakly degenerate heat equation.

The pipeline: fractional-order Bessel machinery -> eigenbasis of the
degenerate diffusion operator -> backstepping kernel coefficients ->
truncated transform/feedback matrices -> closed-loop simulation at a
prescribed decay rate.
"""

from degenstab.special_functions import (
    BesselOrder,
    BesselZero,
    bessel_i,
    bessel_i_prime,
    bessel_j,
    bessel_j_prime,
    bessel_j_second,
    bessel_zero,
    bessel_zeros,
)
from degenstab.spectral_basis import (
    DegenerateParams,
    EigenMode,
    build_modes,
    eval_phi,
    inner_product_quadrature,
    hardy_poincare_check,
)
from degenstab.kernel_builder import (
    DecayConfig,
    KernelData,
    check_nonresonance,
    build_kernel,
)
from degenstab.fredholm_transform import TransformSystem, assemble
from degenstab.closed_loop_sim import (
    SimConfig,
    Trajectory,
    simulate_closed_loop,
    simulate_target,
    conjugate_check,
    fit_decay_rate,
)

__version__ = "0.1.0"
