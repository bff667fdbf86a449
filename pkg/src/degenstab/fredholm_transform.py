"""Truncated matrix realization of the Fredholm transform and the feedback.

T acts modally as T[k][n] = delta_kn - <psi_n, phi_k> = c_n G[k][n]; the
feedback row is p_n = psi_n(1) and the control column is g_k = phi_k'(1).
The module also carries the identity diagnostics: TB = B, the similarity
T (A + B K) = (A - lam I) T, and the Fredholm split T = G + d-scaled G.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from degenstab.kernel_builder import DecayConfig, KernelData
from degenstab.spectral_basis import EigenMode


@dataclass(frozen=True)
class TransformSystem:
    """Matrices/vectors of the truncated closed-loop construction.

    T_mat       modal matrix of T (N x N)
    T_inv       explicit inverse, export/diagnostics only (applications
                go through a fresh factorization)
    T_tilde     invertible part of the Fredholm split (the Gram itself)
    C_mat       Hilbert-Schmidt part, columns scaled by d_n
    p           feedback row, p_n = psi_n(1)
    g           control column, g_k = phi_k'(1)
    sigma_min / sigma_max   extreme singular values of T_mat
    """

    config: DecayConfig
    truncation: int
    T_mat: np.ndarray
    T_inv: np.ndarray
    T_tilde: np.ndarray
    C_mat: np.ndarray
    p: np.ndarray
    g: np.ndarray
    sigma_min: float
    sigma_max: float


def assemble(kernel: KernelData, modes: Sequence[EigenMode]) -> TransformSystem:
    """Build the transform system from solved kernel data."""
    gram = kernel.gram
    t_mat = gram * kernel.c[None, :]
    c_mat = gram * kernel.d[None, :]
    svals = np.linalg.svd(t_mat, compute_uv=False)
    return TransformSystem(
        config=kernel.config,
        truncation=kernel.truncation,
        T_mat=t_mat,
        T_inv=np.linalg.inv(t_mat),
        T_tilde=gram,
        C_mat=c_mat,
        p=kernel.psi1.copy(),
        g=np.array([m.boundary_trace for m in modes]),
        sigma_min=float(svals[-1]),
        sigma_max=float(svals[0]),
    )


def apply_K(sys: TransformSystem, a: np.ndarray) -> float:
    """Feedback value U = sum_n psi_n(1) a_n for f = sum a_n phi_n."""
    a = np.asarray(a, dtype=float)
    if a.shape != (sys.truncation,):
        raise ValueError(f"expected coefficient vector of length {sys.truncation}")
    return float(sys.p @ a)


def tb_residual(sys: TransformSystem) -> np.ndarray:
    """Relative residual of the TB = B identity at the solved truncation.

    r_k = sum_n <psi_n, phi_k> phi_n'(1) = g_k - (T g)_k, returned as
    r_k / phi_k'(1).  Vanishes to solver precision for k <= N because it is
    exactly the linear system the coefficient solve enforced.
    """
    r = sys.g - sys.T_mat @ sys.g
    return r / sys.g


def closed_loop_matrix(sys: TransformSystem, modes: Sequence[EigenMode]) -> np.ndarray:
    """Modal generator of the closed loop: M = diag(-lam_k) - g p^T.

    The rank-one term carries the sign of the Dirichlet boundary
    integration by parts: da_k/dt = -lam_k a_k - U(t) phi_k'(1) with
    U = p . a, so the feedback column enters with a minus.
    """
    lams = np.array([m.lam for m in modes])
    return np.diag(-lams) - np.outer(sys.g, sys.p)


def closed_loop_spectrum(sys: TransformSystem, modes: Sequence[EigenMode]) -> np.ndarray:
    """Eigenvalues of the closed-loop matrix, sorted by descending real part."""
    eig = np.linalg.eigvals(closed_loop_matrix(sys, modes))
    return eig[np.argsort(-eig.real)]


def operator_identity_residual(
    sys: TransformSystem, modes: Sequence[EigenMode]
) -> float:
    """Normalized residual of T M = (diag(-lam_k) - lam I) T on the low block.

    Only the leading (N/2) x (N/2) block enters: the identity is one of
    infinite series and the truncation contaminates the top of the spectrum
    first.
    """
    lams = np.array([m.lam for m in modes])
    m_mat = closed_loop_matrix(sys, modes)
    target = np.diag(-lams - sys.config.decay_rate)
    resid = sys.T_mat @ m_mat - target @ sys.T_mat
    half = sys.truncation // 2
    block = resid[:half, :half]
    scale = np.linalg.norm(sys.T_mat[:half, :half]) * np.max(lams[:half])
    return float(np.linalg.norm(block) / scale)


def write_matrix_csv(mat: np.ndarray, path, prefix: str = "c") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"{prefix}{j + 1}" for j in range(mat.shape[1])])
        for row in mat:
            writer.writerow([f"{v:.17g}" for v in row])


def write_spectrum_csv(spectrum: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im"])
        for z in spectrum:
            writer.writerow([f"{z.real:.17g}", f"{z.imag:.17g}"])


def write_summary_json(sys: TransformSystem, modes: Sequence[EigenMode], path) -> dict:
    """JSON diagnostics: sigma_min, identity residuals, spectrum match error."""
    spectrum = closed_loop_spectrum(sys, modes)
    lams = np.array([m.lam for m in modes])
    expected = np.sort(lams + sys.config.decay_rate)
    observed = np.sort(-spectrum.real)
    half = sys.truncation // 2
    spec_err = float(
        np.max(np.abs(observed[:half] - expected[:half]) / expected[:half])
    )
    summary = {
        "truncation": sys.truncation,
        "decay_rate": sys.config.decay_rate,
        "sigma_min": sys.sigma_min,
        "sigma_max": sys.sigma_max,
        "condition": sys.sigma_max / sys.sigma_min,
        "tb_residual_max": float(np.max(np.abs(tb_residual(sys)))),
        "operator_identity_residual": operator_identity_residual(sys, modes),
        "spectrum_shift_rel_error_low_half": spec_err,
        "max_spectrum_imag": float(np.max(np.abs(spectrum.imag))),
    }
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
