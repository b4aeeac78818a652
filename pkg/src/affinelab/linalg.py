"""Matrix utilities for the pathwise construction and moment formulas.

Two factorizations feed the simulator:

* ``factor_a`` -- symmetric PSD square root of the real-block diffusion
  matrix (eigendecomposition with eigenvalue clamping; Cholesky is avoided
  because the inputs may be exactly rank deficient),
* ``factor_alpha`` -- the lower-block-triangular factor of each branching
  diffusion matrix ``alpha_j``.  The branching block carries the single
  entry ``sqrt(alpha_j[j,j])`` at position ``(j, j)``; the mixed block is
  then forced to ``alpha[real, j] / sqrt(alpha_j[j,j])`` and the real block
  is the PSD square root of the remaining Schur complement.  This is the
  canonical representative; any factor with the same block shape yields the
  same covariance.

``expm`` and ``drift_integral`` support the closed-form first-moment
formulas: the integral ``int_0^t exp(sA) v ds`` is evaluated exactly through
the exponential of the augmented matrix ``[[A, v], [0, 0]]``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = [
    "DiffusionFactors",
    "factor_a",
    "factor_alpha",
    "build_factors",
    "expm",
    "drift_integral",
    "convolution_kernel",
]


def sym_sqrt(mat: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root with eigenvalue clamping at zero."""
    mat = np.asarray(mat, dtype=float)
    if mat.size == 0:
        return mat.reshape(mat.shape)
    if not np.allclose(mat, mat.T, atol=1e-10, rtol=0.0):
        raise ValueError("matrix must be symmetric")
    w, v = np.linalg.eigh(0.5 * (mat + mat.T))
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.T
    return 0.5 * (root + root.T)


def factor_a(a_real: np.ndarray) -> np.ndarray:
    """PSD square root of the real-block diffusion matrix."""
    return sym_sqrt(a_real)


def factor_alpha(alpha_j: np.ndarray, j: int, m: int) -> np.ndarray:
    """Lower-block-triangular factor of one branching diffusion matrix.

    Requires ``alpha_j`` to satisfy the admissibility block structure for
    index ``j`` (branching block supported on the single entry ``(j, j)``).
    Returns ``sigma_j`` with ``sigma_j @ sigma_j.T == alpha_j``.
    """
    alpha_j = np.asarray(alpha_j, dtype=float)
    d = alpha_j.shape[0]
    ajj = alpha_j[j, j]
    if ajj < 0:
        raise ValueError(f"alpha[{j},{j}] must be nonnegative")
    sigma = np.zeros((d, d))
    cross = alpha_j[m:, j]
    if ajj == 0.0:
        if np.any(cross != 0.0):
            raise ValueError(
                f"alpha_{j} is not PSD: zero branching variance with nonzero cross terms"
            )
        col = np.zeros(d - m)
    else:
        sigma[j, j] = np.sqrt(ajj)
        col = cross / np.sqrt(ajj)
        sigma[m:, j] = col
    schur = alpha_j[m:, m:] - np.outer(col, col)
    sigma[m:, m:] = sym_sqrt(schur)
    return sigma


class DiffusionFactors:
    """Precomputed diffusion factors for a parameter set."""

    def __init__(self, sigma_a: np.ndarray, sigma: tuple):
        self.sigma_a = sigma_a
        self.sigma = tuple(sigma)


def build_factors(params) -> DiffusionFactors:
    """Factor the diffusion matrices of an admissible parameter set."""
    m = params.dims.m
    sigma_a = factor_a(params.a_real_block())
    sigma = tuple(factor_alpha(params.alpha[i], i, m) for i in range(m))
    return DiffusionFactors(sigma_a, sigma)


def expm(mat: np.ndarray, t: float = 1.0) -> np.ndarray:
    """``exp(t * mat)`` by scaling-and-squaring with Pade approximation."""
    mat = np.asarray(mat, dtype=float)
    if mat.size == 0:
        return mat.reshape(mat.shape)
    return scipy.linalg.expm(t * mat)


def drift_integral(mat: np.ndarray, vec: np.ndarray, t: float) -> np.ndarray:
    """``int_0^t exp(s * mat) vec ds`` via the augmented exponential."""
    mat = np.asarray(mat, dtype=float)
    vec = np.asarray(vec, dtype=float)
    if t < 0:
        raise ValueError("t must be nonnegative")
    d = mat.shape[0]
    if d == 0:
        return np.zeros(0)
    aug = np.zeros((d + 1, d + 1))
    aug[:d, :d] = mat
    aug[:d, d] = vec
    return expm(aug, t)[:d, d]


def convolution_kernel(top: np.ndarray, mid: np.ndarray, bottom: np.ndarray, t: float) -> np.ndarray:
    """``int_0^t exp((t-s) top) mid exp(s bottom) ds`` via a block exponential.

    Used by the block first-moment formulas to couple the branching mean
    into the real coordinates.
    """
    p, q = top.shape[0], bottom.shape[0]
    if p == 0 or q == 0:
        return np.zeros((p, q))
    aug = np.zeros((p + q, p + q))
    aug[:p, :p] = top
    aug[:p, p:] = mid
    aug[p:, p:] = bottom
    return expm(aug, t)[:p, p:]
