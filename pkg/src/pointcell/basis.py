"""Hierarchic p-version shape functions on the reference square [-1, 1]^2.

The 1D basis holds the two linear hat functions plus integrated Legendre
modes (L_j - L_{j-2}) / sqrt(4j - 2) for j = 2..p, which vanish at both ends;
2D functions are the full tensor product, (p + 1)^2 modes per cell.  Mode
(a, b) is stored at flat index a * (p + 1) + b.
"""

from __future__ import annotations

import numpy as np


def _legendre_table(p: int, x: np.ndarray):
    """Legendre polynomials L_0..L_p and derivatives at x, shape (p + 1, m)."""
    m = x.size
    L = np.empty((p + 1, m))
    dL = np.empty((p + 1, m))
    L[0] = 1.0
    dL[0] = 0.0
    if p >= 1:
        L[1] = x
        dL[1] = 1.0
    for j in range(2, p + 1):
        L[j] = ((2 * j - 1) * x * L[j - 1] - (j - 1) * L[j - 2]) / j
        dL[j] = ((2 * j - 1) * (L[j - 1] + x * dL[j - 1]) - (j - 1) * dL[j - 2]) / j
    return L, dL


def shape_functions_1d(p: int, x):
    """Values and derivatives of the p + 1 hierarchic 1D modes at x.

    Mode 0 and 1 are the hats (1 -+ x)/2; mode j >= 2 is the integrated
    Legendre function of polynomial degree j.  Returns (N, dN), each of shape
    (p + 1, m).
    """
    if p < 1:
        raise ValueError(f"polynomial degree must be >= 1, got {p}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    L, dL = _legendre_table(p, x)
    N = np.empty((p + 1, x.size))
    dN = np.empty((p + 1, x.size))
    N[0] = 0.5 * (1.0 - x)
    dN[0] = -0.5
    N[1] = 0.5 * (1.0 + x)
    dN[1] = 0.5
    for j in range(2, p + 1):
        s = 1.0 / np.sqrt(4.0 * j - 2.0)
        N[j] = (L[j] - L[j - 2]) * s
        dN[j] = (dL[j] - dL[j - 2]) * s
    return N, dN


def eval_basis(p: int, xi, eta):
    """All (p + 1)^2 tensor modes and their reference gradients at (xi, eta).

    xi, eta are arrays of equal length m inside [-1, 1]; returns
    (values, d_xi, d_eta), each of shape (m, (p + 1)^2).
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if xi.shape != eta.shape:
        raise ValueError(f"xi and eta differ in shape: {xi.shape} vs {eta.shape}")
    if np.any((xi < -1.0) | (xi > 1.0) | (eta < -1.0) | (eta > 1.0)):
        raise ValueError("local coordinates outside the reference square [-1, 1]^2")
    Nx, dNx = shape_functions_1d(p, xi)
    Ny, dNy = shape_functions_1d(p, eta)
    m = xi.size
    n1 = p + 1
    vals = (Nx[:, None, :] * Ny[None, :, :]).reshape(n1 * n1, m).T
    dxi = (dNx[:, None, :] * Ny[None, :, :]).reshape(n1 * n1, m).T
    deta = (Nx[:, None, :] * dNy[None, :, :]).reshape(n1 * n1, m).T
    return vals, dxi, deta


def eval_values(p: int, xi, eta):
    """Tensor mode values only, shape (m, (p + 1)^2)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if np.any((xi < -1.0) | (xi > 1.0) | (eta < -1.0) | (eta > 1.0)):
        raise ValueError("local coordinates outside the reference square [-1, 1]^2")
    Nx, _ = shape_functions_1d(p, xi)
    Ny, _ = shape_functions_1d(p, eta)
    n1 = p + 1
    return (Nx[:, None, :] * Ny[None, :, :]).reshape(n1 * n1, xi.size).T
