"""Structured embedding mesh, fictitious-domain assembly and solution access.

The physical domain is embedded in a rectangle meshed by nx x ny equal cells
carrying tensor shape functions of degree p.  An indicator field classifies
points as physical or fictitious; the fictitious material is scaled by a small
alpha so the discrete operator stays regular without meshing the boundary.
Volume terms are integrated on indicator-driven quadtrees per cell.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import basis as basis_mod
from .errors import MeshQueryError, SolverError
from .quadrature import build_alpha_tree, gauss_legendre_1d, tree_quadrature_points

# Cut-cell quadrature points are streamed through dense kernels in chunks of
# this many points to bound peak memory at high p.
_CHUNK = 200_000


class StructuredMesh:
    """Uniform rectangular grid with a shared polynomial degree.

    Scalar degrees of freedom are the tensor product of two 1D p-version dof
    lines (vertices first, then per-element internal modes), which makes the
    basis C0 across cell interfaces without any orientation bookkeeping.
    """

    def __init__(self, origin, lengths, nx: int, ny: int, degree: int):
        if nx < 1 or ny < 1:
            raise ValueError(f"cell counts must be >= 1, got {nx} x {ny}")
        if degree < 1:
            raise ValueError(f"degree must be >= 1, got {degree}")
        self.origin = np.asarray(origin, dtype=float).reshape(2)
        self.lengths = np.asarray(lengths, dtype=float).reshape(2)
        if not np.all(self.lengths > 0.0):
            raise ValueError(f"mesh extents must be positive, got {self.lengths}")
        self.nx = int(nx)
        self.ny = int(ny)
        self.degree = int(degree)
        self.hx = self.lengths[0] / self.nx
        self.hy = self.lengths[1] / self.ny
        p = self.degree
        self.n1x = self.nx * p + 1
        self.n1y = self.ny * p + 1
        self.n_scalar_dofs = self.n1x * self.n1y
        self._dof_1d_x = self._dof_line(self.nx)
        self._dof_1d_y = self._dof_line(self.ny)

    def _dof_line(self, ne):
        p = self.degree
        table = np.empty((ne, p + 1), dtype=int)
        for e in range(ne):
            table[e, 0] = e
            table[e, 1] = e + 1
            for a in range(2, p + 1):
                table[e, a] = (ne + 1) + e * (p - 1) + (a - 2)
        return table

    def cell_bounds(self, ix: int, iy: int):
        x0 = self.origin[0] + ix * self.hx
        y0 = self.origin[1] + iy * self.hy
        return np.array([x0, y0, x0 + self.hx, y0 + self.hy])

    def cells(self):
        for iy in range(self.ny):
            for ix in range(self.nx):
                yield ix, iy

    def cell_dofs(self, ix: int, iy: int):
        """Global scalar dof ids of cell (ix, iy) in flat tensor mode order."""
        gx = self._dof_1d_x[ix]
        gy = self._dof_1d_y[iy]
        return (gx[:, None] * self.n1y + gy[None, :]).reshape(-1)

    def locate(self, xs):
        """Cell indices and local coordinates for points xs (m, 2)."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        rel = xs - self.origin
        tol = 1e-12 * max(self.lengths)
        if np.any(rel < -tol) or np.any(rel > self.lengths + tol):
            bad = xs[np.any((rel < -tol) | (rel > self.lengths + tol), axis=1)][0]
            raise MeshQueryError(f"point {bad} lies outside the mesh")
        ix = np.clip((rel[:, 0] // self.hx).astype(int), 0, self.nx - 1)
        iy = np.clip((rel[:, 1] // self.hy).astype(int), 0, self.ny - 1)
        xi = np.clip(2.0 * (rel[:, 0] - ix * self.hx) / self.hx - 1.0, -1.0, 1.0)
        eta = np.clip(2.0 * (rel[:, 1] - iy * self.hy) / self.hy - 1.0, -1.0, 1.0)
        return ix, iy, xi, eta

    def local_coords(self, ix, iy, xs):
        """Local coordinates of xs within a known cell, computed exactly at
        the center (no clipping)."""
        b = self.cell_bounds(ix, iy)
        xc = 0.5 * (b[0] + b[2])
        yc = 0.5 * (b[1] + b[3])
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return (xs[:, 0] - xc) * (2.0 / self.hx), (xs[:, 1] - yc) * (2.0 / self.hy)

    def boundary_scalar_dofs(self):
        """Scalar dofs whose basis functions are nonzero on the mesh boundary."""
        A = np.arange(self.n1x)
        B = np.arange(self.n1y)
        on_x = np.isin(A, [0, self.nx])
        on_y = np.isin(B, [0, self.ny])
        grid = on_x[:, None] | on_y[None, :]
        return np.nonzero(grid.reshape(-1))[0]


@dataclass(frozen=True)
class PoissonCoefficient:
    """Scalar diffusion material: integrand c * grad u . grad w."""

    c: float = 1.0
    ncomp: int = field(default=1, init=False)

    def __post_init__(self):
        if not self.c > 0.0:
            raise ValueError(f"diffusion coefficient must be positive, got {self.c}")


@dataclass(frozen=True)
class PlaneStress:
    """Linear elastic plane stress material."""

    E: float = 1.0
    nu: float = 0.3
    ncomp: int = field(default=2, init=False)

    def __post_init__(self):
        if not self.E > 0.0:
            raise ValueError(f"Young's modulus must be positive, got {self.E}")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {self.nu}")

    def moduli(self):
        d11 = self.E / (1.0 - self.nu**2)
        return d11, self.nu * d11, 0.5 * self.E / (1.0 + self.nu)


@dataclass(frozen=True)
class IndicatorField:
    """Physical-domain classifier with fictitious stiffness scaling.

    inside maps (m, 2) points to a boolean array; alpha multiplies both the
    stiffness and the body-force integrand (1 inside, alpha_fic outside).
    """

    inside: object
    alpha_fic: float = 1e-8

    def alpha(self, pts):
        flags = np.asarray(self.inside(pts), dtype=bool)
        return np.where(flags, 1.0, self.alpha_fic)


def everywhere(pts):
    """Indicator for a purely physical embedding domain."""
    return np.ones(pts.shape[0], dtype=bool)


@dataclass
class GlobalSystem:
    """Assembled sparse operator and load vector.

    ncomp is 1 for scalar problems and 2 for plane stress (dofs interleaved
    per scalar dof).  stats carries assembly counters.
    """

    K: sp.csr_matrix
    f: np.ndarray
    mesh: StructuredMesh
    ncomp: int = 1
    stats: dict = field(default_factory=dict)
    last_residual: float | None = None

    @property
    def ndof(self):
        return self.f.size

    def plus(self, K_add, f_add, scale: float = 1.0) -> "GlobalSystem":
        """New system with scale * (K_add, f_add) added; inputs unchanged."""
        return GlobalSystem(
            K=(self.K + scale * K_add).tocsr(),
            f=self.f + scale * f_add,
            mesh=self.mesh,
            ncomp=self.ncomp,
            stats=dict(self.stats),
        )


def _scatter(rows, cols, vals, dofs, Ke, ncomp):
    if ncomp == 1:
        idx = dofs
    else:
        idx = np.empty(2 * dofs.size, dtype=int)
        idx[0::2] = 2 * dofs
        idx[1::2] = 2 * dofs + 1
    n = idx.size
    rows.append(np.repeat(idx, n))
    cols.append(np.tile(idx, n))
    vals.append(Ke.reshape(-1))


def assemble_volume(mesh: StructuredMesh, material, indicator: IndicatorField,
                    body=None, tree_depth: int = 0, n_gauss: int | None = None) -> GlobalSystem:
    """Volume stiffness and body load over the embedding domain.

    Each cell is integrated on an indicator-driven quadtree of depth
    tree_depth with an n_gauss x n_gauss Gauss rule per leaf (default
    p + 1 points).  body maps (m, 2) points to (m,) values (scalar) or
    (m, ncomp) rows; the indicator's alpha multiplies both integrands.
    """
    p = mesh.degree
    ncomp = material.ncomp
    if n_gauss is None:
        n_gauss = p + 1
    rule = gauss_legendre_1d(n_gauss)
    nmodes = (p + 1) ** 2
    ndof = mesh.n_scalar_dofs * ncomp
    fvec = np.zeros(ndof)
    rows, cols, vals = [], [], []
    n_points = 0
    n_cut = 0
    for ix, iy in mesh.cells():
        bounds = mesh.cell_bounds(ix, iy)
        tree = build_alpha_tree(bounds, indicator.inside, tree_depth)
        if tree.n_leaves > 1:
            n_cut += 1
        pts, wts, _ = tree_quadrature_points(tree, rule)
        n_points += pts.shape[0]
        dofs = mesh.cell_dofs(ix, iy)
        Ke = np.zeros((nmodes * ncomp, nmodes * ncomp))
        fe = np.zeros(nmodes * ncomp)
        for start in range(0, pts.shape[0], _CHUNK):
            cp = pts[start:start + _CHUNK]
            cw = wts[start:start + _CHUNK] * indicator.alpha(cp)
            xi, eta = mesh.local_coords(ix, iy, cp)
            V, Gxi, Geta = basis_mod.eval_basis(p, xi, eta)
            Gx = Gxi * (2.0 / mesh.hx)
            Gy = Geta * (2.0 / mesh.hy)
            if ncomp == 1:
                c = material.c
                Ke += c * ((Gx * cw[:, None]).T @ Gx + (Gy * cw[:, None]).T @ Gy)
                if body is not None:
                    fe += V.T @ (cw * np.asarray(body(cp), dtype=float))
            else:
                d11, d12, d33 = material.moduli()
                Kxx = d11 * (Gx * cw[:, None]).T @ Gx + d33 * (Gy * cw[:, None]).T @ Gy
                Kyy = d11 * (Gy * cw[:, None]).T @ Gy + d33 * (Gx * cw[:, None]).T @ Gx
                Kxy = d12 * (Gx * cw[:, None]).T @ Gy + d33 * (Gy * cw[:, None]).T @ Gx
                Ke[0::2, 0::2] += Kxx
                Ke[1::2, 1::2] += Kyy
                Ke[0::2, 1::2] += Kxy
                Ke[1::2, 0::2] += Kxy.T
                if body is not None:
                    b = np.asarray(body(cp), dtype=float).reshape(cp.shape[0], 2)
                    fe[0::2] += V.T @ (cw * b[:, 0])
                    fe[1::2] += V.T @ (cw * b[:, 1])
        _scatter(rows, cols, vals, dofs, Ke, ncomp)
        if ncomp == 1:
            np.add.at(fvec, dofs, fe)
        else:
            np.add.at(fvec, 2 * dofs, fe[0::2])
            np.add.at(fvec, 2 * dofs + 1, fe[1::2])
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ndof, ndof),
    ).tocsr()
    K = 0.5 * (K + K.T)
    return GlobalSystem(K=K.tocsr(), f=fvec, mesh=mesh, ncomp=ncomp,
                        stats={"volume_points": n_points, "cut_cells": n_cut})


def solve(system: GlobalSystem, rtol: float = 1e-10) -> np.ndarray:
    """Direct sparse solve of K u = f with a relative residual check.

    The factorization is sparse LU; the relative residual is stored on
    system.last_residual and a SolverError is raised when the factorization
    fails outright (typically a system with no Dirichlet constraints at all).
    """
    K = system.K.tocsc()
    try:
        lu = spla.splu(K)
        u = lu.solve(system.f)
    except RuntimeError as exc:
        raise SolverError(
            f"sparse factorization failed ({exc}); the system is singular, "
            "check that Dirichlet constraints (penalty or strong) were added"
        ) from None
    if not np.all(np.isfinite(u)):
        raise SolverError("solution contains non-finite entries; system is singular "
                          "or lacks Dirichlet constraints")
    scale = max(float(np.linalg.norm(system.f)), np.finfo(float).tiny)
    system.last_residual = float(np.linalg.norm(system.K @ u - system.f) / scale)
    if system.last_residual > rtol:
        warnings.warn(f"solver residual {system.last_residual:.3e} exceeds {rtol:.1e}",
                      RuntimeWarning, stacklevel=2)
    return u


def apply_strong_zero(system: GlobalSystem, scalar_dofs) -> GlobalSystem:
    """Homogeneous strong constraints by row/column elimination.

    scalar_dofs index scalar basis functions; for vector problems both
    components of each are fixed.  Eliminated rows and columns are zeroed
    with a unit diagonal and zero load.
    """
    scalar_dofs = np.asarray(scalar_dofs, dtype=int)
    if system.ncomp == 1:
        fixed = scalar_dofs
    else:
        fixed = np.concatenate([2 * scalar_dofs, 2 * scalar_dofs + 1])
    free = np.ones(system.ndof)
    free[fixed] = 0.0
    D = sp.diags(free)
    pin = sp.diags(1.0 - free)
    K = (D @ system.K @ D + pin).tocsr()
    f = system.f * free
    return GlobalSystem(K=K, f=f, mesh=system.mesh, ncomp=system.ncomp,
                        stats=dict(system.stats))


def evaluate(mesh: StructuredMesh, coeffs: np.ndarray, xs, ncomp: int = 1,
             gradients: bool = False):
    """Discrete field (and optionally gradients) at points inside the mesh.

    Returns values of shape (m,) for scalar fields or (m, 2) for vector
    fields; with gradients=True a tuple (values, grads) where grads has one
    xy pair per component.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    p = mesh.degree
    ix, iy, xi, eta = mesh.locate(xs)
    m = xs.shape[0]
    vals = np.zeros((m, ncomp))
    grads = np.zeros((m, ncomp, 2)) if gradients else None
    cell_ids = ix * mesh.ny + iy
    for cid in np.unique(cell_ids):
        sel = np.nonzero(cell_ids == cid)[0]
        cx, cy = int(cid) // mesh.ny, int(cid) % mesh.ny
        dofs = mesh.cell_dofs(cx, cy)
        V, Gxi, Geta = basis_mod.eval_basis(p, xi[sel], eta[sel])
        for comp in range(ncomp):
            cc = coeffs[ncomp * dofs + comp] if ncomp > 1 else coeffs[dofs]
            vals[sel, comp] = V @ cc
            if gradients:
                grads[sel, comp, 0] = (Gxi * (2.0 / mesh.hx)) @ cc
                grads[sel, comp, 1] = (Geta * (2.0 / mesh.hy)) @ cc
    if ncomp == 1:
        vals = vals[:, 0]
        if gradients:
            grads = grads[:, 0, :]
    return (vals, grads) if gradients else vals


def strain_energy(volume_system: GlobalSystem, coeffs: np.ndarray) -> float:
    """Energy 0.5 u^T K u of the volume (penalty-free) operator."""
    return 0.5 * float(coeffs @ (volume_system.K @ coeffs))
