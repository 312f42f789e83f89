"""Penalty enforcement of Dirichlet data given only as a boundary point cloud.

Two routes produce the penalty matrix and load:

Diffuse route: the boundary integral is widened into a thin volume layer by
composing a cosine-bump approximation of a Dirac delta with the plane-fit
distance, then integrated on a distance-driven quadtree per cell.  The layer
has finite thickness, so at strong penalties the constraint also grips the
solution just off the boundary, which flattens its normal gradient there.

Sharp route: the boundary is rebuilt cell-locally as bounded plane segments.
Each order-k Voronoi region met by a cell contributes the local TLS plane of
its k defining points; the segment of that plane inside the region is bounded
by bisection, and the resulting line quadrature points are kept only when they
actually lie in the region and in the cell (two indicator checks per point).
Points sit on the reconstructed boundary itself, so nothing constrains the
field away from it, and far fewer points are needed than in the layer.

A reference integrator over explicit polyline segments serves as the ground
truth for both.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import basis as basis_mod
from .errors import SharpBoundaryWarning
from .fcm import GlobalSystem, StructuredMesh
from .geometry import (DistanceParams, PointCloud, _knn_indices_many,
                       _smallest_eigvec_2x2, pca_distance_many)
from .quadrature import (DiffuseTreeParams, build_diffuse_tree,
                         gauss_legendre_1d, regularized_delta_raw,
                         tree_quadrature_points)
from .voronoi import region_keys_many


@dataclass(frozen=True)
class PenaltyParams:
    """Penalty factor beta and prescribed boundary value.

    u_hat is a constant or a callable mapping (m, 2) points to (m,) values
    ((m, ncomp) rows for vector problems); it is evaluated at the penalty
    quadrature points.
    """

    beta: float
    u_hat: object = 0.0

    def values(self, pts, ncomp: int = 1):
        if callable(self.u_hat):
            out = np.asarray(self.u_hat(pts), dtype=float)
        else:
            out = np.full(pts.shape[0] if ncomp == 1 else (pts.shape[0], ncomp),
                          float(self.u_hat))
        if ncomp == 1:
            return out.reshape(pts.shape[0])
        return out.reshape(pts.shape[0], ncomp)


@dataclass(frozen=True)
class DiffuseParams:
    """Diffuse-layer controls: half-width, tree depth, rule order."""

    epsilon: float
    n_sub: int
    n_gauss: int
    eps_d: float = 1e-5
    test_grid: int = 5

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.n_sub < 0:
            raise ValueError(f"tree depth must be >= 0, got {self.n_sub}")
        if self.n_gauss < 1:
            raise ValueError(f"n_gauss must be >= 1, got {self.n_gauss}")

    def tree_params(self):
        return DiffuseTreeParams(epsilon=self.epsilon, n_sub=self.n_sub,
                                 test_grid=self.test_grid, eps_d=self.eps_d)


@dataclass(frozen=True)
class SharpParams:
    """Sharp-interface controls.

    n_query: query-tree depth used to find contributing Voronoi regions.
    test_grid: per-subcell sample points per direction (cell-centered).
    l_max: initial plane-segment length, of the order of a few point spacings.
    n_sub: bisection depth bounding each segment to its region.
    n_gauss: rule order per kept subsegment.
    halfdiag_factor scales the subcell half-diagonal in the pruning distance
    d_max = factor * halfdiag + r.
    """

    n_query: int
    n_sub: int
    n_gauss: int
    l_max: float
    test_grid: int = 3
    halfdiag_factor: float = 1.0

    def __post_init__(self):
        if self.n_query < 0 or self.n_sub < 0:
            raise ValueError("tree depths must be >= 0")
        if not self.l_max > 0.0:
            raise ValueError(f"l_max must be positive, got {self.l_max}")
        if self.test_grid < 1:
            raise ValueError(f"test_grid must be >= 1, got {self.test_grid}")


@dataclass
class BoundedSegment:
    """Plane segment of one Voronoi region after bisection.

    intervals holds (m, 2) parameter ranges along the unit direction,
    measured from the support point; kept subsegments are disjoint and lie
    within l_max/2 of the support.
    """

    key: tuple
    support: np.ndarray
    direction: np.ndarray
    intervals: np.ndarray

    @property
    def total_length(self):
        if self.intervals.size == 0:
            return 0.0
        return float(np.sum(self.intervals[:, 1] - self.intervals[:, 0]))

    def endpoints(self):
        """(m, 4) rows x0, y0, x1, y1 of the kept subsegments."""
        a = self.support[None, :] + self.intervals[:, 0, None] * self.direction[None, :]
        b = self.support[None, :] + self.intervals[:, 1, None] * self.direction[None, :]
        return np.hstack([a, b])


def regularized_delta(t, epsilon: float):
    """Cosine-bump delta approximation with unit mass and support [-eps, eps]."""
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    arr = regularized_delta_raw(np.asarray(t, dtype=float), epsilon)
    return float(arr) if np.isscalar(t) else arr


# ---------------------------------------------------------------------------
# diffuse route


def diffuse_penalty_cell(mesh: StructuredMesh, ix: int, iy: int, cloud: PointCloud,
                         dparams: DistanceParams, diff: DiffuseParams,
                         pen: PenaltyParams, ncomp: int = 1):
    """Penalty matrix/vector of one cell via the regularized-delta layer.

    Returns (Ke, fe, n_points) in cell-local dense form; every leaf of the
    distance-driven tree is integrated, whether or not it sensed the layer.
    """
    bounds = mesh.cell_bounds(ix, iy)
    dist = lambda pts: pca_distance_many(cloud, pts, dparams)
    tree = build_diffuse_tree(bounds, dist, diff.tree_params())
    rule = gauss_legendre_1d(diff.n_gauss)
    pts, wts, _ = tree_quadrature_points(tree, rule)
    d = pca_distance_many(cloud, pts, dparams)
    w = wts * regularized_delta_raw(d, diff.epsilon)
    return _accumulate_point_penalty(mesh, ix, iy, pts, w, pen, ncomp) + (pts.shape[0],)


def _accumulate_point_penalty(mesh, ix, iy, pts, w, pen, ncomp):
    """Accumulate beta * sum w N^T N and beta * sum w N^T u_hat for a cell."""
    p = mesh.degree
    nmodes = (p + 1) ** 2
    if pts.shape[0] == 0:
        return np.zeros((nmodes * ncomp, nmodes * ncomp)), np.zeros(nmodes * ncomp)
    w = w * pen.beta
    xi, eta = mesh.local_coords(ix, iy, pts)
    V = basis_mod.eval_values(p, np.clip(xi, -1.0, 1.0), np.clip(eta, -1.0, 1.0))
    uh = pen.values(pts, ncomp)
    if ncomp == 1:
        Ke = (V * w[:, None]).T @ V
        fe = V.T @ (w * uh)
        return Ke, fe
    Ks = (V * w[:, None]).T @ V
    Ke = np.zeros((nmodes * 2, nmodes * 2))
    Ke[0::2, 0::2] = Ks
    Ke[1::2, 1::2] = Ks
    fe = np.zeros(nmodes * 2)
    fe[0::2] = V.T @ (w * uh[:, 0])
    fe[1::2] = V.T @ (w * uh[:, 1])
    return Ke, fe


# ---------------------------------------------------------------------------
# sharp route


def _subcell_test_points(cells, g):
    """Cell-centered g x g sample lattice of each cell, (m * g * g, 2)."""
    x0, y0 = cells[:, 0], cells[:, 1]
    w = cells[:, 2] - cells[:, 0]
    h = cells[:, 3] - cells[:, 1]
    frac = (np.arange(g) + 0.5) / g
    px = x0[:, None, None] + w[:, None, None] * frac[None, :, None]
    py = y0[:, None, None] + h[:, None, None] * frac[None, None, :]
    return np.stack(np.broadcast_arrays(px, py), axis=-1).reshape(-1, 2)


def _split_cells(cells):
    x0, y0, x1, y1 = cells[:, 0], cells[:, 1], cells[:, 2], cells[:, 3]
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return np.concatenate([
        np.column_stack([x0, y0, xm, ym]),
        np.column_stack([xm, y0, x1, ym]),
        np.column_stack([x0, ym, xm, y1]),
        np.column_stack([xm, ym, x1, y1]),
    ], axis=0)


def identify_contributing_regions(cell_bounds, cloud: PointCloud,
                                  dparams: DistanceParams, sparams: SharpParams):
    """Order-k Voronoi region keys whose regions may intersect a cell.

    A query quadtree over the cell keeps, per level, the subcells whose center
    distance does not exceed d_max = halfdiag_factor * halfdiag + r; the
    surviving deepest subcells are sampled on a cell-centered test grid and
    the keys at sample points within r of their nearest cloud point are
    collected (sample points beyond r lie outside the reconstruction zone).
    With r = inf no pruning or exclusion happens at all.

    Returns the unique keys in lexicographic order as a list of tuples.
    """
    active = np.asarray(cell_bounds, dtype=float).reshape(1, 4)
    prune = np.isfinite(dparams.r)
    for depth in range(sparams.n_query + 1):
        if active.shape[0] == 0:
            return []
        if prune:
            w = active[:, 2] - active[:, 0]
            h = active[:, 3] - active[:, 1]
            halfdiag = 0.5 * np.hypot(w[0], h[0])
            d_max = sparams.halfdiag_factor * halfdiag + dparams.r
            centers = np.column_stack([0.5 * (active[:, 0] + active[:, 2]),
                                       0.5 * (active[:, 1] + active[:, 3])])
            d = pca_distance_many(cloud, centers, dparams)
            active = active[d <= d_max]
            if active.shape[0] == 0:
                return []
        if depth < sparams.n_query:
            active = _split_cells(active)
    pts = _subcell_test_points(active, sparams.test_grid)
    idx, dist = _knn_indices_many(cloud, pts, dparams.k)
    within = dist[:, 0] <= dparams.r
    if not np.any(within):
        return []
    keys = np.sort(idx[within], axis=1)
    return [tuple(int(i) for i in row) for row in np.unique(keys, axis=0)]


def _fit_planes_for_keys(cloud, keys_arr):
    """Batched TLS plane fit over the defining points of each key row.

    Returns (support, normal, degenerate) arrays.
    """
    pts = cloud.points[keys_arr]                 # (R, k, 2)
    cen = pts.mean(axis=1)
    d = pts - cen[:, None, :]
    a = np.einsum("rk,rk->r", d[:, :, 0], d[:, :, 0])
    b = np.einsum("rk,rk->r", d[:, :, 0], d[:, :, 1])
    c = np.einsum("rk,rk->r", d[:, :, 1], d[:, :, 1])
    vx, vy, iso = _smallest_eigvec_2x2(a, b, c)
    normal = np.column_stack([vx, vy])
    return cen, normal, iso


def _bisect_batched(cloud: PointCloud, keys_arr, supports, tangents,
                    sparams: SharpParams, k: int):
    """Region-bounded subsegments for many regions at once.

    Returns (region_row, lo, hi) arrays; parameters measured along each
    region's unit tangent from its support point.
    """
    R = keys_arr.shape[0]
    half = 0.5 * sparams.l_max
    row = np.arange(R)
    lo = np.full(R, -half)
    hi = np.full(R, half)
    kept_row, kept_lo, kept_hi = [], [], []

    def contains(rows, ts):
        pts = supports[rows] + ts[:, None] * tangents[rows]
        keys = region_keys_many(cloud, pts, k)
        return np.all(keys == keys_arr[rows], axis=1)

    for level in range(sparams.n_sub + 1):
        if row.size == 0:
            break
        mid = 0.5 * (lo + hi)
        stacked_rows = np.concatenate([row, row, row])
        stacked_t = np.concatenate([lo, mid, hi])
        flags = contains(stacked_rows, stacked_t).reshape(3, row.size)
        all_in = flags.all(axis=0)
        none_in = ~flags.any(axis=0)
        mixed = ~(all_in | none_in)
        if np.any(all_in):
            kept_row.append(row[all_in])
            kept_lo.append(lo[all_in])
            kept_hi.append(hi[all_in])
        if level == sparams.n_sub:
            if np.any(mixed):
                kept_row.append(row[mixed])
                kept_lo.append(lo[mixed])
                kept_hi.append(hi[mixed])
            break
        row_m, lo_m, hi_m, mid_m = row[mixed], lo[mixed], hi[mixed], mid[mixed]
        row = np.concatenate([row_m, row_m])
        lo = np.concatenate([lo_m, mid_m])
        hi = np.concatenate([mid_m, hi_m])
    if not kept_row:
        return (np.zeros(0, dtype=int), np.zeros(0), np.zeros(0))
    row = np.concatenate(kept_row)
    lo = np.concatenate(kept_lo)
    hi = np.concatenate(kept_hi)
    order = np.lexsort((lo, row))
    row, lo, hi = row[order], lo[order], hi[order]
    # Sibling pieces share their split float exactly, so contiguous kept runs
    # merge on equality; one rule per run instead of one per dyadic sliver.
    new_run = np.ones(row.size, dtype=bool)
    new_run[1:] = (row[1:] != row[:-1]) | (lo[1:] != hi[:-1])
    starts = np.nonzero(new_run)[0]
    ends = np.r_[starts[1:], row.size] - 1
    return row[starts], lo[starts], hi[ends]


def bisect_plane_segments(cloud: PointCloud, key, dparams: DistanceParams,
                          sparams: SharpParams) -> BoundedSegment | None:
    """Bounded plane segment of a single region.

    Fits the TLS plane of the key's defining points, lays a segment of length
    l_max along its tangent through the support point and bisects it to depth
    n_sub, keeping subsegments fully inside the region and, conservatively,
    the still-intersected ones at the final level.  Returns None (with a
    warning) when the fit is isotropic or the support fell outside its own
    region; the caller skips such regions.
    """
    key_arr = np.asarray(key, dtype=int).reshape(1, -1)
    k = key_arr.shape[1]
    support, normal, iso = _fit_planes_for_keys(cloud, key_arr)
    if bool(iso[0]):
        warnings.warn(f"region {tuple(key)}: isotropic neighbor set, skipped",
                      SharpBoundaryWarning, stacklevel=2)
        return None
    tangent = np.column_stack([-normal[:, 1], normal[:, 0]])
    inside = region_keys_many(cloud, support, k)
    if not np.array_equal(np.sort(inside[0]), key_arr[0]):
        warnings.warn(f"region {tuple(key)}: support point outside its region, skipped",
                      SharpBoundaryWarning, stacklevel=2)
        return None
    _, lo, hi = _bisect_batched(cloud, key_arr, support, tangent, sparams, k)
    return BoundedSegment(key=tuple(int(i) for i in key_arr[0]), support=support[0],
                          direction=tangent[0], intervals=np.column_stack([lo, hi]))


def sharp_penalty_cell(mesh: StructuredMesh, ix: int, iy: int, cloud: PointCloud,
                       dparams: DistanceParams, sparams: SharpParams,
                       pen: PenaltyParams, ncomp: int = 1,
                       collect_segments: bool = False):
    """Penalty matrix/vector of one cell via implicit Voronoi plane segments.

    Quadrature points are laid on every kept subsegment of every contributing
    region; each point enters only if it lies in its own region and in this
    cell (half-open cell membership, closed at the mesh's upper edges), so
    segments shared between neighboring cells are never double counted.

    Returns (Ke, fe, n_points) plus the kept segments per region when
    collect_segments is set.
    """
    p = mesh.degree
    nmodes = (p + 1) ** 2 * ncomp
    bounds = mesh.cell_bounds(ix, iy)
    empty = (np.zeros((nmodes, nmodes)), np.zeros(nmodes), 0)
    keys = identify_contributing_regions(bounds, cloud, dparams, sparams)
    if not keys:
        return empty + ([],) if collect_segments else empty
    k = len(keys[0])
    keys_arr = np.asarray(keys, dtype=int)
    supports, normals, iso = _fit_planes_for_keys(cloud, keys_arr)
    if np.any(iso):
        for row in np.nonzero(iso)[0]:
            warnings.warn(f"region {tuple(keys_arr[row])}: isotropic neighbor set, skipped",
                          SharpBoundaryWarning, stacklevel=2)
        keys_arr = keys_arr[~iso]
        supports = supports[~iso]
        normals = normals[~iso]
    tangents = np.column_stack([-normals[:, 1], normals[:, 0]])
    sup_keys = region_keys_many(cloud, supports, k)
    sup_ok = np.all(sup_keys == keys_arr, axis=1)
    if not np.all(sup_ok):
        for row in np.nonzero(~sup_ok)[0]:
            warnings.warn(f"region {tuple(keys_arr[row])}: support point outside its region, skipped",
                          SharpBoundaryWarning, stacklevel=2)
        keys_arr = keys_arr[sup_ok]
        supports = supports[sup_ok]
        tangents = tangents[sup_ok]
    if keys_arr.shape[0] == 0:
        return empty + ([],) if collect_segments else empty
    seg_row, seg_lo, seg_hi = _bisect_batched(cloud, keys_arr, supports, tangents,
                                              sparams, k)
    rule = gauss_legendre_1d(sparams.n_gauss)
    mid = 0.5 * (seg_lo + seg_hi)
    halflen = 0.5 * (seg_hi - seg_lo)
    t = mid[:, None] + halflen[:, None] * rule.points[None, :]
    w = halflen[:, None] * rule.weights[None, :]
    rows = np.repeat(seg_row, rule.n)
    tf = t.reshape(-1)
    wf = w.reshape(-1)
    pts = supports[rows] + tf[:, None] * tangents[rows]
    n_points = pts.shape[0]
    in_region = np.all(region_keys_many(cloud, pts, k) == keys_arr[rows], axis=1)
    ok_x = (pts[:, 0] >= bounds[0]) & (
        pts[:, 0] <= bounds[2] if ix == mesh.nx - 1 else pts[:, 0] < bounds[2])
    ok_y = (pts[:, 1] >= bounds[1]) & (
        pts[:, 1] <= bounds[3] if iy == mesh.ny - 1 else pts[:, 1] < bounds[3])
    ok = in_region & ok_x & ok_y
    Ke, fe = _accumulate_point_penalty(mesh, ix, iy, pts[ok], wf[ok], pen, ncomp)
    if not collect_segments:
        return Ke, fe, n_points
    segments = []
    for r in range(keys_arr.shape[0]):
        sel = seg_row == r
        if not np.any(sel):
            continue
        segments.append(BoundedSegment(key=tuple(int(i) for i in keys_arr[r]),
                                       support=supports[r], direction=tangents[r],
                                       intervals=np.column_stack([seg_lo[sel], seg_hi[sel]])))
    return Ke, fe, n_points, segments


# ---------------------------------------------------------------------------
# reference route


def _clip_segments_to_rect(segs, bounds):
    """Liang-Barsky clip of (m, 4) segments to a rectangle.

    Returns (rows, t0, t1) for segments with a nonempty clipped parameter
    interval; parameter boundaries are computed with the same expressions in
    every cell, so adjacent cells partition each segment exactly.
    """
    p0 = segs[:, 0:2]
    d = segs[:, 2:4] - p0
    t0 = np.zeros(segs.shape[0])
    t1 = np.ones(segs.shape[0])
    ok = np.ones(segs.shape[0], dtype=bool)
    for axis, (lo, hi) in enumerate([(bounds[0], bounds[2]), (bounds[1], bounds[3])]):
        dv = d[:, axis]
        pv = p0[:, axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo - pv) / dv
            tb = (hi - pv) / dv
        enter = np.where(dv >= 0.0, ta, tb)
        leave = np.where(dv >= 0.0, tb, ta)
        par = dv == 0.0
        inside_slab = (pv >= lo) & (pv <= hi)
        enter = np.where(par, np.where(inside_slab, 0.0, 1.0), enter)
        leave = np.where(par, np.where(inside_slab, 1.0, 0.0), leave)
        t0 = np.maximum(t0, enter)
        t1 = np.minimum(t1, leave)
        ok &= inside_slab | ~par
    ok &= t1 > t0
    rows = np.nonzero(ok)[0]
    return rows, t0[rows], t1[rows]


def reference_segment_penalty(mesh: StructuredMesh, ix: int, iy: int,
                              segments, pen: PenaltyParams, n_gauss: int,
                              ncomp: int = 1):
    """Penalty matrix/vector of one cell from explicit polyline segments.

    segments is an (m, 4) array of x0, y0, x1, y1 rows; each is clipped to the
    cell and integrated with an n_gauss rule.  Segments running exactly along
    an interior cell interface are seen by both adjacent cells; keep explicit
    geometry off interior interfaces.
    """
    segs = np.asarray(segments, dtype=float).reshape(-1, 4)
    bounds = mesh.cell_bounds(ix, iy)
    rows, t0, t1 = _clip_segments_to_rect(segs, bounds)
    p = mesh.degree
    nmodes = (p + 1) ** 2 * ncomp
    if rows.size == 0:
        return np.zeros((nmodes, nmodes)), np.zeros(nmodes), 0
    rule = gauss_legendre_1d(n_gauss)
    p0 = segs[rows, 0:2]
    d = segs[rows, 2:4] - p0
    seglen = np.hypot(d[:, 0], d[:, 1])
    tm = 0.5 * (t0 + t1)[:, None] + 0.5 * (t1 - t0)[:, None] * rule.points[None, :]
    w = (0.5 * (t1 - t0) * seglen)[:, None] * rule.weights[None, :]
    pts = p0[:, None, :] + tm[:, :, None] * d[:, None, :]
    pts = pts.reshape(-1, 2)
    wf = w.reshape(-1)
    Ke, fe = _accumulate_point_penalty(mesh, ix, iy, pts, wf, pen, ncomp)
    return Ke, fe, pts.shape[0]


# ---------------------------------------------------------------------------
# global assemblers


def _cells_near_cloud(mesh: StructuredMesh, cloud: PointCloud, reach: float):
    """Cells whose interior can come within reach of a cloud point."""
    halfdiag = 0.5 * float(np.hypot(mesh.hx, mesh.hy))
    out = []
    centers = []
    for ix, iy in mesh.cells():
        b = mesh.cell_bounds(ix, iy)
        centers.append([0.5 * (b[0] + b[2]), 0.5 * (b[1] + b[3])])
        out.append((ix, iy))
    dist, _ = cloud.tree.query(np.asarray(centers), k=1)
    keep = dist <= reach + halfdiag
    return [c for c, k in zip(out, keep) if k]


def _assemble_cells(mesh, ncomp, cell_iter):
    """Run a per-cell penalty op over cells and gather a global pair."""
    ndof = mesh.n_scalar_dofs * ncomp
    rows, cols, vals = [], [], []
    f = np.zeros(ndof)
    n_points = 0
    for ix, iy, (Ke, fe, n) in cell_iter:
        n_points += n
        if not np.any(Ke) and not np.any(fe):
            continue
        dofs = mesh.cell_dofs(ix, iy)
        if ncomp == 2:
            idx = np.empty(2 * dofs.size, dtype=int)
            idx[0::2] = 2 * dofs
            idx[1::2] = 2 * dofs + 1
        else:
            idx = dofs
        n_loc = idx.size
        rows.append(np.repeat(idx, n_loc))
        cols.append(np.tile(idx, n_loc))
        vals.append(Ke.reshape(-1))
        np.add.at(f, idx, fe)
    if rows:
        K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(ndof, ndof)).tocsr()
        K = (0.5 * (K + K.T)).tocsr()
    else:
        K = sp.csr_matrix((ndof, ndof))
    return K, f, n_points


def assemble_diffuse_penalty(mesh: StructuredMesh, cloud: PointCloud,
                             dparams: DistanceParams, diff: DiffuseParams,
                             pen: PenaltyParams, ncomp: int = 1):
    """Global diffuse penalty pair (K, f) and the quadrature point count.

    beta scales the accumulated pair once at the end, so results for two
    betas differ by exactly that factor.
    """
    unit = PenaltyParams(beta=1.0, u_hat=pen.u_hat)
    reach = max(dparams.r, diff.epsilon)
    cells = _cells_near_cloud(mesh, cloud, reach)
    it = ((ix, iy, diffuse_penalty_cell(mesh, ix, iy, cloud, dparams, diff, unit, ncomp))
          for ix, iy in cells)
    K, f, n = _assemble_cells(mesh, ncomp, it)
    return (pen.beta * K).tocsr(), pen.beta * f, {"penalty_points": n, "cells": len(cells)}


def assemble_sharp_penalty(mesh: StructuredMesh, cloud: PointCloud,
                           dparams: DistanceParams, sparams: SharpParams,
                           pen: PenaltyParams, ncomp: int = 1):
    """Global sharp penalty pair (K, f) and the quadrature point count."""
    unit = PenaltyParams(beta=1.0, u_hat=pen.u_hat)
    it = ((ix, iy, sharp_penalty_cell(mesh, ix, iy, cloud, dparams, sparams, unit, ncomp))
          for ix, iy in mesh.cells())
    K, f, n = _assemble_cells(mesh, ncomp, it)
    return (pen.beta * K).tocsr(), pen.beta * f, {"penalty_points": n}


def assemble_reference_penalty(mesh: StructuredMesh, segments, pen: PenaltyParams,
                               n_gauss: int, ncomp: int = 1):
    """Global reference penalty pair from explicit segments."""
    unit = PenaltyParams(beta=1.0, u_hat=pen.u_hat)
    it = ((ix, iy, reference_segment_penalty(mesh, ix, iy, segments, unit, n_gauss, ncomp))
          for ix, iy in mesh.cells())
    K, f, n = _assemble_cells(mesh, ncomp, it)
    return (pen.beta * K).tocsr(), pen.beta * f, {"penalty_points": n}


def collect_sharp_segments(mesh: StructuredMesh, cloud: PointCloud,
                           dparams: DistanceParams, sparams: SharpParams):
    """Kept subsegments of every contributing region across the mesh.

    Regions found by several cells appear once.  Returns a list of
    BoundedSegment in lexicographic key order.
    """
    seen = {}
    for ix, iy in mesh.cells():
        bounds = mesh.cell_bounds(ix, iy)
        for key in identify_contributing_regions(bounds, cloud, dparams, sparams):
            if key in seen:
                continue
            seg = bisect_plane_segments(cloud, key, dparams, sparams)
            if seg is not None:
                seen[key] = seg
    return [seen[k] for k in sorted(seen)]
