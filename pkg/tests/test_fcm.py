"""Mesh layout, embedded-domain volume assembly, and the linear solve."""

import numpy as np
import pytest

from pointcell import (IndicatorField, MeshQueryError, PlaneStress,
                       PoissonCoefficient, SolverError, StructuredMesh,
                       apply_strong_zero, assemble_volume, build_alpha_tree,
                       evaluate, everywhere, gauss_legendre_1d,
                       integrate_over_tree, solve, strain_energy)

_NOTHING = IndicatorField(inside=lambda pts: np.zeros(pts.shape[0], dtype=bool))


def _linear_coeffs(mesh, a, b, c):
    """Scalar dof vector reproducing a + b x + c y (vertex modes only)."""
    coeffs = np.zeros(mesh.n_scalar_dofs)
    for vx in range(mesh.nx + 1):
        for vy in range(mesh.ny + 1):
            x = mesh.origin[0] + vx * mesh.hx
            y = mesh.origin[1] + vy * mesh.hy
            coeffs[vx * mesh.n1y + vy] = a + b * x + c * y
    return coeffs


def _element_laplace_4x4():
    """Bilinear Laplace element matrix on a square cell, any size.

    Diagonal 2/3, edge-adjacent pairs -1/6, diagonally opposite -1/3, in the
    local ordering (-1,-1), (-1,+1), (+1,-1), (+1,+1)."""
    K = np.full((4, 4), -1.0 / 3.0)
    for i, j in [(0, 1), (0, 2), (1, 3), (2, 3)]:
        K[i, j] = K[j, i] = -1.0 / 6.0
    np.fill_diagonal(K, 2.0 / 3.0)
    return K


# ---------------------------------------------------------------------------
# mesh layout


def test_mesh_validation():
    with pytest.raises(ValueError):
        StructuredMesh((0, 0), (1, 1), 0, 2, 1)
    with pytest.raises(ValueError):
        StructuredMesh((0, 0), (1, 1), 2, 2, 0)
    with pytest.raises(ValueError):
        StructuredMesh((0, 0), (0, 1), 2, 2, 1)


def test_mesh_dof_counts():
    mesh = StructuredMesh((0, 0), (1, 1), 3, 2, 4)
    assert mesh.n_scalar_dofs == (3 * 4 + 1) * (2 * 4 + 1)
    assert mesh.hx == pytest.approx(1.0 / 3.0)
    assert len(list(mesh.cells())) == 6


def test_adjacent_cells_share_an_edge_line():
    """Neighboring cells share exactly p + 1 scalar dofs, giving C0 glue."""
    mesh = StructuredMesh((0, 0), (1, 1), 2, 2, 3)
    a = set(int(i) for i in mesh.cell_dofs(0, 0))
    b = set(int(i) for i in mesh.cell_dofs(1, 0))
    assert len(a) == len(b) == 16
    assert len(a & b) == 4
    c = set(int(i) for i in mesh.cell_dofs(1, 1))
    assert len(a & c) == 1


def test_cell_bounds_and_local_coords_roundtrip():
    mesh = StructuredMesh((-1.0, 2.0), (2.0, 4.0), 2, 4, 1)
    x0, y0, x1, y1 = mesh.cell_bounds(1, 2)
    assert (x0, y0, x1, y1) == (0.0, 4.0, 1.0, 5.0)
    xi, eta = mesh.local_coords(1, 2, np.array([[0.5, 4.5], [0.0, 4.0], [1.0, 5.0]]))
    np.testing.assert_allclose(xi, [0.0, -1.0, 1.0])
    np.testing.assert_allclose(eta, [0.0, -1.0, 1.0])


def test_locate_rejects_outside_points():
    mesh = StructuredMesh((0, 0), (1, 1), 2, 2, 1)
    with pytest.raises(MeshQueryError, match="outside the mesh"):
        evaluate(mesh, np.zeros(mesh.n_scalar_dofs), np.array([[1.5, 0.5]]))


def test_boundary_scalar_dofs_silence_the_rim():
    """Zeroing the reported boundary dofs kills the trace of any field."""
    mesh = StructuredMesh((0, 0), (1, 1), 3, 2, 4)
    rng = np.random.default_rng(8)
    coeffs = rng.normal(size=mesh.n_scalar_dofs)
    coeffs[mesh.boundary_scalar_dofs()] = 0.0
    t = np.linspace(0.0, 1.0, 201)
    rim = np.concatenate([
        np.column_stack([t, np.zeros_like(t)]),
        np.column_stack([t, np.ones_like(t)]),
        np.column_stack([np.zeros_like(t), t]),
        np.column_stack([np.ones_like(t), t]),
    ])
    vals = evaluate(mesh, coeffs, rim)
    assert np.max(np.abs(vals)) <= 1e-12
    # and the rest of the field survives
    assert np.max(np.abs(evaluate(mesh, coeffs, np.array([[0.4, 0.6]])))) > 1e-3


def test_boundary_dof_count():
    mesh = StructuredMesh((0, 0), (1, 1), 2, 2, 2)
    assert len(mesh.boundary_scalar_dofs()) == 2 * mesh.n1x + 2 * mesh.n1y - 4


# ---------------------------------------------------------------------------
# volume assembly


@pytest.mark.parametrize("size", [1.0, 0.35])
def test_single_cell_bilinear_laplace_matrix(size):
    """The assembled p = 1 diffusion matrix is the textbook element matrix,
    independent of cell size."""
    mesh = StructuredMesh((0, 0), (size, size), 1, 1, 1)
    sysm = assemble_volume(mesh, PoissonCoefficient(), IndicatorField(inside=everywhere))
    np.testing.assert_allclose(sysm.K.toarray(), _element_laplace_4x4(),
                               rtol=1e-14, atol=1e-15)


def test_diffusion_coefficient_scales_matrix():
    mesh = StructuredMesh((0, 0), (1, 1), 2, 2, 2)
    ind = IndicatorField(inside=everywhere)
    K1 = assemble_volume(mesh, PoissonCoefficient(c=1.0), ind).K
    K4 = assemble_volume(mesh, PoissonCoefficient(c=4.0), ind).K
    np.testing.assert_array_equal(K4.toarray(), 4.0 * K1.toarray())


def test_fictitious_scaling_is_exactly_linear():
    """With the whole mesh fictitious every weight carries alpha, so scaling
    alpha by a power of two scales the matrix bit for bit."""
    mesh = StructuredMesh((0, 0), (1, 1), 2, 2, 3)
    nothing = lambda pts: np.zeros(pts.shape[0], dtype=bool)
    a = 2.0**-26
    K1 = assemble_volume(mesh, PoissonCoefficient(),
                         IndicatorField(inside=nothing, alpha_fic=a)).K
    K2 = assemble_volume(mesh, PoissonCoefficient(),
                         IndicatorField(inside=nothing, alpha_fic=2.0 * a)).K
    np.testing.assert_array_equal(K2.toarray(), 2.0 * K1.toarray())


def test_volume_stats_uniform_mesh():
    mesh = StructuredMesh((0, 0), (1, 1), 3, 3, 2)
    sysm = assemble_volume(mesh, PoissonCoefficient(), IndicatorField(inside=everywhere),
                           n_gauss=4)
    assert sysm.stats == {"volume_points": 9 * 16, "cut_cells": 0}
    assert sysm.ncomp == 1


def test_cut_cell_counter_sees_interface():
    mesh = StructuredMesh((0, 0), (1, 1), 4, 4, 1)
    half = IndicatorField(inside=lambda pts: pts[:, 0] < 0.6)
    sysm = assemble_volume(mesh, PoissonCoefficient(), half, tree_depth=3)
    assert sysm.stats["cut_cells"] == 4
    full = assemble_volume(mesh, PoissonCoefficient(), IndicatorField(inside=everywhere))
    assert full.stats["cut_cells"] == 0


def test_assembled_matrix_is_symmetric():
    mesh = StructuredMesh((0, 0), (1, 1), 2, 2, 5)
    disc = IndicatorField(inside=lambda pts: (pts[:, 0] - 0.5) ** 2 + (pts[:, 1] - 0.5) ** 2 < 0.16)
    sysm = assemble_volume(mesh, PoissonCoefficient(), disc, tree_depth=4)
    d = sysm.K - sysm.K.T
    assert abs(d).max() == 0.0


def test_annular_indicator_measure():
    """Depth-10 boundary-adapted cells integrate the annulus area to 1e-6."""
    def inside(pts):
        r2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
        return (r2 >= 0.0625) & (r2 <= 1.0)

    mesh = StructuredMesh((-1.2, -1.2), (2.4, 2.4), 4, 4, 2)
    rule = gauss_legendre_1d(9)
    area = 0.0
    for ix, iy in mesh.cells():
        b = mesh.cell_bounds(ix, iy)
        tree = build_alpha_tree(((b[0], b[1]), (b[2], b[3])), inside, 10)
        area += integrate_over_tree(tree, lambda q: inside(q).astype(float), rule)
    want = np.pi * (1.0 - 0.0625)
    assert abs(area - want) / want <= 1e-6


# ---------------------------------------------------------------------------
# solving and evaluation


def test_interior_load_solution_is_exact_in_span():
    """u = x(1-x) y(1-y) lies in the p = 2 space with a zero trace, so the
    strong-zero Galerkin solution reproduces it to solver precision."""
    mesh = StructuredMesh((0, 0), (1, 1), 2, 2, 2)
    body = lambda pts: 2.0 * (pts[:, 0] * (1.0 - pts[:, 0]) + pts[:, 1] * (1.0 - pts[:, 1]))
    sysm = assemble_volume(mesh, PoissonCoefficient(), IndicatorField(inside=everywhere),
                           body=body, n_gauss=4)
    pinned = apply_strong_zero(sysm, mesh.boundary_scalar_dofs())
    u = solve(pinned)
    rng = np.random.default_rng(12)
    xs = rng.uniform(0.0, 1.0, size=(50, 2))
    want = xs[:, 0] * (1.0 - xs[:, 0]) * xs[:, 1] * (1.0 - xs[:, 1])
    np.testing.assert_allclose(evaluate(mesh, u, xs), want, atol=1e-11)
    assert pinned.last_residual is None or pinned.last_residual < 1e-10


def test_solve_reports_singular_matrix():
    mesh = StructuredMesh((0, 0), (1, 1), 1, 1, 1)
    sysm = assemble_volume(mesh, PoissonCoefficient(),
                           IndicatorField(inside=lambda p: np.zeros(p.shape[0], bool),
                                          alpha_fic=0.0))
    with pytest.raises(SolverError):
        solve(sysm)


def test_apply_strong_zero_returns_new_system():
    mesh = StructuredMesh((0, 0), (1, 1), 2, 2, 1)
    sysm = assemble_volume(mesh, PoissonCoefficient(), IndicatorField(inside=everywhere),
                           body=lambda pts: np.ones(pts.shape[0]))
    before = sysm.K.toarray().copy()
    pinned = apply_strong_zero(sysm, mesh.boundary_scalar_dofs())
    assert pinned is not sysm
    np.testing.assert_array_equal(sysm.K.toarray(), before)
    u = solve(pinned)
    assert np.all(np.isfinite(u))
    assert np.max(np.abs(u[mesh.boundary_scalar_dofs()])) == 0.0


def test_evaluate_gradients_match_finite_differences():
    mesh = StructuredMesh((0, 0), (1, 1), 2, 2, 4)
    rng = np.random.default_rng(4)
    coeffs = rng.normal(size=mesh.n_scalar_dofs)
    xs = rng.uniform(0.1, 0.9, size=(20, 2))
    _, grads = evaluate(mesh, coeffs, xs, gradients=True)
    h = 1e-6
    for axis in (0, 1):
        dp = xs.copy()
        dm = xs.copy()
        dp[:, axis] += h
        dm[:, axis] -= h
        fd = (evaluate(mesh, coeffs, dp) - evaluate(mesh, coeffs, dm)) / (2 * h)
        np.testing.assert_allclose(grads[:, axis], fd, atol=2e-8)


def test_strain_energy_matches_quadratic_form():
    mesh = StructuredMesh((0, 0), (1, 1), 2, 2, 3)
    sysm = assemble_volume(mesh, PoissonCoefficient(), IndicatorField(inside=everywhere))
    rng = np.random.default_rng(6)
    u = rng.normal(size=mesh.n_scalar_dofs)
    want = 0.5 * u @ (sysm.K @ u)
    assert strain_energy(sysm, u) == pytest.approx(want, rel=1e-14)


# ---------------------------------------------------------------------------
# plane stress


def test_plane_stress_rigid_modes_have_no_energy():
    mesh = StructuredMesh((0, 0), (1, 1), 2, 2, 2)
    sysm = assemble_volume(mesh, PlaneStress(), IndicatorField(inside=everywhere))
    n = mesh.n_scalar_dofs
    for sx, sy in [(_linear_coeffs(mesh, 1.0, 0.0, 0.0), _linear_coeffs(mesh, 0.0, 0.0, 0.0)),
                   (_linear_coeffs(mesh, 0.0, 0.0, -1.0), _linear_coeffs(mesh, 0.0, 1.0, 0.0))]:
        u = np.empty(2 * n)
        u[0::2] = sx
        u[1::2] = sy
        assert abs(strain_energy(sysm, u)) <= 1e-12


@pytest.mark.parametrize("mode,want", [
    ("stretch", 0.5 / 0.91),
    ("shear", 0.5 / 2.6),
])
def test_plane_stress_constant_strain_energy(mode, want):
    """Uniaxial stretch u = (x, 0) stores E/(2 (1 - nu^2)); simple shear
    u = (y, 0) stores G/2, with G = E / (2 (1 + nu))."""
    mesh = StructuredMesh((0, 0), (1, 1), 3, 2, 3)
    sysm = assemble_volume(mesh, PlaneStress(), IndicatorField(inside=everywhere))
    n = mesh.n_scalar_dofs
    if mode == "stretch":
        sx = _linear_coeffs(mesh, 0.0, 1.0, 0.0)
    else:
        sx = _linear_coeffs(mesh, 0.0, 0.0, 1.0)
    u = np.zeros(2 * n)
    u[0::2] = sx
    assert strain_energy(sysm, u) == pytest.approx(want, rel=1e-12)


def test_plane_stress_vector_evaluate():
    mesh = StructuredMesh((0, 0), (1, 1), 2, 2, 2)
    n = mesh.n_scalar_dofs
    u = np.zeros(2 * n)
    u[0::2] = _linear_coeffs(mesh, 0.5, 2.0, 0.0)
    u[1::2] = _linear_coeffs(mesh, 0.0, 0.0, -1.0)
    xs = np.array([[0.25, 0.75], [0.5, 0.5]])
    vals = evaluate(mesh, u, xs, ncomp=2)
    np.testing.assert_allclose(vals[:, 0], 0.5 + 2.0 * xs[:, 0], rtol=1e-13)
    np.testing.assert_allclose(vals[:, 1], -xs[:, 1], rtol=1e-13)


def test_material_validation():
    with pytest.raises(ValueError):
        PoissonCoefficient(c=0.0)
    with pytest.raises(ValueError):
        PlaneStress(E=-1.0)
    with pytest.raises(ValueError):
        PlaneStress(nu=0.5)
    with pytest.raises(ValueError):
        PlaneStress(nu=-0.1)
