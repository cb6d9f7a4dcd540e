# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ellopt

import math
from typing import Tuple

import numpy as np
import pytest

from coreason_ellopt.assembly import (
    assemble_full_mass,
    assemble_full_stiffness,
    assemble_load,
    assemble_mass,
    assemble_problem,
    assemble_stiffness,
    element_chunks,
    element_geometry,
    local_mass,
    local_stiffness,
    mass_diagonal,
    nodal_interpolant,
    preconditioner_diagonal,
    restrict_to_interior,
)
from coreason_ellopt.exceptions import AssemblyError, DimensionMismatchError
from coreason_ellopt.mesh import build_mesh
from coreason_ellopt.models import DiagVariant, FloatArray, TargetKind

REFERENCE_TRIANGLE = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
REFERENCE_TETRAHEDRON = np.array([[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]])


def _ones(points: FloatArray) -> FloatArray:
    return np.ones(points.shape[0])


def test_reference_triangle_stiffness() -> None:
    expected = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    np.testing.assert_allclose(local_stiffness(REFERENCE_TRIANGLE)[0], expected, atol=1e-15)


def test_reference_tetrahedron_mass() -> None:
    expected = (np.ones((4, 4)) + np.eye(4)) / 120.0
    np.testing.assert_allclose(local_mass(REFERENCE_TETRAHEDRON)[0], expected, atol=1e-16)


def test_element_geometry_gradients() -> None:
    grads, volumes = element_geometry(REFERENCE_TETRAHEDRON)
    assert volumes[0] == pytest.approx(1.0 / 6.0)
    np.testing.assert_allclose(grads[0], [[-1, -1, -1], [1, 0, 0], [0, 1, 0], [0, 0, 1]], atol=1e-15)


def test_degenerate_simplex_rejected() -> None:
    flat = np.array([[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]])
    with pytest.raises(AssemblyError):
        element_geometry(flat)
    inverted = REFERENCE_TRIANGLE[:, [0, 2, 1], :]
    with pytest.raises(AssemblyError):
        element_geometry(inverted)


@pytest.mark.parametrize("dim", [2, 3])
def test_full_mass_sums_to_domain_volume(dim: int) -> None:
    M = assemble_full_mass(build_mesh(dim, 2))
    assert float(M.sum()) == pytest.approx(1.0, abs=1e-13)


@pytest.mark.parametrize("dim", [2, 3])
def test_full_stiffness_annihilates_constants(dim: int) -> None:
    K = assemble_full_stiffness(build_mesh(dim, 2))
    np.testing.assert_allclose(np.asarray(K.sum(axis=1)).ravel(), 0.0, atol=1e-13)


@pytest.mark.parametrize("dim", [2, 3])
def test_interior_matrices_symmetric_positive_definite(dim: int) -> None:
    mesh = build_mesh(dim, 1)
    for matrix in (assemble_stiffness(mesh), assemble_mass(mesh)):
        dense = matrix.toarray()
        np.testing.assert_allclose(dense, dense.T, atol=1e-15)
        assert np.linalg.eigvalsh(dense).min() > 0.0


def test_two_dimensional_stiffness_is_five_point_stencil() -> None:
    mesh = build_mesh(2, 1)
    K = assemble_stiffness(mesh).toarray()
    centre = 4
    row = K[centre]
    assert row[centre] == pytest.approx(4.0)
    for neighbour in (1, 3, 5, 7):
        assert row[neighbour] == pytest.approx(-1.0)
    for diagonal_neighbour in (0, 2, 6, 8):
        assert row[diagonal_neighbour] == pytest.approx(0.0, abs=1e-15)


def test_three_dimensional_diagonals() -> None:
    mesh = build_mesh(3, 2)
    h = mesh.h
    np.testing.assert_allclose(assemble_stiffness(mesh).diagonal(), 6.0 * h, rtol=1e-13)
    np.testing.assert_allclose(assemble_mass(mesh).diagonal(), 0.4 * h**3, rtol=1e-13)


def _element_loop_oracle(dim: int) -> Tuple[FloatArray, FloatArray]:
    """Dense K and M built one element at a time from the barycentric coordinate matrix."""
    mesh = build_mesh(dim, 1)
    K = np.zeros((mesh.n_vertices, mesh.n_vertices))
    M = np.zeros((mesh.n_vertices, mesh.n_vertices))
    for simplex in mesh.simplices:
        corners = mesh.vertices[simplex]
        affine = np.hstack([np.ones((dim + 1, 1)), corners])
        volume = abs(np.linalg.det(affine)) / math.factorial(dim)
        grads = np.linalg.inv(affine)[1:, :].T
        for a, va in enumerate(simplex):
            for b, vb in enumerate(simplex):
                K[va, vb] += volume * float(grads[a] @ grads[b])
                M[va, vb] += volume * (2.0 if a == b else 1.0) / ((dim + 1) * (dim + 2))
    return K, M


@pytest.mark.parametrize("dim", [2, 3])
def test_assembly_matches_element_loop_oracle(dim: int) -> None:
    mesh = build_mesh(dim, 1)
    K, M = _element_loop_oracle(dim)
    np.testing.assert_allclose(assemble_full_stiffness(mesh).toarray(), K, rtol=0.0, atol=1e-13)
    np.testing.assert_allclose(assemble_full_mass(mesh).toarray(), M, rtol=0.0, atol=1e-13)
    interior = mesh.interior_vertices
    np.testing.assert_allclose(
        assemble_stiffness(mesh).toarray(), K[np.ix_(interior, interior)], rtol=0.0, atol=1e-13
    )
    np.testing.assert_allclose(assemble_mass(mesh).toarray(), M[np.ix_(interior, interior)], rtol=0.0, atol=1e-13)


@pytest.mark.parametrize("dim", [2, 3])
def test_mass_diagonal_variants(dim: int) -> None:
    mesh = build_mesh(dim, 2)
    M = assemble_mass(mesh)
    h_d = mesh.h**dim
    np.testing.assert_allclose(mass_diagonal(M, mesh, DiagVariant.LUMP), h_d, rtol=1e-13)
    np.testing.assert_allclose(mass_diagonal(M, mesh, DiagVariant.AREA), (dim + 1) * h_d, rtol=1e-13)
    np.testing.assert_allclose(mass_diagonal(M, mesh, DiagVariant.SCALED_IDENTITY), h_d)
    np.testing.assert_allclose(mass_diagonal(M, mesh, DiagVariant.DIAG), M.diagonal())


def test_lumped_mass_equals_full_row_sums() -> None:
    mesh = build_mesh(3, 2)
    full = assemble_full_mass(mesh)
    row_sums = np.asarray(full.sum(axis=1)).ravel()[mesh.interior_vertices]
    np.testing.assert_allclose(mass_diagonal(assemble_mass(mesh), mesh, DiagVariant.LUMP), row_sums, rtol=1e-13)


def test_diag_a_variant() -> None:
    mesh = build_mesh(3, 1)
    M = assemble_mass(mesh)
    K = assemble_stiffness(mesh)
    rho = mesh.h**4
    expected = M.diagonal() + mesh.h**2 * K.diagonal()
    np.testing.assert_allclose(mass_diagonal(M, mesh, DiagVariant.DIAG_A, K=K, rho=rho), expected)
    with pytest.raises(ValueError, match="diag-a"):
        mass_diagonal(M, mesh, DiagVariant.DIAG_A)


def test_mass_diagonal_shape_mismatch() -> None:
    with pytest.raises(DimensionMismatchError):
        mass_diagonal(assemble_mass(build_mesh(3, 1)), build_mesh(3, 2), DiagVariant.DIAG)


def test_restrict_shape_mismatch() -> None:
    mesh = build_mesh(2, 1)
    with pytest.raises(DimensionMismatchError):
        restrict_to_interior(assemble_mass(mesh), mesh)


@pytest.mark.parametrize("quad_order", [1, 2, 4])
def test_constant_load_equals_lumped_mass(quad_order: int) -> None:
    mesh = build_mesh(3, 2)
    f = assemble_load(mesh, _ones, quad_order)
    np.testing.assert_allclose(f, mesh.h**3, rtol=1e-13)


def test_load_of_affine_target_matches_mass_product() -> None:
    """For a P1 target the load equals M applied to its nodal values (full mesh, then restricted)."""
    mesh = build_mesh(2, 2)

    def affine(points: FloatArray) -> FloatArray:
        return 1.0 + 2.0 * points[:, 0] - points[:, 1]

    nodal = affine(mesh.vertices)
    expected = (assemble_full_mass(mesh) @ nodal)[mesh.interior_vertices]
    np.testing.assert_allclose(assemble_load(mesh, affine, 2), expected, rtol=1e-12)


def test_load_rejects_unknown_quadrature() -> None:
    with pytest.raises(ValueError):
        assemble_load(build_mesh(3, 1), TargetKind.SMOOTH_SINE, 3)


def test_assembly_independent_of_worker_count(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr("coreason_ellopt.assembly.CHUNK_SIZE", 100)
    mesh = build_mesh(3, 2)
    assert len(element_chunks(mesh.n_simplices)) == 31

    serial = assemble_stiffness(mesh, workers=1)
    threaded = assemble_stiffness(mesh, workers=4)
    np.testing.assert_array_equal(serial.indptr, threaded.indptr)
    np.testing.assert_array_equal(serial.indices, threaded.indices)
    np.testing.assert_array_equal(serial.data, threaded.data)
    np.testing.assert_array_equal(
        assemble_load(mesh, TargetKind.PYRAMID, workers=1), assemble_load(mesh, TargetKind.PYRAMID, workers=3)
    )


def test_element_chunks_empty() -> None:
    assert element_chunks(0) == [slice(0, 0)]


def test_assemble_problem() -> None:
    mesh = build_mesh(3, 1)
    problem = assemble_problem(mesh, TargetKind.SMOOTH_SINE, rho=mesh.h**4)
    assert problem.n_dofs == 27
    assert problem.K.shape == (27, 27)
    assert problem.level == 1
    np.testing.assert_allclose(problem.m_lump, mesh.h**3)

    other = problem.with_rho(1e-2)
    assert other.rho == 1e-2
    assert other.K is problem.K

    with pytest.raises(ValueError):
        assemble_problem(mesh, TargetKind.SMOOTH_SINE, rho=0.0)


@pytest.mark.parametrize("variant", list(DiagVariant))
def test_preconditioner_diagonal_matches_mass_diagonal(variant: DiagVariant) -> None:
    mesh = build_mesh(3, 1)
    problem = assemble_problem(mesh, TargetKind.PYRAMID, rho=mesh.h**4)
    expected = mass_diagonal(problem.M, mesh, variant, K=problem.K, rho=problem.rho)
    np.testing.assert_allclose(preconditioner_diagonal(problem, variant), expected, rtol=1e-14)


def test_nodal_interpolant() -> None:
    mesh = build_mesh(2, 1)
    values = nodal_interpolant(mesh, TargetKind.SHIFTED_SINE)
    assert values.shape == (9,)
    assert values[4] == pytest.approx(2.0)
