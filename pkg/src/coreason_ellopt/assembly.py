# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ellopt

"""
P1 finite element assembly on structured simplicial meshes.

Element matrices are computed in vectorized chunks and scattered through a COO
triplet list; CSR conversion sums duplicates in input order, so the result does
not depend on how many workers computed the chunks.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple, TypeVar

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field

from coreason_ellopt.exceptions import AssemblyError, DimensionMismatchError
from coreason_ellopt.mesh import StructuredSimplicialMesh
from coreason_ellopt.models import DiagVariant, FloatArray
from coreason_ellopt.quadrature import simplex_rule
from coreason_ellopt.targets import TargetLike, as_function
from coreason_ellopt.utils.logger import logger

CHUNK_SIZE = 65536
_VOLUME_FLOOR = 1e-300

T = TypeVar("T")


class AssembledProblem(BaseModel):
    """Discrete optimal control problem on one level, restricted to interior dofs."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dim: int = Field(..., description="Spatial dimension.")
    level: int = Field(..., description="Refinement level.")
    h: float = Field(..., description="Mesh width.")
    rho: float = Field(..., gt=0.0, description="Regularization parameter.")
    K: sp.csr_matrix = Field(..., description="Stiffness matrix on interior dofs.")
    M: sp.csr_matrix = Field(..., description="Consistent mass matrix on interior dofs.")
    m_lump: FloatArray = Field(..., description="Row sums of the full mass matrix at interior vertices.")
    m_diag: FloatArray = Field(..., description="Diagonal of M.")
    m_area: FloatArray = Field(..., description="Volume of the vertex patch.")
    f: FloatArray = Field(..., description="Load vector (target tested against the hat functions).")

    @property
    def n_dofs(self) -> int:
        return int(self.f.shape[0])

    def with_rho(self, rho: float) -> "AssembledProblem":
        """Same matrices and load, different regularization."""
        return self.model_copy(update={"rho": rho})


def element_chunks(total: int) -> List[slice]:
    return [slice(start, min(start + CHUNK_SIZE, total)) for start in range(0, total, CHUNK_SIZE)] or [slice(0, 0)]


def _map_chunks(fn: Callable[[slice], T], total: int, workers: int) -> List[T]:
    """Applies ``fn`` to consecutive element chunks; results keep chunk order."""
    chunks = element_chunks(total)
    if workers <= 1 or len(chunks) == 1:
        return [fn(chunk) for chunk in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def element_geometry(coords: FloatArray) -> Tuple[FloatArray, FloatArray]:
    """
    Barycentric gradients and volumes of a stack of simplices.

    Args:
        coords: ``(n, d + 1, d)`` vertex coordinates.

    Returns:
        ``(grads, volumes)`` of shapes ``(n, d + 1, d)`` and ``(n,)``.

    Raises:
        AssemblyError: If any simplex has (numerically) zero or negative volume.
    """
    dim = coords.shape[-1]
    edges = coords[:, 1:, :] - coords[:, :1, :]
    det = np.linalg.det(edges)
    if np.any(det <= _VOLUME_FLOOR):
        bad = int(np.argmin(det))
        logger.error(f"Degenerate simplex in assembly (signed volume factor {det[bad]:.3e})")
        raise AssemblyError(f"Degenerate or inverted simplex at local index {bad}")
    inverse = np.linalg.inv(edges)
    grads = np.empty_like(coords)
    grads[:, 1:, :] = np.transpose(inverse, (0, 2, 1))
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    volumes = det / math.factorial(dim)
    return grads, volumes


def local_stiffness(coords: FloatArray) -> FloatArray:
    """Element stiffness matrices ``|T| grad(lambda_i) . grad(lambda_j)``."""
    grads, volumes = element_geometry(coords)
    return np.asarray(volumes[:, None, None] * np.einsum("nid,njd->nij", grads, grads), dtype=np.float64)


def local_mass(coords: FloatArray) -> FloatArray:
    """Element mass matrices ``|T| (1 + delta_ij) / ((d + 1)(d + 2))``."""
    dim = coords.shape[-1]
    _, volumes = element_geometry(coords)
    pattern = (np.ones((dim + 1, dim + 1)) + np.eye(dim + 1)) / ((dim + 1) * (dim + 2))
    return np.asarray(volumes[:, None, None] * pattern[None, :, :], dtype=np.float64)


def _assemble_full(
    mesh: StructuredSimplicialMesh, kernel: Callable[[FloatArray], FloatArray], workers: int
) -> sp.csr_matrix:
    simplices = mesh.simplices

    def _element_block(chunk: slice) -> FloatArray:
        return kernel(mesh.vertices[simplices[chunk]])

    blocks = np.concatenate(_map_chunks(_element_block, mesh.n_simplices, workers), axis=0)
    local = simplices.shape[1]
    rows = np.repeat(simplices, local, axis=1).ravel()
    cols = np.tile(simplices, (1, local)).ravel()
    matrix = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(mesh.n_vertices, mesh.n_vertices)).tocsr()
    matrix.sort_indices()
    return matrix


def assemble_full_stiffness(mesh: StructuredSimplicialMesh, workers: int = 1) -> sp.csr_matrix:
    """Stiffness matrix over all vertices, boundary included."""
    return _assemble_full(mesh, local_stiffness, workers)


def assemble_full_mass(mesh: StructuredSimplicialMesh, workers: int = 1) -> sp.csr_matrix:
    """Consistent mass matrix over all vertices, boundary included."""
    return _assemble_full(mesh, local_mass, workers)


def restrict_to_interior(matrix: sp.csr_matrix, mesh: StructuredSimplicialMesh) -> sp.csr_matrix:
    """Removes boundary rows and columns (homogeneous Dirichlet elimination)."""
    if matrix.shape != (mesh.n_vertices, mesh.n_vertices):
        raise DimensionMismatchError(f"Matrix of shape {matrix.shape} does not match {mesh.n_vertices} vertices")
    interior = mesh.interior_vertices
    restricted = sp.csr_matrix(matrix[interior][:, interior])
    restricted.sort_indices()
    return restricted


def assemble_stiffness(mesh: StructuredSimplicialMesh, workers: int = 1) -> sp.csr_matrix:
    """Stiffness matrix K on interior dofs; symmetric positive definite."""
    stiffness = restrict_to_interior(assemble_full_stiffness(mesh, workers), mesh)
    logger.debug(f"Assembled K on level {mesh.level}: {stiffness.shape[0]} dofs, {stiffness.nnz} nonzeros")
    return stiffness


def assemble_mass(mesh: StructuredSimplicialMesh, workers: int = 1) -> sp.csr_matrix:
    """Consistent mass matrix M on interior dofs."""
    mass = restrict_to_interior(assemble_full_mass(mesh, workers), mesh)
    logger.debug(f"Assembled M on level {mesh.level}: {mass.shape[0]} dofs, {mass.nnz} nonzeros")
    return mass


def _vertex_sums(mesh: StructuredSimplicialMesh, per_element: FloatArray) -> FloatArray:
    """Adds a per-element scalar to every vertex of the element, then restricts to interior dofs."""
    weights = np.repeat(per_element, mesh.simplices.shape[1])
    totals = np.bincount(mesh.simplices.ravel(), weights=weights, minlength=mesh.n_vertices)
    return np.asarray(totals[mesh.interior_vertices], dtype=np.float64)


def _element_volumes(mesh: StructuredSimplicialMesh) -> FloatArray:
    chunks = element_chunks(mesh.n_simplices)
    return np.concatenate([element_geometry(mesh.vertices[mesh.simplices[chunk]])[1] for chunk in chunks])


def mass_diagonal(
    M: sp.csr_matrix,
    mesh: StructuredSimplicialMesh,
    variant: DiagVariant,
    K: Optional[sp.csr_matrix] = None,
    rho: Optional[float] = None,
) -> FloatArray:
    """
    Diagonal surrogate of the mass matrix on interior dofs.

    ``diag`` is the diagonal of M, ``lump`` the full-mesh row sums, ``area`` the
    patch volume, ``scaled-identity`` h**d and ``diag-a`` the diagonal of
    M + sqrt(rho) K (needs ``K`` and ``rho``).

    Raises:
        AssemblyError: If an entry is not strictly positive.
    """
    if M.shape != (mesh.n_interior, mesh.n_interior):
        raise DimensionMismatchError(f"Mass matrix of shape {M.shape} does not match {mesh.n_interior} dofs")

    if variant == DiagVariant.DIAG:
        diagonal = np.asarray(M.diagonal(), dtype=np.float64)
    elif variant == DiagVariant.LUMP:
        diagonal = _vertex_sums(mesh, _element_volumes(mesh) / (mesh.dim + 1))
    elif variant == DiagVariant.AREA:
        diagonal = _vertex_sums(mesh, _element_volumes(mesh))
    elif variant == DiagVariant.SCALED_IDENTITY:
        diagonal = np.full(mesh.n_interior, mesh.h**mesh.dim)
    elif variant == DiagVariant.DIAG_A:
        if K is None or rho is None:
            raise ValueError("The diag-a variant needs the stiffness matrix and rho")
        diagonal = np.asarray(M.diagonal() + math.sqrt(rho) * K.diagonal(), dtype=np.float64)
    else:
        raise ValueError(f"Unknown diagonal variant {variant!r}")

    if np.any(diagonal <= 0.0):
        logger.error(f"Non-positive entry in {variant.value} mass diagonal")
        raise AssemblyError(f"Mass diagonal ({variant.value}) has a non-positive entry")
    return diagonal


def assemble_load(
    mesh: StructuredSimplicialMesh, target: TargetLike, quad_order: int = 4, workers: int = 1
) -> FloatArray:
    """
    Load vector ``f_i = integral(target * phi_i)`` on interior dofs.

    Raises:
        ValueError: If the quadrature order is unsupported.
    """
    points, weights = simplex_rule(mesh.dim, quad_order)
    evaluate = as_function(target)

    def _element_loads(chunk: slice) -> FloatArray:
        coords = mesh.vertices[mesh.simplices[chunk]]
        _, volumes = element_geometry(coords)
        physical = np.einsum("qk,nkd->nqd", points, coords)
        values = evaluate(physical.reshape(-1, mesh.dim)).reshape(physical.shape[:2])
        return np.asarray(volumes[:, None] * ((values * weights[None, :]) @ points), dtype=np.float64)

    loads = np.concatenate(_map_chunks(_element_loads, mesh.n_simplices, workers), axis=0)
    totals = np.bincount(mesh.simplices.ravel(), weights=loads.ravel(), minlength=mesh.n_vertices)
    return np.asarray(totals[mesh.interior_vertices], dtype=np.float64)


def nodal_interpolant(mesh: StructuredSimplicialMesh, target: TargetLike) -> FloatArray:
    """Target values at interior vertices."""
    evaluate = as_function(target)
    return np.asarray(evaluate(mesh.vertices[mesh.interior_vertices]), dtype=np.float64)


def assemble_problem(
    mesh: StructuredSimplicialMesh, target: TargetLike, rho: float, quad_order: int = 4, workers: int = 1
) -> AssembledProblem:
    """Assembles K, M, the three mass diagonals and the load of one level."""
    if rho <= 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    K = assemble_stiffness(mesh, workers)
    M = assemble_mass(mesh, workers)
    f = assemble_load(mesh, target, quad_order, workers)
    logger.info(f"Assembled level {mesh.level} (d={mesh.dim}): N_h={mesh.n_interior}, rho={rho:.6e}")
    return AssembledProblem(
        dim=mesh.dim,
        level=mesh.level,
        h=mesh.h,
        rho=rho,
        K=K,
        M=M,
        m_lump=mass_diagonal(M, mesh, DiagVariant.LUMP),
        m_diag=mass_diagonal(M, mesh, DiagVariant.DIAG),
        m_area=mass_diagonal(M, mesh, DiagVariant.AREA),
        f=f,
    )


def preconditioner_diagonal(problem: AssembledProblem, variant: DiagVariant) -> FloatArray:
    """Mass diagonal of an assembled problem for any variant, without the mesh."""
    if variant == DiagVariant.DIAG:
        return problem.m_diag
    if variant == DiagVariant.LUMP:
        return problem.m_lump
    if variant == DiagVariant.AREA:
        return problem.m_area
    if variant == DiagVariant.SCALED_IDENTITY:
        return np.full(problem.n_dofs, problem.h**problem.dim)
    if variant == DiagVariant.DIAG_A:
        return np.asarray(problem.m_diag + math.sqrt(problem.rho) * problem.K.diagonal(), dtype=np.float64)
    raise ValueError(f"Unknown diagonal variant {variant!r}")
