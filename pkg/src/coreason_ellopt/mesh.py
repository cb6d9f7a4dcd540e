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
Structured simplicial meshes of the unit cube (d = 3) or unit square (d = 2).

Every axis-aligned cell is split into d! simplices along monotone lattice paths
(the Freudenthal/Kuhn subdivision). Vertex ``(i, j, k)`` has global index
``i + n*j + n**2*k`` so x runs fastest, and interior vertices inherit that order.
"""

import itertools
import math
from pathlib import Path
from typing import List

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field

from coreason_ellopt.exceptions import MeshError
from coreason_ellopt.models import BoolArray, FloatArray, IndexArray
from coreason_ellopt.utils.logger import logger


class StructuredSimplicialMesh(BaseModel):
    """
    Vertices, simplices and the interior/boundary split of one refinement level.
    Arrays are read-only.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dim: int = Field(..., description="Spatial dimension (2 or 3).")
    level: int = Field(..., ge=1, description="Refinement level; level L has 2**(L+1) cells per axis.")
    n_per_axis: int = Field(..., description="Vertices per axis, 2**(L+1) + 1.")
    h: float = Field(..., description="Mesh width 2**-(L+1).")
    lattice: IndexArray = Field(..., description="(n_vertices, dim) integer lattice coordinates.")
    vertices: FloatArray = Field(..., description="(n_vertices, dim) coordinates.")
    simplices: IndexArray = Field(..., description="(n_simplices, dim + 1) positively oriented vertex indices.")
    is_boundary: BoolArray = Field(..., description="True for vertices on the domain boundary.")
    interior_index: IndexArray = Field(..., description="Global vertex -> interior dof index, -1 on the boundary.")
    interior_vertices: IndexArray = Field(..., description="Interior dof -> global vertex index.")

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_simplices(self) -> int:
        return int(self.simplices.shape[0])

    @property
    def n_interior(self) -> int:
        return int(self.interior_vertices.shape[0])

    @property
    def strides(self) -> IndexArray:
        return np.asarray([self.n_per_axis**a for a in range(self.dim)], dtype=np.int64)


class MeshHierarchy(BaseModel):
    """Nested meshes 1..L together with the interior prolongations between consecutive levels."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    meshes: List[StructuredSimplicialMesh] = Field(..., description="Meshes ordered coarsest first.")
    prolongations: List[sp.csr_matrix] = Field(
        ..., description="prolongations[i] maps interior dofs of meshes[i] to those of meshes[i + 1]."
    )

    @property
    def finest(self) -> StructuredSimplicialMesh:
        return self.meshes[-1]


def _readonly(array: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
    array.setflags(write=False)
    return array


def _path_offsets(dim: int, strides: IndexArray) -> IndexArray:
    """Global index offsets of the d + 1 vertices of each Kuhn simplex inside a cell."""
    offsets = []
    for perm in itertools.permutations(range(dim)):
        path = [0]
        for axis in perm:
            path.append(path[-1] + int(strides[axis]))
        # The path determinant equals the permutation sign; odd paths are flipped.
        inversions = sum(1 for a, b in itertools.combinations(perm, 2) if a > b)
        if inversions % 2 == 1:
            path[-1], path[-2] = path[-2], path[-1]
        offsets.append(path)
    return np.asarray(offsets, dtype=np.int64)


def build_mesh(dim: int, level: int) -> StructuredSimplicialMesh:
    """
    Builds the structured simplicial mesh of refinement ``level``.

    Args:
        dim: Spatial dimension, 2 or 3.
        level: Refinement level >= 1 (h = 2**-(level+1)).

    Returns:
        StructuredSimplicialMesh: The mesh with its interior dof numbering.

    Raises:
        MeshError: If the dimension or level is unsupported.
    """
    if dim not in (2, 3):
        logger.error(f"Unsupported dimension {dim}")
        raise MeshError(f"Dimension must be 2 or 3, got {dim}")
    if level < 1:
        logger.error(f"Unsupported level {level}")
        raise MeshError(f"Level must be >= 1, got {level}")

    cells = 2 ** (level + 1)
    n = cells + 1
    h = 1.0 / cells
    strides = np.asarray([n**a for a in range(dim)], dtype=np.int64)

    # np.indices varies its last axis fastest; reversing the rows makes x the fastest coordinate.
    lattice = np.indices((n,) * dim, dtype=np.int64).reshape(dim, -1)[::-1].T.copy()
    vertices = lattice.astype(np.float64) * h

    corners = np.indices((cells,) * dim, dtype=np.int64).reshape(dim, -1)[::-1].T
    base = corners @ strides
    offsets = _path_offsets(dim, strides)
    simplices = (base[:, None, None] + offsets[None, :, :]).reshape(-1, dim + 1)

    is_boundary = np.any((lattice == 0) | (lattice == n - 1), axis=1)
    interior_vertices = np.flatnonzero(~is_boundary).astype(np.int64)
    interior_index = np.full(lattice.shape[0], -1, dtype=np.int64)
    interior_index[interior_vertices] = np.arange(interior_vertices.shape[0], dtype=np.int64)

    logger.debug(
        f"Built d={dim} level {level} mesh: {lattice.shape[0]} vertices, {simplices.shape[0]} simplices, "
        f"{interior_vertices.shape[0]} interior"
    )
    return StructuredSimplicialMesh(
        dim=dim,
        level=level,
        n_per_axis=n,
        h=h,
        lattice=_readonly(lattice),
        vertices=_readonly(vertices),
        simplices=_readonly(simplices),
        is_boundary=_readonly(is_boundary),
        interior_index=_readonly(interior_index),
        interior_vertices=_readonly(interior_vertices),
    )


def interior_dofs(mesh: StructuredSimplicialMesh) -> IndexArray:
    """Map from global vertex index to interior dof index (-1 for boundary vertices)."""
    return mesh.interior_index


def simplex_volume(mesh: StructuredSimplicialMesh) -> float:
    return mesh.h**mesh.dim / math.factorial(mesh.dim)


def build_prolongation(coarse: StructuredSimplicialMesh, fine: StructuredSimplicialMesh) -> sp.csr_matrix:
    """
    Interior-to-interior P1 interpolation from ``coarse`` to the next finer level.

    A fine vertex at even lattice coordinates coincides with a coarse vertex. Any
    other fine vertex is the midpoint of a coarse edge, whose endpoints are the
    floor and ceiling of half its lattice coordinates. Couplings to coarse
    boundary vertices are dropped.
    """
    if coarse.dim != fine.dim or fine.level != coarse.level + 1:
        logger.error(f"Cannot prolongate level {coarse.level} (d={coarse.dim}) to {fine.level} (d={fine.dim})")
        raise MeshError("Prolongation needs consecutive levels of the same dimension")

    fine_lattice = fine.lattice[fine.interior_vertices]
    low = fine_lattice // 2
    high = (fine_lattice + 1) // 2
    odd = np.any(low != high, axis=1)

    coarse_strides = coarse.strides
    low_dof = coarse.interior_index[low @ coarse_strides]
    high_dof = coarse.interior_index[high @ coarse_strides]

    rows = np.arange(fine.n_interior, dtype=np.int64)
    all_rows = np.concatenate([rows, rows[odd]])
    all_cols = np.concatenate([low_dof, high_dof[odd]])
    all_vals = np.concatenate([np.where(odd, 0.5, 1.0), np.full(int(odd.sum()), 0.5)])

    keep = all_cols >= 0
    prolongation = sp.coo_matrix(
        (all_vals[keep], (all_rows[keep], all_cols[keep])), shape=(fine.n_interior, coarse.n_interior)
    ).tocsr()
    prolongation.sort_indices()
    return prolongation


def build_hierarchy(dim: int, max_level: int) -> MeshHierarchy:
    """Meshes 1..max_level and the prolongations between them."""
    meshes = [build_mesh(dim, level) for level in range(1, max_level + 1)]
    prolongations = [build_prolongation(c, f) for c, f in zip(meshes[:-1], meshes[1:], strict=True)]
    return MeshHierarchy(meshes=meshes, prolongations=prolongations)


def evaluate_p1(mesh: StructuredSimplicialMesh, nodal_values: FloatArray, points: FloatArray) -> FloatArray:
    """
    Evaluates the P1 function with the given per-vertex values at arbitrary points of the closed domain.

    The containing Kuhn simplex follows from sorting the local cell coordinates in
    decreasing order; the sorted gaps are the barycentric weights.
    """
    if nodal_values.shape[0] != mesh.n_vertices:
        raise MeshError(f"Expected {mesh.n_vertices} nodal values, got {nodal_values.shape[0]}")
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    scaled = points / mesh.h
    cell = np.clip(np.floor(scaled).astype(np.int64), 0, mesh.n_per_axis - 2)
    local = scaled - cell
    order = np.argsort(-local, axis=1, kind="stable")
    sorted_local = np.take_along_axis(local, order, axis=1)

    strides = mesh.strides
    vertex = cell @ strides
    result = (1.0 - sorted_local[:, 0]) * nodal_values[vertex]
    for k in range(mesh.dim):
        vertex = vertex + strides[order[:, k]]
        upper = sorted_local[:, k + 1] if k + 1 < mesh.dim else 0.0
        result = result + (sorted_local[:, k] - upper) * nodal_values[vertex]
    return np.asarray(result, dtype=np.float64)


def dump_mesh(mesh: StructuredSimplicialMesh, path: Path) -> None:
    """Writes vertices (``v x y [z]``) and simplices (``t i j k [l]``) as plain text."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        handle.write(f"# d={mesh.dim} level={mesh.level} vertices={mesh.n_vertices} simplices={mesh.n_simplices}\n")
        for coords in mesh.vertices:
            handle.write("v " + " ".join(f"{c:.17g}" for c in coords) + "\n")
        for simplex in mesh.simplices:
            handle.write("t " + " ".join(str(int(v)) for v in simplex) + "\n")
    logger.info(f"Wrote mesh with {mesh.n_simplices} simplices to {path}")
