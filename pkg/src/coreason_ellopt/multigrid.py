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
Geometric multigrid for ``A = M + sqrt(rho) K``.

Coarse operators are Galerkin products, smoothing is Gauss-Seidel (forward
before, backward after the coarse correction) and the coarsest level is solved
exactly. With equal pre and post sweep counts the cycle is a symmetric
positive definite approximation of ``A^-1``.
"""

import math
from enum import Enum
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field
from scipy.sparse.linalg import spsolve_triangular

from coreason_ellopt.exceptions import DimensionMismatchError
from coreason_ellopt.linalg import CholeskyFactor
from coreason_ellopt.mesh import MeshHierarchy
from coreason_ellopt.models import CycleType, FloatArray
from coreason_ellopt.utils.logger import logger


class SweepDirection(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class MgLevel(BaseModel):
    """Operator of one level with its cached triangular parts."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    A: sp.csr_matrix = Field(...)
    lower: sp.csr_matrix = Field(..., description="tril(A), used by forward sweeps.")
    upper: sp.csr_matrix = Field(..., description="triu(A), used by backward sweeps.")

    @classmethod
    def from_matrix(cls, A: sp.spmatrix) -> "MgLevel":
        matrix = sp.csr_matrix(A)
        matrix.sort_indices()
        _check_diagonal(matrix)
        return cls(A=matrix, lower=sp.tril(matrix, format="csr"), upper=sp.triu(matrix, format="csr"))


class MgHierarchy(BaseModel):
    """Level operators (coarsest first), prolongations and cycle settings."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    levels: List[MgLevel] = Field(..., description="levels[0] is the coarsest.")
    prolongations: List[sp.csr_matrix] = Field(..., description="prolongations[i] maps levels[i] to levels[i + 1].")
    coarse_factor: CholeskyFactor = Field(..., description="Cholesky factor of the coarsest operator.")
    cycle: CycleType = Field(default=CycleType.W)
    pre_sweeps: int = Field(default=2, ge=0)
    post_sweeps: int = Field(default=2, ge=0)
    cycles: int = Field(default=1, ge=1, description="Cycles per application.")

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def fine(self) -> MgLevel:
        return self.levels[-1]


def _check_diagonal(A: sp.csr_matrix) -> None:
    if np.any(A.diagonal() == 0.0):
        logger.error("Gauss-Seidel requested on a matrix with a zero diagonal entry")
        raise ValueError("Gauss-Seidel needs a nonzero diagonal")


def _triangular_sweep(
    A: sp.csr_matrix, triangle: sp.csr_matrix, x: FloatArray, b: FloatArray, lower: bool
) -> FloatArray:
    # x + T^-1 (b - A x) with T = D + L (forward) or D + U (backward) is one Gauss-Seidel sweep.
    correction = spsolve_triangular(triangle, b - A @ x, lower=lower, unit_diagonal=False)
    return np.asarray(x + correction, dtype=np.float64)


def gauss_seidel_sweep(A: sp.spmatrix, x: FloatArray, b: FloatArray, direction: SweepDirection) -> FloatArray:
    """
    One Gauss-Seidel sweep on ``A x = b``, returning the updated iterate.

    Raises:
        ValueError: If the diagonal has a zero entry.
    """
    matrix = sp.csr_matrix(A)
    if x.shape != (matrix.shape[0],) or b.shape != (matrix.shape[0],):
        raise DimensionMismatchError(f"Sweep on a {matrix.shape} matrix with x {x.shape} and b {b.shape}")
    _check_diagonal(matrix)
    if direction == SweepDirection.FORWARD:
        return _triangular_sweep(matrix, sp.tril(matrix, format="csr"), x, b, lower=True)
    return _triangular_sweep(matrix, sp.triu(matrix, format="csr"), x, b, lower=False)


def _galerkin(A: sp.csr_matrix, P: sp.csr_matrix) -> sp.csr_matrix:
    coarse = sp.csr_matrix(P.T @ (A @ P))
    # Symmetric to the last bit, so backward sweeps stay the adjoint of forward ones.
    coarse = sp.csr_matrix(0.5 * (coarse + coarse.T))
    coarse.sort_indices()
    return coarse


def build_mg(
    hierarchy: MeshHierarchy,
    M: sp.spmatrix,
    K: sp.spmatrix,
    rho: float,
    cycle: CycleType = CycleType.W,
    pre_sweeps: int = 2,
    post_sweeps: int = 2,
    cycles: int = 1,
) -> MgHierarchy:
    """
    Builds the multigrid hierarchy for ``M + sqrt(rho) K`` on the finest mesh of ``hierarchy``.

    Raises:
        DimensionMismatchError: If M or K do not live on the finest mesh.
        SingularMatrixError: If the coarsest operator cannot be Cholesky factorized.
    """
    n = hierarchy.finest.n_interior
    if M.shape != (n, n) or K.shape != (n, n):
        raise DimensionMismatchError(f"Operators {M.shape}/{K.shape} do not match {n} fine dofs")
    if rho <= 0.0:
        raise ValueError(f"rho must be positive, got {rho}")

    operators = [sp.csr_matrix(M + math.sqrt(rho) * K)]
    for P in reversed(hierarchy.prolongations):
        operators.append(_galerkin(operators[-1], P))
    operators.reverse()

    levels = [MgLevel.from_matrix(A) for A in operators]
    coarse_factor = CholeskyFactor(levels[0].A)
    logger.debug(
        f"Multigrid hierarchy with {len(levels)} levels, sizes {[lvl.A.shape[0] for lvl in levels]}, "
        f"{cycle.value}({pre_sweeps},{post_sweeps}) x{cycles}"
    )
    return MgHierarchy(
        levels=levels,
        prolongations=list(hierarchy.prolongations),
        coarse_factor=coarse_factor,
        cycle=cycle,
        pre_sweeps=pre_sweeps,
        post_sweeps=post_sweeps,
        cycles=cycles,
    )


def _cycle(mg: MgHierarchy, index: int, x: FloatArray, b: FloatArray) -> FloatArray:
    level = mg.levels[index]
    if index == 0:
        return np.asarray(x + mg.coarse_factor.solve(b - level.A @ x), dtype=np.float64)

    for _ in range(mg.pre_sweeps):
        x = _triangular_sweep(level.A, level.lower, x, b, lower=True)

    P = mg.prolongations[index - 1]
    coarse_rhs = P.T @ (b - level.A @ x)
    coarse_x = np.zeros(P.shape[1])
    visits = 2 if mg.cycle == CycleType.W else 1
    for _ in range(visits):
        coarse_x = _cycle(mg, index - 1, coarse_x, coarse_rhs)
    x = x + P @ coarse_x

    for _ in range(mg.post_sweeps):
        x = _triangular_sweep(level.A, level.upper, x, b, lower=False)
    return x


def mg_apply(mg: MgHierarchy, r: FloatArray) -> FloatArray:
    """
    Approximates ``A^-1 r`` by ``mg.cycles`` cycles from a zero initial guess.
    A depth-one hierarchy is the exact dense solve.
    """
    if r.shape != (mg.fine.A.shape[0],):
        raise DimensionMismatchError(f"Multigrid of size {mg.fine.A.shape[0]} applied to {r.shape}")
    z = np.zeros_like(r, dtype=np.float64)
    for _ in range(mg.cycles):
        z = _cycle(mg, mg.depth - 1, z, r)
    return z


def mg_contraction(mg: MgHierarchy, iterations: int = 10, seed: Optional[int] = 0) -> float:
    """
    Average energy-norm contraction per cycle of the stationary iteration
    ``e <- e - B A e`` started from a random error.
    """
    A = mg.fine.A
    rng = np.random.default_rng(seed)
    error = rng.standard_normal(A.shape[0])
    initial = math.sqrt(float(error @ (A @ error)))
    for _ in range(iterations):
        error = error - mg_apply(mg, A @ error)
    final = math.sqrt(max(float(error @ (A @ error)), 0.0))
    factor = (final / initial) ** (1.0 / iterations)
    logger.debug(f"Multigrid contraction over {iterations} cycles: {factor:.4f}")
    return factor
