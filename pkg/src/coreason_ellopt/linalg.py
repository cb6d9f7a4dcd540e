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
Sparse kernels, the three block operators of the optimality system, dense
factorizations and Matrix Market I/O.

Block vectors are stored as one contiguous array, first block first.
"""

import math
import warnings
from pathlib import Path
from typing import Tuple

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from coreason_ellopt.exceptions import DimensionMismatchError, SingularMatrixError
from coreason_ellopt.models import FloatArray
from coreason_ellopt.utils.logger import logger

CsrMatrix = sp.csr_matrix


def spmv(A: sp.spmatrix, x: FloatArray) -> FloatArray:
    """
    Sparse matrix-vector product ``A x``.

    Raises:
        DimensionMismatchError: If ``x`` does not have ``A.shape[1]`` entries.
    """
    if x.ndim != 1 or x.shape[0] != A.shape[1]:
        logger.error(f"Cannot apply a {A.shape} matrix to a vector of shape {x.shape}")
        raise DimensionMismatchError(f"Cannot apply a {A.shape} matrix to a vector of shape {x.shape}")
    return np.asarray(A @ x, dtype=np.float64)


def _check_pair(M: sp.spmatrix, K: sp.spmatrix) -> int:
    if M.shape != K.shape or M.shape[0] != M.shape[1]:
        raise DimensionMismatchError(f"Mass {M.shape} and stiffness {K.shape} must be square and equal")
    return int(M.shape[0])


def _split(x: FloatArray, n: int) -> Tuple[FloatArray, FloatArray]:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != 2 * n:
        raise DimensionMismatchError(f"Block operator of size {2 * n} applied to a vector of length {x.shape[0]}")
    return x[:n], x[n:]


class MixedSaddleOperator(LinearOperator):
    """
    Symmetric indefinite optimality system in (state, scaled adjoint)::

        [ M      K       ] [u]
        [ K   -M / rho   ] [p]
    """

    def __init__(self, M: sp.spmatrix, K: sp.spmatrix, rho: float) -> None:
        n = _check_pair(M, K)
        if rho <= 0.0:
            raise ValueError(f"rho must be positive, got {rho}")
        self.M = M
        self.K = K
        self.rho = rho
        self.n = n
        super().__init__(dtype=np.dtype(np.float64), shape=(2 * n, 2 * n))

    def _matvec(self, x: FloatArray) -> FloatArray:
        u, p = _split(x, self.n)
        return np.concatenate([self.M @ u + self.K @ p, self.K @ u - (self.M @ p) / self.rho])

    def _rmatvec(self, x: FloatArray) -> FloatArray:
        return self._matvec(x)


class BpTransformedOperator(LinearOperator):
    """
    Bramble-Pasciak transformation of the system in (transformed adjoint, state).

    With ``C = diag(c_m)`` and ``w = M p + sqrt(rho) K u`` the action is::

        r1 = M C^-1 w - w
        r2 = sqrt(rho) K C^-1 w - (sqrt(rho) K p - M u)

    The transformed matrix is symmetric, and positive definite whenever ``C < M``.
    """

    def __init__(self, M: sp.spmatrix, K: sp.spmatrix, rho: float, c_m: FloatArray) -> None:
        n = _check_pair(M, K)
        if rho <= 0.0:
            raise ValueError(f"rho must be positive, got {rho}")
        if c_m.shape != (n,):
            raise DimensionMismatchError(f"Scaling diagonal has shape {c_m.shape}, expected ({n},)")
        if np.any(c_m <= 0.0):
            raise ValueError("Scaling diagonal must be strictly positive")
        self.M = M
        self.K = K
        self.rho = rho
        self.c_m = c_m
        self.n = n
        super().__init__(dtype=np.dtype(np.float64), shape=(2 * n, 2 * n))

    def _matvec(self, x: FloatArray) -> FloatArray:
        p, u = _split(x, self.n)
        root = math.sqrt(self.rho)
        w = self.M @ p + root * (self.K @ u)
        scaled = w / self.c_m
        r1 = self.M @ scaled - w
        r2 = root * (self.K @ scaled) - (root * (self.K @ p) - self.M @ u)
        return np.concatenate([r1, r2])

    def _rmatvec(self, x: FloatArray) -> FloatArray:
        return self._matvec(x)


class InexactSchurOperator(LinearOperator):
    """``u -> rho K D^-1 K u + M u`` with ``D^-1`` given as a vector."""

    def __init__(self, M: sp.spmatrix, K: sp.spmatrix, rho: float, lump_inv: FloatArray) -> None:
        n = _check_pair(M, K)
        if rho < 0.0:
            raise ValueError(f"rho must be non-negative, got {rho}")
        if lump_inv.shape != (n,):
            raise DimensionMismatchError(f"Inverse diagonal has shape {lump_inv.shape}, expected ({n},)")
        self.M = M
        self.K = K
        self.rho = rho
        self.lump_inv = lump_inv
        self.n = n
        super().__init__(dtype=np.dtype(np.float64), shape=(n, n))

    def _matvec(self, x: FloatArray) -> FloatArray:
        u = np.asarray(x, dtype=np.float64).ravel()
        if u.shape[0] != self.n:
            raise DimensionMismatchError(f"Operator of size {self.n} applied to a vector of length {u.shape[0]}")
        return np.asarray(self.rho * (self.K @ (self.lump_inv * (self.K @ u))) + self.M @ u, dtype=np.float64)

    def _rmatvec(self, x: FloatArray) -> FloatArray:
        return self._matvec(x)


def _check_vector(op: LinearOperator, x: FloatArray) -> FloatArray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (op.shape[1],):
        logger.error(f"Operator of shape {op.shape} applied to a vector of shape {x.shape}")
        raise DimensionMismatchError(f"Operator of shape {op.shape} applied to a vector of shape {x.shape}")
    return x


def apply_mixed(op: MixedSaddleOperator, x: FloatArray) -> FloatArray:
    return np.asarray(op.matvec(_check_vector(op, x)), dtype=np.float64).ravel()


def apply_bp(op: BpTransformedOperator, x: FloatArray) -> FloatArray:
    return np.asarray(op.matvec(_check_vector(op, x)), dtype=np.float64).ravel()


def apply_inexact_schur(op: InexactSchurOperator, x: FloatArray) -> FloatArray:
    return np.asarray(op.matvec(_check_vector(op, x)), dtype=np.float64).ravel()


class CholeskyFactor:
    """Dense Cholesky factorization of a small SPD matrix (the multigrid coarse solve)."""

    def __init__(self, A: sp.spmatrix | FloatArray) -> None:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
        try:
            self._factor = scipy.linalg.cho_factor(dense, lower=True, check_finite=True)
        except np.linalg.LinAlgError as e:
            logger.error(f"Cholesky factorization of a {dense.shape} matrix failed: {e}")
            raise SingularMatrixError("Matrix is not symmetric positive definite") from e
        self.size = int(dense.shape[0])

    def solve(self, b: FloatArray) -> FloatArray:
        if b.shape[0] != self.size:
            raise DimensionMismatchError(f"Factor of size {self.size} applied to {b.shape}")
        return np.asarray(scipy.linalg.cho_solve(self._factor, b), dtype=np.float64)


def dense_solve(A: sp.spmatrix | FloatArray, b: FloatArray) -> FloatArray:
    """
    Solves ``A x = b`` by pivoted LU.

    Raises:
        SingularMatrixError: If the matrix is singular or the residual check fails.
    """
    dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
    if dense.shape[0] != dense.shape[1] or dense.shape[0] != b.shape[0]:
        raise DimensionMismatchError(f"Cannot solve a {dense.shape} system with a right-hand side {b.shape}")
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            x = scipy.linalg.lu_solve(scipy.linalg.lu_factor(dense), b)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError) as e:
            logger.error(f"Dense LU of a {dense.shape} matrix failed: {e}")
            raise SingularMatrixError(f"Singular matrix: {e}") from e
    residual = np.linalg.norm(dense @ x - b)
    scale = max(float(np.linalg.norm(b)), float(np.linalg.norm(dense) * np.linalg.norm(x)), np.finfo(float).tiny)
    if not np.isfinite(residual) or residual > 1e-10 * scale:
        logger.error(f"Dense solve residual {residual:.3e} too large")
        raise SingularMatrixError("Dense solve did not reach the residual bound")
    return np.asarray(x, dtype=np.float64)


def write_matrix_market(path: Path, A: sp.spmatrix | FloatArray, comment: str = "") -> None:
    """
    Writes a sparse matrix (coordinate format) or a vector (array format) with 17 significant digits.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    if sp.issparse(A):
        payload = sp.coo_matrix(A)
    else:
        payload = np.asarray(A, dtype=np.float64).reshape(-1, 1)
    # Given a path, mmwrite appends ".mtx" to names without that suffix.
    with path.open("wb") as fh:
        scipy.io.mmwrite(fh, payload, comment=comment, precision=17)
    logger.info(f"Wrote Matrix Market file {path}")


def read_matrix_market(path: Path) -> sp.csr_matrix | FloatArray:
    """
    Reads a Matrix Market file. Coordinate files become CSR; array files with one
    column become a flat vector.

    Raises:
        FileNotFoundError: If the path does not exist.
    """
    if not path.exists():
        logger.error(f"Matrix Market file not found: {path}")
        raise FileNotFoundError(f"File not found: {path}")
    with path.open("rb") as fh:
        data = scipy.io.mmread(fh)
    if sp.issparse(data):
        matrix = sp.csr_matrix(data, dtype=np.float64)
        matrix.sort_indices()
        return matrix
    array = np.asarray(data, dtype=np.float64)
    if array.ndim == 2 and array.shape[1] == 1:
        return array.ravel()
    return array
