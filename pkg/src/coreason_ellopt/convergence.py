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
from typing import List, Optional, Sequence

import numpy as np

from coreason_ellopt.assembly import element_chunks, element_geometry
from coreason_ellopt.exceptions import DimensionMismatchError
from coreason_ellopt.mesh import StructuredSimplicialMesh
from coreason_ellopt.models import FloatArray, TargetKind
from coreason_ellopt.quadrature import simplex_rule
from coreason_ellopt.targets import TargetLike, as_function, target_gradient
from coreason_ellopt.utils.logger import logger


def _full_vector(mesh: StructuredSimplicialMesh, u: FloatArray) -> FloatArray:
    if u.shape != (mesh.n_interior,):
        raise DimensionMismatchError(f"Expected {mesh.n_interior} interior coefficients, got {u.shape}")
    full = np.zeros(mesh.n_vertices)
    full[mesh.interior_vertices] = u
    return full


def l2_error(mesh: StructuredSimplicialMesh, u: FloatArray, target: TargetLike, quad_order: int = 4) -> float:
    """
    ``|| u_h - target ||_L2`` for the P1 function with interior coefficients ``u``
    (zero on the boundary), integrated element by element.
    """
    full = _full_vector(mesh, u)
    points, weights = simplex_rule(mesh.dim, quad_order)
    evaluate = as_function(target)

    total = 0.0
    for chunk in element_chunks(mesh.n_simplices):
        simplices = mesh.simplices[chunk]
        coords = mesh.vertices[simplices]
        _, volumes = element_geometry(coords)
        discrete = full[simplices] @ points.T
        physical = np.einsum("qk,nkd->nqd", points, coords)
        exact = evaluate(physical.reshape(-1, mesh.dim)).reshape(discrete.shape)
        total += float(volumes @ (((discrete - exact) ** 2) @ weights))
    return math.sqrt(total)


def h1_seminorm_error(
    mesh: StructuredSimplicialMesh, u: FloatArray, target: TargetKind, quad_order: int = 4
) -> float:
    """
    ``| u_h - target |_H1``. The discrete gradient is constant per element.

    Raises:
        ValueError: For the cube indicator target.
    """
    full = _full_vector(mesh, u)
    points, weights = simplex_rule(mesh.dim, quad_order)

    total = 0.0
    for chunk in element_chunks(mesh.n_simplices):
        simplices = mesh.simplices[chunk]
        coords = mesh.vertices[simplices]
        grads, volumes = element_geometry(coords)
        discrete = np.einsum("nk,nkd->nd", full[simplices], grads)
        physical = np.einsum("qk,nkd->nqd", points, coords)
        exact = target_gradient(target, physical)
        squared = np.sum((discrete[:, None, :] - exact) ** 2, axis=-1)
        total += float(volumes @ (squared @ weights))
    return math.sqrt(total)


def eoc(error_coarse: float, error_fine: float) -> float:
    """
    Order of convergence between consecutive levels (h halves): ``log2(e_coarse / e_fine)``.

    Raises:
        ValueError: If an error is not strictly positive.
    """
    if error_coarse <= 0.0 or error_fine <= 0.0:
        logger.error(f"EOC undefined for errors {error_coarse} and {error_fine}")
        raise ValueError("EOC needs strictly positive errors")
    return math.log2(error_coarse / error_fine)


def eoc_sequence(errors: Sequence[float]) -> List[Optional[float]]:
    """EOC for every entry against its predecessor; the first entry has none."""
    if not errors:
        return []
    orders: List[Optional[float]] = [None]
    for coarse, fine in zip(errors[:-1], errors[1:], strict=True):
        orders.append(eoc(coarse, fine) if coarse > 0.0 and fine > 0.0 else None)
    return orders


def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """Least-squares slope of ``log(y)`` over ``log(x)``; None with fewer than two points."""
    if len(xs) != len(ys):
        raise DimensionMismatchError(f"{len(xs)} abscissae for {len(ys)} ordinates")
    if len(xs) < 2:
        return None
    slope, _ = np.polyfit(np.log(np.asarray(xs)), np.log(np.asarray(ys)), 1)
    return float(slope)
