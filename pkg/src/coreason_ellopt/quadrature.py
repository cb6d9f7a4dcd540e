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
Symmetric quadrature rules on the reference simplex, in barycentric form.

Weights sum to one; multiply by the element volume to integrate.
"""

import itertools
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from coreason_ellopt.models import FloatArray
from coreason_ellopt.utils.logger import logger

QuadratureRule = Tuple[FloatArray, FloatArray]


def _orbit(values: Sequence[float]) -> List[Tuple[float, ...]]:
    """Distinct permutations of one barycentric point, in a fixed order."""
    return sorted(set(itertools.permutations(values)), reverse=True)


def _rule(groups: Sequence[Tuple[Sequence[float], float]]) -> QuadratureRule:
    points: List[Tuple[float, ...]] = []
    weights: List[float] = []
    for generator, weight in groups:
        orbit = _orbit(generator)
        points.extend(orbit)
        weights.extend([weight] * len(orbit))
    return np.asarray(points, dtype=np.float64), np.asarray(weights, dtype=np.float64)


def _triangle_rules() -> Dict[int, QuadratureRule]:
    a1, w1 = 0.445948490915965, 0.223381589678011
    a2, w2 = 0.091576213509771, 0.109951743655322
    return {
        1: _rule([((1 / 3, 1 / 3, 1 / 3), 1.0)]),
        2: _rule([((2 / 3, 1 / 6, 1 / 6), 1 / 3)]),
        4: _rule([((a1, a1, 1 - 2 * a1), w1), ((a2, a2, 1 - 2 * a2), w2)]),
    }


def _tetrahedron_rules() -> Dict[int, QuadratureRule]:
    alpha = (5 + 3 * math.sqrt(5)) / 20
    beta = (5 - math.sqrt(5)) / 20
    c = (1 + math.sqrt(5 / 14)) / 4
    d = (1 - math.sqrt(5 / 14)) / 4
    return {
        1: _rule([((0.25, 0.25, 0.25, 0.25), 1.0)]),
        2: _rule([((alpha, beta, beta, beta), 0.25)]),
        # 11-point rule, exact for degree 4; the centroid weight is negative.
        4: _rule(
            [
                ((0.25, 0.25, 0.25, 0.25), -148 / 1875),
                ((11 / 14, 1 / 14, 1 / 14, 1 / 14), 343 / 7500),
                ((c, c, d, d), 56 / 375),
            ]
        ),
    }


_RULES: Dict[int, Dict[int, QuadratureRule]] = {2: _triangle_rules(), 3: _tetrahedron_rules()}


def simplex_rule(dim: int, order: int) -> QuadratureRule:
    """
    Returns ``(barycentric_points, weights)`` of shape ``(q, dim + 1)`` and ``(q,)``.

    Raises:
        ValueError: If no rule of the requested order exists.
    """
    if dim not in _RULES or order not in _RULES[dim]:
        logger.error(f"No quadrature rule for d={dim}, order={order}")
        raise ValueError(f"Quadrature order must be one of {sorted(_RULES.get(dim, {}))} for d={dim}, got {order}")
    points, weights = _RULES[dim][order]
    return points.copy(), weights.copy()
