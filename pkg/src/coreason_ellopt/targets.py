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
Benchmark desired states. Points are arrays whose last axis holds the coordinates.
"""

from typing import Callable, Union

import numpy as np
import numpy.typing as npt

from coreason_ellopt.models import FloatArray, TargetKind
from coreason_ellopt.utils.logger import logger

TargetFunction = Callable[[FloatArray], FloatArray]
TargetLike = Union[TargetKind, TargetFunction]


def _sine_product(x: FloatArray) -> FloatArray:
    return np.asarray(np.prod(np.sin(np.pi * x), axis=-1), dtype=np.float64)


def evaluate_target(target: TargetKind, x: npt.ArrayLike) -> FloatArray:
    """
    Evaluates a benchmark target at one point or a stack of points.

    Smooth sine: prod sin(pi x_i). Pyramid: max(0, 1 - 2 max|x_i - 1/2|).
    Cube indicator: 1 on the open cube (1/4, 3/4)^d. Shifted sine: 1 + smooth sine.
    """
    points = np.asarray(x, dtype=np.float64)
    if target == TargetKind.SMOOTH_SINE:
        return _sine_product(points)
    if target == TargetKind.PYRAMID:
        distance = np.max(np.abs(points - 0.5), axis=-1)
        return np.asarray(np.maximum(0.0, 1.0 - 2.0 * distance), dtype=np.float64)
    if target == TargetKind.CUBE_INDICATOR:
        inside = np.all((points > 0.25) & (points < 0.75), axis=-1)
        return inside.astype(np.float64)
    if target == TargetKind.SHIFTED_SINE:
        return 1.0 + _sine_product(points)
    logger.error(f"Unknown target {target!r}")
    raise ValueError(f"Unknown target {target!r}")


def target_gradient(target: TargetKind, x: npt.ArrayLike) -> FloatArray:
    """
    Gradient of a target, same shape as ``x``.

    Raises:
        ValueError: For the cube indicator, which has no L2 gradient.
    """
    points = np.asarray(x, dtype=np.float64)
    if target in (TargetKind.SMOOTH_SINE, TargetKind.SHIFTED_SINE):
        sines = np.sin(np.pi * points)
        cosines = np.cos(np.pi * points)
        dim = points.shape[-1]
        grad = np.empty_like(points)
        for axis in range(dim):
            others = np.prod(np.delete(sines, axis, axis=-1), axis=-1)
            grad[..., axis] = np.pi * cosines[..., axis] * others
        return grad
    if target == TargetKind.PYRAMID:
        offset = points - 0.5
        steepest = np.argmax(np.abs(offset), axis=-1)
        inside = np.max(np.abs(offset), axis=-1) < 0.5
        grad = np.zeros_like(points)
        picked = np.take_along_axis(offset, steepest[..., None], axis=-1)[..., 0]
        np.put_along_axis(grad, steepest[..., None], (-2.0 * np.sign(picked) * inside)[..., None], axis=-1)
        return grad
    logger.error(f"Target {target!r} has no gradient")
    raise ValueError(f"Target {target.value if isinstance(target, TargetKind) else target!r} has no H1 gradient")


def as_function(target: TargetLike) -> TargetFunction:
    """Wraps a benchmark target as a plain callable; callables pass through."""
    if isinstance(target, TargetKind):
        kind = target
        return lambda points: evaluate_target(kind, points)
    return target
