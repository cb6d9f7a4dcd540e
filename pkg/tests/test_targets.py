# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ellopt

import numpy as np
import pytest

from coreason_ellopt.models import FloatArray, TargetKind
from coreason_ellopt.targets import as_function, evaluate_target, target_gradient


@pytest.mark.parametrize(
    "target, centre, corner",
    [
        (TargetKind.SMOOTH_SINE, 1.0, 0.0),
        (TargetKind.PYRAMID, 1.0, 0.0),
        (TargetKind.CUBE_INDICATOR, 1.0, 0.0),
        (TargetKind.SHIFTED_SINE, 2.0, 1.0),
    ],
)
def test_target_values(target: TargetKind, centre: float, corner: float) -> None:
    values = evaluate_target(target, [[0.5, 0.5, 0.5], [0.0, 0.3, 0.7]])
    np.testing.assert_allclose(values, [centre, corner], atol=1e-15)


def test_single_point_returns_scalar_array() -> None:
    value = evaluate_target(TargetKind.PYRAMID, [0.5, 0.25])
    assert value.shape == ()
    assert float(value) == pytest.approx(0.5)


def test_cube_indicator_is_open() -> None:
    values = evaluate_target(TargetKind.CUBE_INDICATOR, [[0.25, 0.5, 0.5], [0.26, 0.5, 0.74], [0.5, 0.75, 0.5]])
    np.testing.assert_array_equal(values, [0.0, 1.0, 0.0])


@pytest.mark.parametrize("target", [TargetKind.SMOOTH_SINE, TargetKind.SHIFTED_SINE, TargetKind.PYRAMID])
def test_gradient_matches_finite_differences(target: TargetKind) -> None:
    point = np.array([0.31, 0.62, 0.44])
    step = 1e-6
    expected = [
        (evaluate_target(target, point + step * e) - evaluate_target(target, point - step * e)) / (2 * step)
        for e in np.eye(3)
    ]
    np.testing.assert_allclose(target_gradient(target, point), expected, atol=1e-6)


def test_pyramid_gradient_outside_support() -> None:
    grad = target_gradient(TargetKind.PYRAMID, np.array([[0.0, 0.5], [0.6, 0.5]]))
    np.testing.assert_allclose(grad, [[0.0, 0.0], [-2.0, 0.0]])


def test_cube_indicator_has_no_gradient() -> None:
    with pytest.raises(ValueError, match="no H1 gradient"):
        target_gradient(TargetKind.CUBE_INDICATOR, np.zeros(3))


def test_as_function() -> None:
    def custom(points: FloatArray) -> FloatArray:
        return np.ones(points.shape[0])

    assert as_function(custom) is custom
    wrapped = as_function(TargetKind.SHIFTED_SINE)
    np.testing.assert_allclose(wrapped(np.array([[0.5, 0.5]])), [2.0])
