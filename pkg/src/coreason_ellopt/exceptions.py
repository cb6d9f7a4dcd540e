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
Failure classes raised by the solver suite.

Argument problems derive from ``ValueError`` and numerical failures from
``RuntimeError`` so that callers catching the builtin types keep working.
"""


class MeshError(ValueError):
    """Invalid mesh request (unsupported dimension or level)."""


class AssemblyError(ValueError):
    """Degenerate element or non-positive diagonal during assembly."""


class DimensionMismatchError(ValueError):
    """Operand shapes do not match."""


class SingularMatrixError(ValueError):
    """A dense factorization failed (singular or not positive definite)."""


class SolverBreakdownError(RuntimeError):
    """Lanczos breakdown, non-positive curvature or a non-converging eigen-iteration."""


class NonConvergenceError(RuntimeError):
    """A study level stopped before reaching the requested residual reduction (strict mode)."""
