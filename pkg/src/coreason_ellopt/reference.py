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
Published d = 3 benchmark values (levels 1 to 8, rho = h**4) and the comparison
of a computed EOC table against them.
"""

from typing import Dict, List, Optional

from coreason_ellopt.models import (
    EocTable,
    ReferenceDeviation,
    ReferenceReport,
    SolverKind,
    TargetKind,
)
from coreason_ellopt.utils.logger import logger

# L2 errors of the consistent-mass approaches (1 to 3 share the discrete solution).
MIXED_ERRORS: Dict[TargetKind, List[float]] = {
    TargetKind.SMOOTH_SINE: [
        3.04904e-1, 7.14457e-2, 5.35113e-3, 6.22449e-4,
        1.34331e-4, 3.27079e-5, 8.07438e-6, 2.00173e-6,
    ],
    TargetKind.PYRAMID: [
        2.72445e-1, 8.50409e-2, 2.99226e-2, 1.04906e-2,
        3.70527e-3, 1.30970e-3, 4.63061e-4, 1.63735e-4,
    ],
    TargetKind.CUBE_INDICATOR: [
        3.28255e-1, 2.30561e-1, 1.63827e-1, 1.15682e-1,
        8.16986e-2, 5.77276e-2, 4.08035e-2, 2.88466e-2,
    ],
    TargetKind.SHIFTED_SINE: [
        1.15861, 6.72524e-1, 4.63819e-1, 3.27310e-1,
        2.31129e-1, 1.63305e-1, 1.15426e-1, 8.16011e-2,
    ],
}

# L2 errors of the inexact Schur approach (lumped inner inverse).
SCHUR_ERRORS: Dict[TargetKind, List[float]] = {
    TargetKind.SMOOTH_SINE: [
        3.03162e-1, 6.92534e-2, 5.29228e-3, 6.19849e-4,
        1.33758e-4, 3.25740e-5, 8.04282e-6, 1.99422e-6,
    ],
    TargetKind.PYRAMID: [
        2.71300e-1, 8.41925e-2, 2.90354e-2, 1.00864e-2,
        3.54103e-3, 1.24752e-3, 4.40293e-4, 1.55529e-4,
    ],
    TargetKind.CUBE_INDICATOR: [
        3.26425e-1, 2.25595e-1, 1.59922e-1, 1.12852e-1,
        7.96806e-2, 5.62946e-2, 3.97882e-2, 2.81281e-2,
    ],
    TargetKind.SHIFTED_SINE: [
        1.15659, 6.73325e-1, 4.62241e-1, 3.25524e-1,
        2.29647e-1, 1.62176e-1, 1.14599e-1, 8.10057e-2,
    ],
}

ITERATIONS: Dict[TargetKind, Dict[SolverKind, List[int]]] = {
    TargetKind.SMOOTH_SINE: {
        SolverKind.MG_MINRES: [19, 21, 20, 20, 18, 18, 18, 18],
        SolverKind.DIAG_MINRES: [21, 172, 234, 231, 225, 220, 213, 205],
        SolverKind.BP_PCG: [24, 180, 254, 247, 242, 235, 229, 223],
        SolverKind.INEXACT_SCHUR_PCG: [10, 88, 126, 132, 130, 128, 124, 120],
    },
    TargetKind.PYRAMID: {
        SolverKind.MG_MINRES: [19, 23, 23, 23, 24, 24, 22, 20],
        SolverKind.DIAG_MINRES: [21, 185, 258, 256, 248, 240, 230, 220],
        SolverKind.BP_PCG: [24, 184, 265, 275, 257, 249, 241, 234],
        SolverKind.INEXACT_SCHUR_PCG: [10, 94, 133, 138, 137, 134, 129, 123],
    },
    TargetKind.CUBE_INDICATOR: {
        SolverKind.MG_MINRES: [21, 25, 25, 25, 26, 26, 26, 26],
        SolverKind.DIAG_MINRES: [21, 191, 268, 276, 274, 276, 274, 271],
        SolverKind.BP_PCG: [25, 183, 272, 285, 284, 279, 266, 237],
        SolverKind.INEXACT_SCHUR_PCG: [10, 97, 136, 149, 149, 149, 145, 141],
    },
    TargetKind.SHIFTED_SINE: {
        SolverKind.MG_MINRES: [21, 23, 25, 24, 26, 26, 26, 24],
        SolverKind.DIAG_MINRES: [21, 182, 264, 270, 268, 271, 268, 265],
        SolverKind.BP_PCG: [24, 185, 269, 268, 269, 267, 266, 263],
        SolverKind.INEXACT_SCHUR_PCG: [10, 96, 137, 147, 148, 150, 149, 147],
    },
}

PUBLISHED_LEVELS = 8
DEFAULT_ERROR_TOLERANCE = 0.05
DEFAULT_ITERATION_TOLERANCE = 0.25


def published_error(target: TargetKind, solver: SolverKind, level: int) -> Optional[float]:
    """Published L2 error, or None outside levels 1..8."""
    if not 1 <= level <= PUBLISHED_LEVELS:
        return None
    table = SCHUR_ERRORS if solver == SolverKind.INEXACT_SCHUR_PCG else MIXED_ERRORS
    return table[target][level - 1]


def published_iterations(target: TargetKind, solver: SolverKind, level: int) -> Optional[int]:
    """Published iteration count, or None outside levels 1..8."""
    if not 1 <= level <= PUBLISHED_LEVELS:
        return None
    return ITERATIONS[target][solver][level - 1]


def compare_to_reference(
    table: EocTable,
    error_tolerance: float = DEFAULT_ERROR_TOLERANCE,
    iteration_tolerance: float = DEFAULT_ITERATION_TOLERANCE,
) -> ReferenceReport:
    """
    Compares every row of a d = 3, rho = h**4 study with the published values.

    Raises:
        ValueError: If the study is not comparable (wrong dimension or rho exponent).
    """
    config = table.config
    if config.dim != 3 or config.rho_exponent != 4.0:
        raise ValueError(
            f"Published values exist for d=3 and rho=h^4 only, got d={config.dim}, exponent {config.rho_exponent}"
        )

    deviations: List[ReferenceDeviation] = []
    skipped: List[int] = []
    for row in table.rows:
        ref_error = published_error(config.target, config.solver, row.level)
        ref_iterations = published_iterations(config.target, config.solver, row.level)
        if ref_error is None or ref_iterations is None:
            skipped.append(row.level)
            continue
        deviations.append(_calculate_deviation(row.level, "l2_error", row.l2_error, ref_error, error_tolerance))
        deviations.append(
            _calculate_deviation(
                row.level, "iterations", float(row.stats.iterations), float(ref_iterations), iteration_tolerance
            )
        )

    report = ReferenceReport(
        target=config.target,
        solver=config.solver,
        error_tolerance=error_tolerance,
        iteration_tolerance=iteration_tolerance,
        deviations=deviations,
        skipped_levels=skipped,
    )
    outside = [d for d in deviations if d.outside_band]
    if outside:
        logger.warning(f"{len(outside)} values outside the published band: {[(d.level, d.name) for d in outside]}")
    return report


def _calculate_deviation(
    level: int, name: str, current_val: float, reference_val: float, tolerance: float
) -> ReferenceDeviation:
    """Helper to calculate delta and band status."""
    delta = current_val - reference_val
    if reference_val == 0:
        pct_change = 1.0 if current_val != 0 else 0.0
    else:
        pct_change = delta / abs(reference_val)

    return ReferenceDeviation(
        level=level,
        name=name,
        current_value=current_val,
        reference_value=reference_val,
        delta=abs(delta),
        pct_change=pct_change,
        outside_band=abs(pct_change) > tolerance,
    )
