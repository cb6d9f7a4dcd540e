# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ellopt

"""Multi-level benchmark runs. Selected with ``pytest -m slow``."""

from functools import lru_cache
from typing import Tuple

import numpy as np
import pytest

from coreason_ellopt.experiments import rho_sweep, run_study, spectral_report
from coreason_ellopt.models import EocTable, RunConfig, SolverKind, TargetKind

pytestmark = pytest.mark.slow

EOC_BANDS = {
    TargetKind.SMOOTH_SINE: (1.95, 2.45),
    TargetKind.PYRAMID: (1.40, 1.60),
    TargetKind.CUBE_INDICATOR: (0.45, 0.55),
    TargetKind.SHIFTED_SINE: (0.45, 0.55),
}

ITERATION_BANDS = {
    SolverKind.MG_MINRES: (1, 32),
    SolverKind.DIAG_MINRES: (180, 340),
    SolverKind.BP_PCG: (190, 350),
    SolverKind.INEXACT_SCHUR_PCG: (95, 195),
}

SWEEP_SLOPES = {
    TargetKind.SMOOTH_SINE: (0.4, 0.6),
    TargetKind.PYRAMID: (0.15, 0.35),
}


@lru_cache(maxsize=None)
def _study(target: TargetKind, solver: SolverKind, levels: Tuple[int, int] = (3, 5)) -> EocTable:
    config = RunConfig(
        level_min=levels[0], level_max=levels[1], target=target, solver=solver, record_timing=False, threads=4
    )
    return run_study(config)


@pytest.mark.parametrize("target", list(TargetKind))
def test_mg_minres_eoc_between_levels_four_and_five(target: TargetKind) -> None:
    table = _study(target, SolverKind.MG_MINRES)
    finest = table.rows[-1]
    assert finest.level == 5
    assert finest.eoc is not None
    low, high = EOC_BANDS[target]
    assert low <= finest.eoc <= high


@pytest.mark.parametrize(
    "target, published, factor",
    [
        (TargetKind.CUBE_INDICATOR, 8.16986e-2, 1.15),
        (TargetKind.SHIFTED_SINE, 2.31129e-1, 1.15),
    ],
)
def test_level_five_error_magnitude(target: TargetKind, published: float, factor: float) -> None:
    error = _study(target, SolverKind.MG_MINRES).rows[-1].l2_error
    assert published / factor <= error <= published * factor


def test_smooth_target_error_magnitude() -> None:
    error = _study(TargetKind.SMOOTH_SINE, SolverKind.MG_MINRES).rows[-1].l2_error
    assert 1.34331e-4 / 2.0 <= error <= 1.34331e-4 * 2.0


@pytest.mark.parametrize("target", list(TargetKind))
def test_inexact_schur_error_tracks_mixed_solution(target: TargetKind) -> None:
    mixed = _study(target, SolverKind.MG_MINRES)
    schur = _study(target, SolverKind.INEXACT_SCHUR_PCG)
    for exact_row, inexact_row in zip(mixed.rows, schur.rows, strict=True):
        assert abs(inexact_row.l2_error - exact_row.l2_error) <= 0.05 * exact_row.l2_error


@pytest.mark.parametrize("solver", list(SolverKind))
@pytest.mark.parametrize("target", list(TargetKind))
def test_iteration_counts_are_level_robust(target: TargetKind, solver: SolverKind) -> None:
    table = _study(target, solver)
    assert table.all_converged
    low, high = ITERATION_BANDS[solver]
    iterations = {row.level: row.stats.iterations for row in table.rows}
    for count in iterations.values():
        assert low <= count <= high
    assert iterations[5] <= 1.25 * iterations[4]


@pytest.mark.parametrize("solver", [SolverKind.MG_MINRES, SolverKind.DIAG_MINRES])
@pytest.mark.parametrize("target", list(TargetKind))
def test_minres_residual_never_increases(target: TargetKind, solver: SolverKind) -> None:
    table = _study(target, solver, (2, 3))
    for row in table.rows:
        history = np.asarray(row.stats.residual_history)
        assert len(history) == row.stats.iterations + 1
        assert np.all(np.diff(history) <= 1e-12 * history[0])


def test_stiffness_eigenvalue_scales_with_inverse_h_squared() -> None:
    report = spectral_report([2, 3, 4], samples=20, seed=0)
    products = [row.lambda_max_h2 for row in report.rows]
    assert max(products) <= 1.10 * min(products)


def test_schur_complement_bounded_below_by_mass() -> None:
    report = spectral_report([1, 2], samples=200, seed=0)
    for row in report.rows:
        assert row.mass_solve == "dense"
        assert row.schur_rayleigh_min >= 1.0 - 1e-10
    coarse, fine = report.rows
    assert abs(fine.schur_rayleigh_max - coarse.schur_rayleigh_max) <= 0.10 * coarse.schur_rayleigh_max


@pytest.mark.parametrize("target", list(SWEEP_SLOPES))
def test_regularization_rate(target: TargetKind) -> None:
    result = rho_sweep(4, target, workers=4)
    assert result.fitted_slope is not None
    low, high = SWEEP_SLOPES[target]
    assert low <= result.fitted_slope <= high
