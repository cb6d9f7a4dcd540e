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
Convergence studies, regularization sweeps and spectral diagnostics.
"""

import math
from enum import Enum
from typing import Any, Callable, Coroutine, Dict, List, Optional, Sequence, Tuple

import anyio
import anyio.to_thread
import numpy as np
import scipy.sparse as sp

from coreason_ellopt.assembly import (
    assemble_load,
    assemble_mass,
    assemble_problem,
    assemble_stiffness,
    mass_diagonal,
)
from coreason_ellopt.convergence import eoc_sequence, fit_slope, h1_seminorm_error, l2_error
from coreason_ellopt.exceptions import NonConvergenceError, SolverBreakdownError
from coreason_ellopt.krylov import pcg
from coreason_ellopt.linalg import CholeskyFactor
from coreason_ellopt.mesh import build_hierarchy, build_mesh
from coreason_ellopt.models import (
    CycleType,
    DiagVariant,
    EocTable,
    FloatArray,
    LevelResult,
    RunConfig,
    SolverKind,
    SpectralReport,
    SpectralRow,
    SweepPoint,
    SweepResult,
    TargetKind,
)
from coreason_ellopt.multigrid import build_mg, mg_contraction
from coreason_ellopt.solvers import solve
from coreason_ellopt.utils.logger import logger

ProgressCallback = Callable[[int, int, LevelResult], Coroutine[Any, Any, None]]

DEFAULT_SWEEP_RHOS: Tuple[float, ...] = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
SWEEP_BASELINE_FACTOR = 3.0

_POWER_RTOL = 1e-8
_POWER_MAX_STEPS = 10000
_MASS_SOLVE_RTOL = 1e-13


class MassSolve(str, Enum):
    """How ``M^-1`` is applied in the spectral diagnostics."""

    DENSE = "dense"
    CG = "cg"
    LUMPED = "lumped"


def run_level(config: RunConfig, level: int) -> LevelResult:
    """
    Builds, assembles and solves one level of a study. The EOC is left empty.
    """
    if config.solver == SolverKind.MG_MINRES:
        hierarchy = build_hierarchy(config.dim, level)
        mesh = hierarchy.finest
    else:
        hierarchy = None
        mesh = build_mesh(config.dim, level)

    rho = config.rho(mesh.h)
    problem = assemble_problem(mesh, config.target, rho, config.quad_order, workers=config.threads)

    mg = None
    contraction: Optional[float] = None
    if hierarchy is not None:
        mg = build_mg(
            hierarchy,
            problem.M,
            problem.K,
            rho,
            cycle=config.cycle,
            pre_sweeps=config.pre_sweeps,
            post_sweeps=config.post_sweeps,
            cycles=config.mg_cycles,
        )
        contraction = mg_contraction(mg, seed=config.seed)

    result = solve(
        problem,
        config.solver,
        mg=mg,
        diag_variant=config.diag_variant,
        rtol=config.rtol,
        max_it=config.max_iterations,
    )
    stats = result.stats
    if not stats.converged:
        logger.warning(
            f"Level {level} ({config.solver.value}) did not converge: {stats.iterations} iterations, "
            f"residual ratio {stats.final_prec_residual / max(stats.initial_prec_residual, 1e-300):.3e}"
        )
    if not config.record_timing:
        stats = stats.model_copy(update={"wall_time": 0.0})

    error = l2_error(mesh, result.state, config.target, config.quad_order)
    logger.info(f"Level {level}: N_h={mesh.n_interior}, error={error:.6e}, iterations={stats.iterations}")
    return LevelResult(
        level=level,
        h=mesh.h,
        rho=rho,
        n_dofs=mesh.n_interior,
        l2_error=error,
        stats=stats,
        mg_contraction=contraction,
    )


def with_eoc(rows: Sequence[LevelResult]) -> List[LevelResult]:
    """Fills the EOC column of rows ordered by level."""
    ordered = sorted(rows, key=lambda row: row.level)
    orders = eoc_sequence([row.l2_error for row in ordered])
    return [row.model_copy(update={"eoc": order}) for row, order in zip(ordered, orders, strict=True)]


async def run_study_async(config: RunConfig, on_progress: Optional[ProgressCallback] = None) -> EocTable:
    """
    Runs every level of ``config`` in worker threads, at most ``config.threads`` at a time.

    Args:
        config: The study configuration.
        on_progress: Optional async callback (completed_count, total_count, last_row).

    Returns:
        EocTable: Rows ordered by level, EOC filled in.
    """
    levels = config.levels
    logger.info(
        f"Starting study d={config.dim} levels {config.level_min}..{config.level_max} "
        f"target {config.target.value} solver {config.solver.value}"
    )
    results: Dict[int, LevelResult] = {}
    completed_count = [0]
    limiter = anyio.CapacityLimiter(config.threads)

    async def _run_and_track(level: int) -> None:
        row = await anyio.to_thread.run_sync(run_level, config, level, limiter=limiter)
        results[level] = row
        completed_count[0] += 1
        if on_progress:
            try:
                await on_progress(completed_count[0], len(levels), row)
            except Exception as e:
                logger.error(f"Error in on_progress callback: {e}")

    async with anyio.create_task_group() as tg:
        for level in levels:
            tg.start_soon(_run_and_track, level)

    rows = with_eoc([results[level] for level in levels])
    logger.info(f"Completed study: {completed_count[0]}/{len(levels)} levels")
    return EocTable(config=config, rows=rows)


def run_study(config: RunConfig, on_progress: Optional[ProgressCallback] = None) -> EocTable:
    """Synchronous entry point of :func:`run_study_async`; a single failing level re-raises its own error."""
    try:
        return anyio.run(run_study_async, config, on_progress)
    except ExceptionGroup as group:
        if len(group.exceptions) == 1:
            raise group.exceptions[0] from None
        raise


def ensure_converged(table: EocTable) -> None:
    """
    Raises:
        NonConvergenceError: If any level of the table stopped short of the tolerance.
    """
    failed = [row.level for row in table.rows if not row.stats.converged]
    if failed:
        logger.error(f"Levels {failed} did not reach rtol={table.config.rtol:g}")
        raise NonConvergenceError(f"Levels {failed} did not converge")


def rho_sweep(
    level: int,
    target: TargetKind,
    rho_values: Sequence[float] = DEFAULT_SWEEP_RHOS,
    dim: int = 3,
    quad_order: int = 4,
    rtol: float = 1e-11,
    cycle: CycleType = CycleType.W,
    workers: int = 1,
) -> SweepResult:
    """
    Solves one level with the multigrid approach for every ``rho`` and fits the
    log-log slope of the error over the points whose error exceeds three times
    the error at ``rho = h**4``.
    """
    if not rho_values or any(rho <= 0.0 for rho in rho_values):
        raise ValueError("rho values must be a non-empty list of positive numbers")

    hierarchy = build_hierarchy(dim, level)
    mesh = hierarchy.finest
    baseline_rho = mesh.h**4
    base = assemble_problem(mesh, target, baseline_rho, quad_order, workers=workers)
    with_gradient = target != TargetKind.CUBE_INDICATOR

    def _solve(rho: float) -> Tuple[FloatArray, int, bool]:
        problem = base.with_rho(rho)
        mg = build_mg(hierarchy, problem.M, problem.K, rho, cycle=cycle)
        result = solve(problem, SolverKind.MG_MINRES, mg=mg, rtol=rtol)
        return result.state, result.stats.iterations, result.stats.converged

    baseline_state, _, _ = _solve(baseline_rho)
    baseline_error = l2_error(mesh, baseline_state, target, quad_order)

    points: List[SweepPoint] = []
    for rho in rho_values:
        state, iterations, converged = _solve(rho)
        error = l2_error(mesh, state, target, quad_order)
        h1 = h1_seminorm_error(mesh, state, target, quad_order) if with_gradient else None
        logger.info(f"rho={rho:.3e}: error={error:.6e}, iterations={iterations}")
        points.append(SweepPoint(rho=rho, l2_error=error, h1_error=h1, iterations=iterations, converged=converged))

    fitted = [p for p in points if p.l2_error > SWEEP_BASELINE_FACTOR * baseline_error]
    slope = fit_slope([p.rho for p in fitted], [p.l2_error for p in fitted])
    if slope is None:
        logger.warning(f"Only {len(fitted)} sweep points above the baseline band; no slope fitted")
    return SweepResult(
        dim=dim,
        level=level,
        target=target,
        baseline_rho=baseline_rho,
        baseline_error=baseline_error,
        points=points,
        fit_points=len(fitted),
        fitted_slope=slope,
    )


def _mass_inverse(M: sp.csr_matrix, lumped: FloatArray, mode: MassSolve) -> Callable[[FloatArray], FloatArray]:
    if mode == MassSolve.DENSE:
        factor = CholeskyFactor(M)
        return factor.solve
    if mode == MassSolve.LUMPED:
        return lambda x: x / lumped if x.ndim == 1 else x / lumped[:, None]
    diagonal = M.diagonal()

    def _cg(x: FloatArray) -> FloatArray:
        if x.ndim == 2:
            return np.column_stack([_cg(column) for column in x.T])
        solution, _ = pcg(lambda v: M @ v, lambda r: r / diagonal, x, rtol=_MASS_SOLVE_RTOL)
        return solution

    return _cg


def largest_generalized_eigenvalue(
    K: sp.csr_matrix, M: sp.csr_matrix, mass_inverse: Callable[[FloatArray], FloatArray], seed: int = 0
) -> float:
    """
    Power iteration for the largest eigenvalue of ``M^-1 K``, estimated by the
    Rayleigh quotient ``(K x, x) / (M x, x)``.

    Raises:
        SolverBreakdownError: If the estimate does not settle.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(K.shape[0])
    x /= np.linalg.norm(x)
    estimate = 0.0
    for step in range(1, _POWER_MAX_STEPS + 1):
        y = mass_inverse(K @ x)
        x = y / np.linalg.norm(y)
        updated = float(x @ (K @ x)) / float(x @ (M @ x))
        if abs(updated - estimate) <= _POWER_RTOL * abs(updated):
            logger.debug(f"Power iteration settled after {step} steps at {updated:.8e}")
            return updated
        estimate = updated
    logger.error(f"Power iteration did not settle within {_POWER_MAX_STEPS} steps")
    raise SolverBreakdownError("Power iteration did not converge")


def spectral_report(
    levels: Sequence[int],
    dim: int = 3,
    rho_exponent: float = 4.0,
    samples: int = 200,
    seed: int = 0,
    dense_max_level: int = 2,
    lumped_surrogate: bool = False,
) -> SpectralReport:
    """
    Per level: the largest eigenvalue of ``M^-1 K`` and sampled Rayleigh quotients
    of the Schur complement ``S = rho K M^-1 K + M`` and of ``A = M + sqrt(rho) K``,
    both against M.

    ``M^-1`` is a dense Cholesky solve up to ``dense_max_level``; above it an inner
    CG solve, or the lumped mass if ``lumped_surrogate`` is set (biased estimate).
    """
    rows: List[SpectralRow] = []
    rng = np.random.default_rng(seed)
    for level in levels:
        mesh = build_mesh(dim, level)
        K = assemble_stiffness(mesh)
        M = assemble_mass(mesh)
        lumped = mass_diagonal(M, mesh, DiagVariant.LUMP)
        rho = mesh.h**rho_exponent
        if level <= dense_max_level:
            mode = MassSolve.DENSE
        else:
            mode = MassSolve.LUMPED if lumped_surrogate else MassSolve.CG
        mass_inverse = _mass_inverse(M, lumped, mode)

        lam = largest_generalized_eigenvalue(K, M, mass_inverse, seed=seed)

        vectors = rng.standard_normal((mesh.n_interior, samples))
        mass_energy = np.einsum("ij,ij->j", vectors, M @ vectors)
        stiff = K @ vectors
        schur_energy = rho * np.einsum("ij,ij->j", stiff, mass_inverse(stiff)) + mass_energy
        a_energy = mass_energy + math.sqrt(rho) * np.einsum("ij,ij->j", vectors, stiff)
        schur_ratio = schur_energy / mass_energy
        a_ratio = a_energy / mass_energy

        logger.info(
            f"Spectral level {level}: lambda_max={lam:.6e}, lambda_max*h^2={lam * mesh.h**2:.6f}, "
            f"S/M in [{schur_ratio.min():.4f}, {schur_ratio.max():.4f}] ({mode.value})"
        )
        rows.append(
            SpectralRow(
                level=level,
                h=mesh.h,
                rho=rho,
                n_dofs=mesh.n_interior,
                lambda_max=lam,
                lambda_max_h2=lam * mesh.h**2,
                rho_lambda_max2=rho * lam**2,
                mass_solve=mode.value,
                schur_rayleigh_min=float(schur_ratio.min()),
                schur_rayleigh_max=float(schur_ratio.max()),
                a_rayleigh_min=float(a_ratio.min()),
                a_rayleigh_max=float(a_ratio.max()),
            )
        )
    return SpectralReport(dim=dim, rho_exponent=rho_exponent, samples=samples, seed=seed, rows=rows)


def assemble_level(
    dim: int, level: int, target: TargetKind, quad_order: int = 4, workers: int = 1
) -> Tuple[sp.csr_matrix, sp.csr_matrix, FloatArray]:
    """K, M and f of one level, as written by the export command."""
    mesh = build_mesh(dim, level)
    K = assemble_stiffness(mesh, workers)
    M = assemble_mass(mesh, workers)
    return K, M, assemble_load(mesh, target, quad_order, workers)
