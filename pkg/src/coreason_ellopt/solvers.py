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
The four solution approaches for the discrete optimality system.

1. ``mg-minres``: MINRES on the mixed system, block preconditioner
   ``diag(A, A / rho)`` with ``A = M + sqrt(rho) K`` approximated by multigrid.
2. ``diag-minres``: the same with a diagonal surrogate of M in both blocks.
3. ``bp-pcg``: CG on the Bramble-Pasciak transformed system.
4. ``inex-sc-pcg``: CG on the Schur complement with a lumped inner inverse.
"""

import math
from typing import NamedTuple, Optional

import numpy as np

from coreason_ellopt.assembly import AssembledProblem, preconditioner_diagonal
from coreason_ellopt.krylov import default_max_iterations, minres, pcg
from coreason_ellopt.linalg import BpTransformedOperator, InexactSchurOperator, MixedSaddleOperator
from coreason_ellopt.models import DiagVariant, FloatArray, SolveStats, SolverKind
from coreason_ellopt.multigrid import MgHierarchy, mg_apply
from coreason_ellopt.utils.logger import logger

BP_SCALING = 0.25
# Weight of diag(M) in the Schur block of the Bramble-Pasciak preconditioner.
BP_SCHUR_WEIGHT = 6.0


class SolverResult(NamedTuple):
    """State, adjoint-type block (None for the Schur approach) and statistics."""

    state: FloatArray
    adjoint: Optional[FloatArray]
    stats: SolveStats


def _limit(problem: AssembledProblem, max_it: Optional[int]) -> int:
    return max_it if max_it is not None else default_max_iterations(problem.n_dofs)


def solve_mg_minres(
    problem: AssembledProblem, mg: MgHierarchy, rtol: float = 1e-11, max_it: Optional[int] = None
) -> SolverResult:
    """
    MINRES on the mixed system with the multigrid block preconditioner.
    Returns the state ``u`` and the scaled adjoint ``p_hat``.
    """
    n = problem.n_dofs
    op = MixedSaddleOperator(problem.M, problem.K, problem.rho)
    rhs = np.concatenate([problem.f, np.zeros(n)])
    rho = problem.rho

    def _precondition(r: FloatArray) -> FloatArray:
        return np.concatenate([mg_apply(mg, r[:n]), rho * mg_apply(mg, r[n:])])

    x, stats = minres(op, _precondition, rhs, rtol=rtol, max_it=_limit(problem, max_it))
    logger.info(f"mg-minres level {problem.level}: {stats.iterations} iterations, converged={stats.converged}")
    return SolverResult(x[:n], x[n:], stats)


def solve_diag_minres(
    problem: AssembledProblem,
    variant: DiagVariant = DiagVariant.DIAG,
    rtol: float = 1e-11,
    max_it: Optional[int] = None,
) -> SolverResult:
    """
    MINRES on the mixed system. The preconditioner is ``diag(D, D / rho)`` for a mass diagonal ``D``.
    """
    n = problem.n_dofs
    diagonal = preconditioner_diagonal(problem, variant)
    op = MixedSaddleOperator(problem.M, problem.K, problem.rho)
    rhs = np.concatenate([problem.f, np.zeros(n)])
    inverse = np.concatenate([1.0 / diagonal, problem.rho / diagonal])

    x, stats = minres(op, lambda r: inverse * r, rhs, rtol=rtol, max_it=_limit(problem, max_it))
    logger.info(
        f"diag-minres ({variant.value}) level {problem.level}: {stats.iterations} iterations, "
        f"converged={stats.converged}"
    )
    return SolverResult(x[:n], x[n:], stats)


def solve_bp_pcg(
    problem: AssembledProblem,
    rtol: float = 1e-11,
    max_it: Optional[int] = None,
    schur_weight: float = BP_SCHUR_WEIGHT,
) -> SolverResult:
    """
    Bramble-Pasciak CG on the transformed system.
    Unknowns are ordered (transformed adjoint ``p_tilde``, state ``u``).

    ``C = 0.25 diag(M)`` defines the transformation. The preconditioner is
    ``diag(0.75 diag(M), schur_weight * diag(M))``; its second block stands in for
    ``rho K M^-1 K + M``, whose high-frequency end sits far above ``diag(M)`` when
    ``rho = h^4``.

    Raises:
        ValueError: If ``schur_weight`` is not positive.
    """
    if schur_weight <= 0.0:
        logger.error(f"Invalid Bramble-Pasciak Schur weight {schur_weight}")
        raise ValueError(f"schur_weight must be positive, got {schur_weight}")
    n = problem.n_dofs
    op = BpTransformedOperator(problem.M, problem.K, problem.rho, BP_SCALING * problem.m_diag)
    rhs = np.concatenate([np.zeros(n), problem.f])
    inverse = np.concatenate([1.0 / ((1.0 - BP_SCALING) * problem.m_diag), 1.0 / (schur_weight * problem.m_diag)])

    x, stats = pcg(op, lambda r: inverse * r, rhs, rtol=rtol, max_it=_limit(problem, max_it))
    logger.info(f"bp-pcg level {problem.level}: {stats.iterations} iterations, converged={stats.converged}")
    return SolverResult(x[n:], x[:n], stats)


def solve_inexact_schur(
    problem: AssembledProblem,
    variant: DiagVariant = DiagVariant.LUMP,
    rtol: float = 1e-11,
    max_it: Optional[int] = None,
) -> SolverResult:
    """
    CG on the inexact Schur complement ``(rho K L^-1 K + M) u = f``, with the lumped
    mass ``L`` inside the operator and the chosen mass diagonal as preconditioner.
    No adjoint is produced.
    """
    op = InexactSchurOperator(problem.M, problem.K, problem.rho, 1.0 / problem.m_lump)
    diagonal = preconditioner_diagonal(problem, variant)

    u, stats = pcg(op, lambda r: r / diagonal, problem.f, rtol=rtol, max_it=_limit(problem, max_it))
    logger.info(
        f"inex-sc-pcg ({variant.value}) level {problem.level}: {stats.iterations} iterations, "
        f"converged={stats.converged}"
    )
    return SolverResult(u, None, stats)


def recover_control(p_hat: FloatArray, rho: float) -> FloatArray:
    """Control from the scaled adjoint of the mixed formulation, ``z = p_hat / rho``."""
    if rho <= 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    return np.asarray(p_hat / rho, dtype=np.float64)


def bp_state_residual(problem: AssembledProblem, result: SolverResult) -> float:
    """Norm of ``M p_tilde / sqrt(rho) + K u`` after the Bramble-Pasciak approach (zero at the solution)."""
    if result.adjoint is None:
        raise ValueError("The result carries no transformed adjoint")
    residual = problem.M @ result.adjoint / math.sqrt(problem.rho) + problem.K @ result.state
    return float(np.linalg.norm(residual))


def solve(
    problem: AssembledProblem,
    solver: SolverKind,
    mg: Optional[MgHierarchy] = None,
    diag_variant: Optional[DiagVariant] = None,
    rtol: float = 1e-11,
    max_it: Optional[int] = None,
) -> SolverResult:
    """
    Dispatches to one approach. ``diag_variant`` None selects ``diag`` for
    diag-minres and ``lump`` for the Schur approach.

    Raises:
        ValueError: If mg-minres is requested without a multigrid hierarchy.
    """
    if solver == SolverKind.MG_MINRES:
        if mg is None:
            raise ValueError("mg-minres needs a multigrid hierarchy")
        return solve_mg_minres(problem, mg, rtol=rtol, max_it=max_it)
    if solver == SolverKind.DIAG_MINRES:
        return solve_diag_minres(problem, diag_variant or DiagVariant.DIAG, rtol=rtol, max_it=max_it)
    if solver == SolverKind.BP_PCG:
        return solve_bp_pcg(problem, rtol=rtol, max_it=max_it)
    if solver == SolverKind.INEXACT_SCHUR_PCG:
        return solve_inexact_schur(problem, diag_variant or DiagVariant.LUMP, rtol=rtol, max_it=max_it)
    raise ValueError(f"Unknown solver {solver!r}")
