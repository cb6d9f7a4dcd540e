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

from coreason_ellopt.assembly import AssembledProblem, assemble_problem
from coreason_ellopt.convergence import l2_error
from coreason_ellopt.linalg import InexactSchurOperator, dense_solve
from coreason_ellopt.mesh import MeshHierarchy, build_hierarchy
from coreason_ellopt.models import DiagVariant, FloatArray, SolverKind, TargetKind
from coreason_ellopt.multigrid import MgHierarchy, build_mg
from coreason_ellopt.solvers import (
    bp_state_residual,
    recover_control,
    solve,
    solve_bp_pcg,
    solve_diag_minres,
    solve_inexact_schur,
    solve_mg_minres,
)


def _setup(level: int, target: TargetKind = TargetKind.SMOOTH_SINE) -> tuple[MeshHierarchy, AssembledProblem]:
    hierarchy = build_hierarchy(3, level)
    mesh = hierarchy.finest
    return hierarchy, assemble_problem(mesh, target, rho=mesh.h**4)


def _schur_oracle(problem: AssembledProblem) -> FloatArray:
    M, K = problem.M.toarray(), problem.K.toarray()
    return dense_solve(problem.rho * K @ np.linalg.solve(M, K) + M, problem.f)


def _mg(hierarchy: MeshHierarchy, problem: AssembledProblem) -> MgHierarchy:
    return build_mg(hierarchy, problem.M, problem.K, problem.rho)


@pytest.fixture(scope="module")
def level_one() -> tuple[MeshHierarchy, AssembledProblem]:
    return _setup(1)


@pytest.fixture(scope="module")
def level_two() -> tuple[MeshHierarchy, AssembledProblem]:
    return _setup(2, TargetKind.PYRAMID)


def test_mixed_approaches_match_dense_oracle(level_two: tuple[MeshHierarchy, AssembledProblem]) -> None:
    hierarchy, problem = level_two
    oracle = _schur_oracle(problem)
    scale = np.linalg.norm(oracle)

    results = [
        solve_mg_minres(problem, _mg(hierarchy, problem)),
        solve_diag_minres(problem),
        solve_bp_pcg(problem),
    ]
    for result in results:
        assert result.stats.converged
        assert np.linalg.norm(result.state - oracle) <= 1e-7 * scale


def test_inexact_schur_matches_its_dense_operator(level_two: tuple[MeshHierarchy, AssembledProblem]) -> None:
    _, problem = level_two
    op = InexactSchurOperator(problem.M, problem.K, problem.rho, 1.0 / problem.m_lump)
    dense = np.column_stack([op.matvec(e) for e in np.eye(problem.n_dofs)])
    oracle = dense_solve(dense, problem.f)

    result = solve_inexact_schur(problem)
    assert result.adjoint is None
    assert result.stats.converged
    assert np.linalg.norm(result.state - oracle) <= 1e-7 * np.linalg.norm(oracle)


def test_mg_minres_adjoint_and_control(level_one: tuple[MeshHierarchy, AssembledProblem]) -> None:
    hierarchy, problem = level_one
    result = solve_mg_minres(problem, _mg(hierarchy, problem))
    assert result.adjoint is not None

    M, K = problem.M.toarray(), problem.K.toarray()
    expected_adjoint = problem.rho * np.linalg.solve(M, K @ result.state)
    np.testing.assert_allclose(result.adjoint, expected_adjoint, rtol=1e-6, atol=1e-12)

    control = recover_control(result.adjoint, problem.rho)
    np.testing.assert_allclose(control, result.adjoint / problem.rho)
    # state equation K u = M z
    np.testing.assert_allclose(K @ result.state, M @ control, rtol=1e-6, atol=1e-10)


def test_recover_control_rejects_non_positive_rho() -> None:
    with pytest.raises(ValueError):
        recover_control(np.ones(3), 0.0)


def test_bp_state_residual(level_one: tuple[MeshHierarchy, AssembledProblem]) -> None:
    _, problem = level_one
    result = solve_bp_pcg(problem)
    assert result.adjoint is not None
    assert bp_state_residual(problem, result) <= 1e-6 * np.linalg.norm(problem.K @ result.state)

    no_adjoint = solve_inexact_schur(problem)
    with pytest.raises(ValueError):
        bp_state_residual(problem, no_adjoint)


def test_bp_pcg_iterations_level_robust() -> None:
    """The weighted Schur block keeps bp-pcg near the published counts; unit weight drifts upward."""
    counts = {level: solve_bp_pcg(_setup(level)[1]).stats for level in (2, 3)}
    assert all(stats.converged for stats in counts.values())
    assert 140 <= counts[2].iterations <= 216
    assert 190 <= counts[3].iterations <= 350
    unit = solve_bp_pcg(_setup(3)[1], schur_weight=1.0).stats
    assert unit.iterations > 1.3 * counts[3].iterations


def test_bp_pcg_rejects_non_positive_schur_weight(level_one: tuple[MeshHierarchy, AssembledProblem]) -> None:
    _, problem = level_one
    with pytest.raises(ValueError):
        solve_bp_pcg(problem, schur_weight=0.0)


@pytest.mark.parametrize("variant", [DiagVariant.DIAG, DiagVariant.LUMP, DiagVariant.AREA, DiagVariant.DIAG_A])
def test_diag_minres_variants_reach_same_state(
    level_one: tuple[MeshHierarchy, AssembledProblem], variant: DiagVariant
) -> None:
    _, problem = level_one
    oracle = _schur_oracle(problem)
    result = solve_diag_minres(problem, variant)
    assert result.stats.converged
    assert np.linalg.norm(result.state - oracle) <= 1e-7 * np.linalg.norm(oracle)


def test_mg_minres_uses_few_iterations(level_two: tuple[MeshHierarchy, AssembledProblem]) -> None:
    hierarchy, problem = level_two
    mg_stats = solve_mg_minres(problem, _mg(hierarchy, problem)).stats
    diag_stats = solve_diag_minres(problem).stats
    assert mg_stats.iterations <= 32
    assert mg_stats.iterations < diag_stats.iterations


def test_inexact_schur_error_close_to_mixed(level_two: tuple[MeshHierarchy, AssembledProblem]) -> None:
    hierarchy, problem = level_two
    mesh = hierarchy.finest
    mixed = l2_error(mesh, solve_diag_minres(problem).state, TargetKind.PYRAMID)
    schur = l2_error(mesh, solve_inexact_schur(problem).state, TargetKind.PYRAMID)
    assert abs(schur - mixed) <= 0.05 * mixed


def test_iteration_cap_reported(level_one: tuple[MeshHierarchy, AssembledProblem]) -> None:
    _, problem = level_one
    result = solve_bp_pcg(problem, max_it=2)
    assert not result.stats.converged
    assert result.stats.iterations == 2


def test_solve_dispatch(level_one: tuple[MeshHierarchy, AssembledProblem]) -> None:
    hierarchy, problem = level_one
    mg = _mg(hierarchy, problem)
    states = {
        kind: solve(problem, kind, mg=mg).state
        for kind in (SolverKind.MG_MINRES, SolverKind.DIAG_MINRES, SolverKind.BP_PCG)
    }
    reference = states[SolverKind.DIAG_MINRES]
    for state in states.values():
        np.testing.assert_allclose(state, reference, rtol=1e-6, atol=1e-12)

    schur = solve(problem, SolverKind.INEXACT_SCHUR_PCG, diag_variant=DiagVariant.DIAG)
    assert schur.adjoint is None
    with pytest.raises(ValueError, match="multigrid"):
        solve(problem, SolverKind.MG_MINRES)


def test_first_level_iterations_bounded_by_symmetric_subspace(
    level_one: tuple[MeshHierarchy, AssembledProblem],
) -> None:
    """
    The 27 interior vertices of level 1 form 6 orbits under axis permutations and the
    point reflection x -> 1 - x, both of which map the Kuhn mesh onto itself. With the
    symmetric load, Krylov spaces stay in that 6-dimensional subspace (12 for the mixed
    system), and the single-level multigrid block is an exact Cholesky solve.
    """
    hierarchy, problem = level_one
    assert len(hierarchy.meshes) == 1
    schur_stats = solve_inexact_schur(problem).stats
    mg_stats = solve_mg_minres(problem, _mg(hierarchy, problem)).stats
    assert 4 <= schur_stats.iterations <= 6
    assert 8 <= mg_stats.iterations <= 12
    assert schur_stats.converged and mg_stats.converged
