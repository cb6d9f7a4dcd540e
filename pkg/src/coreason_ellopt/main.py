# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ellopt

from pathlib import Path
from typing import List, Optional

import typer
from pydantic import ValidationError
from typing_extensions import Annotated

from coreason_ellopt.exceptions import NonConvergenceError
from coreason_ellopt.experiments import (
    DEFAULT_SWEEP_RHOS,
    assemble_level,
    ensure_converged,
    rho_sweep,
    run_study,
    spectral_report,
)
from coreason_ellopt.linalg import write_matrix_market
from coreason_ellopt.mesh import build_mesh, dump_mesh
from coreason_ellopt.models import (
    CycleType,
    DiagVariant,
    LevelRange,
    OutputFormat,
    RunConfig,
    SolverKind,
    TargetKind,
)
from coreason_ellopt.reference import compare_to_reference
from coreason_ellopt.reporting import render_eoc_table, render_reference_report, render_spectral, render_sweep
from coreason_ellopt.settings import settings
from coreason_ellopt.utils.logger import logger

EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3

app = typer.Typer(
    help="Coreason Ellopt CLI - Solvers and convergence studies for L2-regularized elliptic optimal control",
    add_completion=False,
)


def _parse_levels(text: str) -> LevelRange:
    try:
        return LevelRange.parse(text)
    except (ValueError, ValidationError) as e:
        raise typer.BadParameter(str(e), param_hint="--levels") from e


def _check_quad_order(order: int) -> int:
    if order not in (1, 2, 4):
        raise typer.BadParameter(f"must be 1, 2 or 4, got {order}", param_hint="--quad-order")
    return order


def _emit(text: str, out: Optional[Path]) -> None:
    """Writes to ``out`` or stdout; an unwritable path is a usage error."""
    if out is None:
        typer.echo(text, nl=False)
        return
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8", newline="")
    except OSError as e:
        logger.error(f"Cannot write {out}: {e}")
        typer.secho(f"Error: cannot write {out}: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_USAGE) from e
    logger.info(f"Wrote {out}")


@app.command()
def study(
    dim: Annotated[int, typer.Option("--dim", min=2, max=3, help="Spatial dimension")] = 3,
    levels: Annotated[str, typer.Option("--levels", help="Level range A..B")] = "1..5",
    target: Annotated[TargetKind, typer.Option("--target", help="Desired state")] = TargetKind.SMOOTH_SINE,
    solver: Annotated[SolverKind, typer.Option("--solver", help="Solution approach")] = SolverKind.MG_MINRES,
    rho_exponent: Annotated[float, typer.Option("--rho-exponent", help="rho = h ** R")] = settings.RHO_EXPONENT,
    rtol: Annotated[float, typer.Option("--rtol", help="Relative residual reduction")] = settings.RTOL,
    quad_order: Annotated[int, typer.Option("--quad-order", help="Quadrature degree")] = settings.QUAD_ORDER,
    diag_variant: Annotated[
        Optional[DiagVariant], typer.Option("--diag-variant", help="Mass diagonal for diag-minres / inex-sc-pcg")
    ] = None,
    cycle: Annotated[CycleType, typer.Option("--cycle", help="Multigrid cycle")] = CycleType.W,
    pre_sweeps: Annotated[int, typer.Option("--pre-sweeps", min=0, help="Forward Gauss-Seidel sweeps")] = 2,
    post_sweeps: Annotated[int, typer.Option("--post-sweeps", min=0, help="Backward Gauss-Seidel sweeps")] = 2,
    mg_cycles: Annotated[int, typer.Option("--mg-cycles", min=1, help="Cycles per preconditioner application")] = 1,
    max_iterations: Annotated[Optional[int], typer.Option("--max-iterations", min=1, help="Iteration cap")] = None,
    output_format: Annotated[OutputFormat, typer.Option("--format", help="Output format")] = OutputFormat.MD,
    out: Annotated[Optional[Path], typer.Option("--out", help="Output file (stdout if omitted)")] = None,
    seed: Annotated[int, typer.Option("--seed", help="Seed for random-vector experiments")] = settings.SEED,
    threads: Annotated[Optional[int], typer.Option("--threads", min=1, help="Worker count (ELLOPT_THREADS)")] = None,
    strict: Annotated[bool, typer.Option("--strict", help="Exit 3 if any level fails to converge")] = False,
    compare: Annotated[bool, typer.Option("--compare", help="Compare with the published d=3 values")] = False,
    no_timing: Annotated[bool, typer.Option("--no-timing", help="Write zero wall times")] = False,
) -> None:
    """
    Run a convergence study and print its EOC table.
    """
    level_range = _parse_levels(levels)
    try:
        config = RunConfig(
            dim=dim,
            level_min=level_range.first,
            level_max=level_range.last,
            target=target,
            solver=solver,
            rho_exponent=rho_exponent,
            rtol=rtol,
            quad_order=_check_quad_order(quad_order),
            diag_variant=diag_variant,
            cycle=cycle,
            pre_sweeps=pre_sweeps,
            post_sweeps=post_sweeps,
            mg_cycles=mg_cycles,
            threads=threads if threads is not None else settings.THREADS,
            seed=seed,
            max_iterations=max_iterations,
            record_timing=not no_timing,
        )
    except ValidationError as e:
        raise typer.BadParameter(str(e)) from e

    try:
        table = run_study(config)
    except Exception as e:
        logger.exception("Study failed")
        typer.secho(f"Error: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_FAILURE) from e

    _emit(render_eoc_table(table, output_format), out)

    if compare:
        try:
            report = compare_to_reference(table)
        except ValueError as e:
            raise typer.BadParameter(str(e), param_hint="--compare") from e
        typer.echo(render_reference_report(report), err=True, nl=False)

    if strict:
        try:
            ensure_converged(table)
        except NonConvergenceError as e:
            typer.secho(f"Error: {e}", fg=typer.colors.RED, err=True)
            raise typer.Exit(code=EXIT_NOT_CONVERGED) from e


def _parse_rhos(text: str) -> List[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise typer.BadParameter(str(e), param_hint="--rho-values") from e
    if not values or any(v <= 0.0 for v in values):
        raise typer.BadParameter("expected a comma-separated list of positive numbers", param_hint="--rho-values")
    return values


@app.command()
def sweep(
    level: Annotated[int, typer.Option("--level", min=1, help="Refinement level")] = 4,
    dim: Annotated[int, typer.Option("--dim", min=2, max=3, help="Spatial dimension")] = 3,
    target: Annotated[TargetKind, typer.Option("--target", help="Desired state")] = TargetKind.SMOOTH_SINE,
    rho_values: Annotated[str, typer.Option("--rho-values", help="Comma-separated rho values")] = ",".join(
        f"{rho:g}" for rho in DEFAULT_SWEEP_RHOS
    ),
    rtol: Annotated[float, typer.Option("--rtol", help="Relative residual reduction")] = settings.RTOL,
    quad_order: Annotated[int, typer.Option("--quad-order", help="Quadrature degree")] = settings.QUAD_ORDER,
    output_format: Annotated[OutputFormat, typer.Option("--format", help="Output format")] = OutputFormat.MD,
    out: Annotated[Optional[Path], typer.Option("--out", help="Output file (stdout if omitted)")] = None,
    threads: Annotated[Optional[int], typer.Option("--threads", min=1, help="Worker count (ELLOPT_THREADS)")] = None,
) -> None:
    """
    Sweep the regularization parameter at a fixed level and fit the error rate in rho.
    """
    rhos = _parse_rhos(rho_values)
    order = _check_quad_order(quad_order)
    try:
        result = rho_sweep(
            level,
            target,
            rhos,
            dim=dim,
            quad_order=order,
            rtol=rtol,
            workers=threads if threads is not None else settings.THREADS,
        )
    except Exception as e:
        logger.exception("Sweep failed")
        typer.secho(f"Error: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_FAILURE) from e
    _emit(render_sweep(result, output_format), out)


@app.command()
def spectral(
    levels: Annotated[str, typer.Option("--levels", help="Level range A..B")] = "1..4",
    dim: Annotated[int, typer.Option("--dim", min=2, max=3, help="Spatial dimension")] = 3,
    rho_exponent: Annotated[float, typer.Option("--rho-exponent", help="rho = h ** R")] = settings.RHO_EXPONENT,
    samples: Annotated[int, typer.Option("--samples", min=1, help="Random vectors per level")] = 200,
    seed: Annotated[int, typer.Option("--seed", help="Seed for the random vectors")] = settings.SEED,
    dense_max_level: Annotated[int, typer.Option("--dense-max-level", help="Finest level with dense M^-1")] = 2,
    lumped: Annotated[bool, typer.Option("--lumped", help="Lumped M^-1 above the dense levels")] = False,
    output_format: Annotated[OutputFormat, typer.Option("--format", help="Output format")] = OutputFormat.MD,
    out: Annotated[Optional[Path], typer.Option("--out", help="Output file (stdout if omitted)")] = None,
) -> None:
    """
    Estimate the extreme eigenvalues and Rayleigh quotients behind the preconditioners.
    """
    level_range = _parse_levels(levels)
    try:
        report = spectral_report(
            range(level_range.first, level_range.last + 1),
            dim=dim,
            rho_exponent=rho_exponent,
            samples=samples,
            seed=seed,
            dense_max_level=dense_max_level,
            lumped_surrogate=lumped,
        )
    except Exception as e:
        logger.exception("Spectral report failed")
        typer.secho(f"Error: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_FAILURE) from e
    _emit(render_spectral(report, output_format), out)


@app.command()
def export(
    out: Annotated[str, typer.Option("--out", help="Comma-separated paths for K, M and f")],
    levels: Annotated[str, typer.Option("--levels", help="A single level, written A..A")] = "1..1",
    dim: Annotated[int, typer.Option("--dim", min=2, max=3, help="Spatial dimension")] = 3,
    target: Annotated[TargetKind, typer.Option("--target", help="Desired state")] = TargetKind.SMOOTH_SINE,
    quad_order: Annotated[int, typer.Option("--quad-order", help="Quadrature degree")] = settings.QUAD_ORDER,
    mesh_path: Annotated[Optional[Path], typer.Option("--mesh", help="Also write the mesh as plain text")] = None,
    threads: Annotated[Optional[int], typer.Option("--threads", min=1, help="Worker count (ELLOPT_THREADS)")] = None,
) -> None:
    """
    Write K, M (Matrix Market coordinate) and f (Matrix Market array) of one level.
    """
    level_range = _parse_levels(levels)
    if level_range.first != level_range.last:
        raise typer.BadParameter("export writes a single level", param_hint="--levels")
    paths = [Path(part.strip()) for part in out.split(",") if part.strip()]
    if len(paths) != 3:
        raise typer.BadParameter("expected three comma-separated paths: K, M, f", param_hint="--out")

    level = level_range.first
    order = _check_quad_order(quad_order)
    try:
        workers = threads if threads is not None else settings.THREADS
        K, M, f = assemble_level(dim, level, target, order, workers=workers)
    except Exception as e:
        logger.exception("Assembly failed")
        typer.secho(f"Error: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_FAILURE) from e
    try:
        write_matrix_market(paths[0], K, comment=f"stiffness d={dim} level={level}")
        write_matrix_market(paths[1], M, comment=f"mass d={dim} level={level}")
        write_matrix_market(paths[2], f, comment=f"load d={dim} level={level} target={target.value}")
        if mesh_path is not None:
            dump_mesh(build_mesh(dim, level), mesh_path)
    except OSError as e:
        logger.error(f"Export failed: {e}")
        typer.secho(f"Error: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_USAGE) from e
    typer.echo(f"Wrote K ({K.shape[0]}x{K.shape[1]}, {K.nnz} nonzeros), M and f to {', '.join(map(str, paths))}")


if __name__ == "__main__":
    app()
