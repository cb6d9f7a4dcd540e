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
Preconditioned MINRES and CG.

Both start from a zero guess and stop once the preconditioned residual norm
``sqrt(r . C^-1 r)`` has dropped by ``rtol`` relative to its initial value.
"""

import math
import time
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy.sparse.linalg import LinearOperator

from coreason_ellopt.exceptions import DimensionMismatchError, SolverBreakdownError
from coreason_ellopt.models import FloatArray, SolveStats
from coreason_ellopt.settings import settings
from coreason_ellopt.utils.logger import logger

Action = Union[LinearOperator, Callable[[FloatArray], FloatArray]]

_EPS = float(np.finfo(np.float64).eps)


def _as_callable(op: Action) -> Callable[[FloatArray], FloatArray]:
    if isinstance(op, LinearOperator):
        return lambda x: np.asarray(op.matvec(x), dtype=np.float64).ravel()
    return op


def default_max_iterations(n_dofs: int) -> int:
    """``min(10 sqrt(N_h) + 500, cap)``."""
    return min(int(10 * math.sqrt(n_dofs)) + 500, settings.MAX_ITERATIONS_CAP)


def _stats(
    iterations: int,
    history: List[float],
    converged: bool,
    started: float,
    breakdown: bool = False,
) -> SolveStats:
    return SolveStats(
        iterations=iterations,
        initial_prec_residual=history[0],
        final_prec_residual=history[-1],
        converged=converged,
        wall_time=time.perf_counter() - started,
        breakdown=breakdown,
        residual_history=history,
    )


def minres(
    apply_op: Action,
    apply_prec: Action,
    b: FloatArray,
    rtol: float = 1e-11,
    max_it: Optional[int] = None,
) -> Tuple[FloatArray, SolveStats]:
    """
    Preconditioned MINRES for symmetric (possibly indefinite) systems with an SPD preconditioner.

    Args:
        apply_op: Action of the symmetric operator.
        apply_prec: Action of the SPD preconditioner inverse ``C^-1``.
        b: Right-hand side.
        rtol: Relative reduction of the preconditioned residual.
        max_it: Iteration cap. Defaults to ``default_max_iterations(len(b))``.

    Returns:
        ``(x, stats)``. If the cap is reached, ``x`` is the last iterate and ``stats.converged`` is False.

    Raises:
        SolverBreakdownError: If the preconditioner is not positive definite.
    """
    op = _as_callable(apply_op)
    prec = _as_callable(apply_prec)
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    limit = max_it if max_it is not None else default_max_iterations(n)
    started = time.perf_counter()

    x = np.zeros(n)
    r1 = b.copy()
    y = prec(r1)
    if y.shape != b.shape:
        raise DimensionMismatchError(f"Preconditioner returned {y.shape} for a right-hand side {b.shape}")
    beta1 = float(r1 @ y)
    if beta1 < 0.0:
        logger.error("MINRES preconditioner is not positive definite")
        raise SolverBreakdownError("Preconditioner is not positive definite")
    beta1 = math.sqrt(beta1)
    history = [beta1]
    if beta1 == 0.0:
        return x, _stats(0, history, True, started)

    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs = -1.0
    sn = 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1
    target = rtol * beta1

    for itn in range(1, limit + 1):
        # Lanczos step
        v = y / beta
        y = op(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = float(v @ y)
        y = y - (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = prec(r2)
        oldb = beta
        beta_sq = float(r2 @ y)
        if beta_sq < -_EPS * oldb * oldb:
            logger.error(f"MINRES preconditioner lost positive definiteness at iteration {itn}")
            raise SolverBreakdownError("Preconditioner is not positive definite")
        beta = math.sqrt(max(beta_sq, 0.0))

        # Apply the previous rotation, then build the next one
        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(math.hypot(gbar, beta), _EPS)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w

        history.append(abs(phibar))
        if abs(phibar) <= target:
            logger.debug(f"MINRES converged in {itn} iterations ({abs(phibar):.3e} <= {target:.3e})")
            return x, _stats(itn, history, True, started)
        if beta <= _EPS * beta1:
            logger.warning(f"MINRES Lanczos breakdown at iteration {itn} (beta={beta:.3e})")
            return x, _stats(itn, history, False, started, breakdown=True)

    logger.warning(f"MINRES stopped at the iteration cap {limit} with residual ratio {abs(phibar) / beta1:.3e}")
    return x, _stats(limit, history, False, started)


def pcg(
    apply_op: Action,
    apply_prec: Action,
    b: FloatArray,
    rtol: float = 1e-11,
    max_it: Optional[int] = None,
) -> Tuple[FloatArray, SolveStats]:
    """
    Preconditioned conjugate gradients for SPD systems.

    Returns:
        ``(x, stats)`` as for :func:`minres`.

    Raises:
        SolverBreakdownError: On non-positive curvature (the operator is not SPD)
            or a non-positive ``r . C^-1 r`` (the preconditioner is not SPD).
    """
    op = _as_callable(apply_op)
    prec = _as_callable(apply_prec)
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    limit = max_it if max_it is not None else default_max_iterations(n)
    started = time.perf_counter()

    x = np.zeros(n)
    r = b.copy()
    z = prec(r)
    if z.shape != b.shape:
        raise DimensionMismatchError(f"Preconditioner returned {z.shape} for a right-hand side {b.shape}")
    rz = float(r @ z)
    if rz < 0.0:
        logger.error("PCG preconditioner is not positive definite")
        raise SolverBreakdownError("Preconditioner is not positive definite")
    initial = math.sqrt(rz)
    history = [initial]
    if initial == 0.0:
        return x, _stats(0, history, True, started)

    target = rtol * initial
    p = z.copy()
    for itn in range(1, limit + 1):
        q = op(p)
        curvature = float(p @ q)
        if curvature <= 0.0:
            logger.error(f"PCG met non-positive curvature {curvature:.3e} at iteration {itn}")
            raise SolverBreakdownError("Non-positive curvature: operator is not positive definite")
        alpha = rz / curvature
        x = x + alpha * p
        r = r - alpha * q
        z = prec(r)
        rz_new = float(r @ z)
        if rz_new < -_EPS * rz:
            logger.error(f"PCG preconditioner lost positive definiteness at iteration {itn}")
            raise SolverBreakdownError("Preconditioner is not positive definite")
        residual = math.sqrt(max(rz_new, 0.0))
        history.append(residual)
        if residual <= target:
            logger.debug(f"PCG converged in {itn} iterations ({residual:.3e} <= {target:.3e})")
            return x, _stats(itn, history, True, started)
        p = z + (rz_new / rz) * p
        rz = rz_new

    logger.warning(f"PCG stopped at the iteration cap {limit} with residual ratio {history[-1] / initial:.3e}")
    return x, _stats(limit, history, False, started)
