# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ellopt

from enum import Enum
from typing import List, Literal, Optional, Tuple

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator

from coreason_ellopt.settings import settings

FloatArray = npt.NDArray[np.float64]
IndexArray = npt.NDArray[np.int64]
BoolArray = npt.NDArray[np.bool_]


class TargetKind(str, Enum):
    """Benchmark desired states on the unit cube (or square)."""

    SMOOTH_SINE = "1"
    PYRAMID = "2"
    CUBE_INDICATOR = "3"
    SHIFTED_SINE = "4"


class SolverKind(str, Enum):
    MG_MINRES = "mg-minres"
    DIAG_MINRES = "diag-minres"
    BP_PCG = "bp-pcg"
    INEXACT_SCHUR_PCG = "inex-sc-pcg"


class DiagVariant(str, Enum):
    """Diagonal approximations of the mass matrix used by the cheap preconditioners."""

    DIAG = "diag"
    LUMP = "lump"
    AREA = "area"
    SCALED_IDENTITY = "scaled-identity"
    DIAG_A = "diag-a"


class CycleType(str, Enum):
    V = "V"
    W = "W"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"
    MD = "md"


class SolveStats(BaseModel):
    """
    Outcome of one Krylov solve.
    Residuals are measured in the norm induced by the inverse preconditioner.
    """

    iterations: int = Field(..., ge=0, description="Number of Krylov iterations performed.")
    initial_prec_residual: float = Field(..., ge=0.0, description="Preconditioned residual norm of the zero guess.")
    final_prec_residual: float = Field(..., ge=0.0, description="Preconditioned residual norm at exit.")
    converged: bool = Field(..., description="True if the relative reduction reached the tolerance.")
    wall_time: float = Field(..., ge=0.0, description="Wall-clock seconds spent in the solve.")
    breakdown: bool = Field(default=False, description="True if the Lanczos process broke down before converging.")
    residual_history: List[float] = Field(
        default_factory=list, description="Preconditioned residual norm after every iteration, starting at zero."
    )


class RunConfig(BaseModel):
    """
    One convergence study: a target, a solver and a range of refinement levels.
    """

    model_config = ConfigDict(frozen=True)

    dim: Literal[2, 3] = Field(default=3, description="Spatial dimension.")
    level_min: int = Field(default=1, ge=1, description="Coarsest refinement level of the study.")
    level_max: int = Field(default=4, ge=1, description="Finest refinement level of the study.")
    target: TargetKind = Field(default=TargetKind.SMOOTH_SINE, description="Desired state.")
    solver: SolverKind = Field(default=SolverKind.MG_MINRES, description="Solution approach.")
    rho_exponent: float = Field(default_factory=lambda: settings.RHO_EXPONENT, description="rho = h ** exponent.")
    rtol: float = Field(default_factory=lambda: settings.RTOL, gt=0.0, lt=1.0, description="Relative tolerance.")
    quad_order: Literal[1, 2, 4] = Field(
        default_factory=lambda: settings.QUAD_ORDER, description="Polynomial degree of the load/error quadrature."
    )
    diag_variant: Optional[DiagVariant] = Field(
        None, description="Mass diagonal for diag-minres / inex-sc-pcg. None selects the solver default."
    )
    cycle: CycleType = Field(default=CycleType.W, description="Multigrid cycle shape.")
    pre_sweeps: int = Field(default=2, ge=0, description="Forward Gauss-Seidel sweeps before coarse correction.")
    post_sweeps: int = Field(default=2, ge=0, description="Backward Gauss-Seidel sweeps after coarse correction.")
    mg_cycles: int = Field(default=1, ge=1, description="Cycles per preconditioner application.")
    threads: int = Field(default_factory=lambda: settings.THREADS, ge=1, description="Worker count.")
    seed: int = Field(default_factory=lambda: settings.SEED, description="Seed for randomized diagnostics.")
    max_iterations: Optional[int] = Field(None, ge=1, description="Iteration cap. None derives it from N_h.")
    record_timing: bool = Field(default=True, description="False writes zero wall times for reproducible files.")

    @model_validator(mode="after")
    def _check_levels(self) -> "RunConfig":
        if self.level_min > self.level_max:
            raise ValueError(f"Empty level range {self.level_min}..{self.level_max}")
        return self

    @property
    def levels(self) -> List[int]:
        return list(range(self.level_min, self.level_max + 1))

    def rho(self, h: float) -> float:
        return float(h**self.rho_exponent)


class LevelResult(BaseModel):
    """One row of an EOC table."""

    level: int = Field(..., ge=1, description="Refinement level.")
    h: float = Field(..., gt=0.0, description="Mesh width.")
    rho: float = Field(..., gt=0.0, description="Regularization parameter used on this level.")
    n_dofs: int = Field(..., ge=1, description="Number of interior vertices N_h.")
    l2_error: float = Field(..., ge=0.0, description="L2 distance between the discrete state and the target.")
    eoc: Optional[float] = Field(None, description="Experimental order of convergence against the previous row.")
    stats: SolveStats = Field(..., description="Krylov statistics of this level.")
    mg_contraction: Optional[float] = Field(
        None, ge=0.0, description="Measured energy-norm contraction per multigrid cycle (mg-minres only)."
    )


class EocTable(BaseModel):
    """Result of a convergence study."""

    config: RunConfig = Field(..., description="The configuration that produced the table.")
    rows: List[LevelResult] = Field(default_factory=list, description="One row per level, ascending.")

    @property
    def all_converged(self) -> bool:
        return all(row.stats.converged for row in self.rows)


class SpectralRow(BaseModel):
    """Spectral diagnostics of one level."""

    level: int = Field(..., ge=1)
    h: float = Field(..., gt=0.0)
    rho: float = Field(..., gt=0.0)
    n_dofs: int = Field(..., ge=1)
    lambda_max: float = Field(..., description="Largest eigenvalue of M^-1 K (power iteration).")
    lambda_max_h2: float = Field(..., description="lambda_max * h**2, expected to stay level independent.")
    rho_lambda_max2: float = Field(..., description="rho * lambda_max**2 (order one when rho = h**4).")
    mass_solve: str = Field(..., description="How M^-1 was applied: 'dense', 'cg' or 'lumped'.")
    schur_rayleigh_min: float = Field(..., description="Smallest sampled (S v, v) / (M v, v).")
    schur_rayleigh_max: float = Field(..., description="Largest sampled (S v, v) / (M v, v).")
    a_rayleigh_min: float = Field(..., description="Smallest sampled (A v, v) / (M v, v), A = M + sqrt(rho) K.")
    a_rayleigh_max: float = Field(..., description="Largest sampled (A v, v) / (M v, v).")


class SpectralReport(BaseModel):
    dim: Literal[2, 3] = Field(default=3)
    rho_exponent: float = Field(...)
    samples: int = Field(..., ge=1)
    seed: int = Field(...)
    rows: List[SpectralRow] = Field(default_factory=list)


class SweepPoint(BaseModel):
    rho: float = Field(..., gt=0.0)
    l2_error: float = Field(..., ge=0.0)
    h1_error: Optional[float] = Field(None, description="H1 seminorm error (not defined for the indicator target).")
    iterations: int = Field(..., ge=0)
    converged: bool = Field(...)


class SweepResult(BaseModel):
    """Error as a function of rho at a fixed level."""

    dim: Literal[2, 3] = Field(default=3)
    level: int = Field(..., ge=1)
    target: TargetKind = Field(...)
    baseline_rho: float = Field(..., description="rho = h**4 on this level.")
    baseline_error: float = Field(..., description="L2 error at the baseline rho.")
    points: List[SweepPoint] = Field(default_factory=list)
    fit_points: int = Field(..., ge=0, description="Number of points entering the log-log fit.")
    fitted_slope: Optional[float] = Field(None, description="Least-squares slope of log(error) over log(rho).")


class ReferenceDeviation(BaseModel):
    """
    Difference between a computed quantity and its published counterpart.
    """

    level: int = Field(..., ge=1)
    name: str = Field(..., description="Either 'l2_error' or 'iterations'.")
    current_value: float = Field(..., description="Value in the current table.")
    reference_value: float = Field(..., description="Published value.")
    delta: float = Field(..., description="Absolute difference.")
    pct_change: Optional[float] = Field(None, description="Relative change against the published value.")
    outside_band: bool = Field(..., description="True if the relative change exceeds the tolerance.")


class ReferenceReport(BaseModel):
    target: TargetKind = Field(...)
    solver: SolverKind = Field(...)
    error_tolerance: float = Field(..., description="Relative tolerance applied to errors.")
    iteration_tolerance: float = Field(..., description="Relative tolerance applied to iteration counts.")
    deviations: List[ReferenceDeviation] = Field(default_factory=list)
    skipped_levels: List[int] = Field(default_factory=list, description="Levels without a published value.")

    @property
    def within_band(self) -> bool:
        return not any(d.outside_band for d in self.deviations)


class LevelRange(BaseModel):
    """Parsed ``A..B`` level range."""

    model_config = ConfigDict(frozen=True)

    first: int = Field(..., ge=1)
    last: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_order(self) -> "LevelRange":
        if self.first > self.last:
            raise ValueError(f"Empty level range {self.first}..{self.last}")
        return self

    @classmethod
    def parse(cls, text: str) -> "LevelRange":
        parts: Tuple[str, ...] = tuple(p.strip() for p in text.split(".."))
        if len(parts) == 1:
            parts = (parts[0], parts[0])
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise ValueError(f"Level range must look like A..B, got {text!r}")
        return cls(first=int(parts[0]), last=int(parts[1]))
