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
Rendering of study, sweep and spectral results as CSV, JSON or Markdown.

CSV floats carry 17 significant digits so files round-trip exactly.
"""

import csv
import io
import json
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from jsonschema import SchemaError, ValidationError, validate

from coreason_ellopt.models import EocTable, OutputFormat, ReferenceReport, SpectralReport, SweepResult
from coreason_ellopt.utils.logger import logger

Column = Tuple[str, str, Callable[[Any], str]]

_NUMBER = {"type": "number"}
_OPTIONAL_NUMBER = {"type": ["number", "null"]}

EOC_TABLE_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["config", "rows"],
    "properties": {
        "config": {
            "type": "object",
            "required": ["dim", "level_min", "level_max", "target", "solver", "rho_exponent", "rtol", "quad_order"],
            "properties": {
                "dim": {"enum": [2, 3]},
                "level_min": {"type": "integer", "minimum": 1},
                "level_max": {"type": "integer", "minimum": 1},
                "target": {"enum": ["1", "2", "3", "4"]},
                "solver": {"enum": ["mg-minres", "diag-minres", "bp-pcg", "inex-sc-pcg"]},
                "rho_exponent": _NUMBER,
                "rtol": _NUMBER,
                "quad_order": {"enum": [1, 2, 4]},
            },
        },
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["level", "h", "rho", "n_dofs", "l2_error", "eoc", "stats"],
                "properties": {
                    "level": {"type": "integer", "minimum": 1},
                    "h": {"type": "number", "exclusiveMinimum": 0},
                    "rho": {"type": "number", "exclusiveMinimum": 0},
                    "n_dofs": {"type": "integer", "minimum": 1},
                    "l2_error": {"type": "number", "minimum": 0},
                    "eoc": _OPTIONAL_NUMBER,
                    "mg_contraction": _OPTIONAL_NUMBER,
                    "stats": {
                        "type": "object",
                        "required": [
                            "iterations",
                            "initial_prec_residual",
                            "final_prec_residual",
                            "converged",
                            "wall_time",
                        ],
                        "properties": {
                            "iterations": {"type": "integer", "minimum": 0},
                            "initial_prec_residual": _NUMBER,
                            "final_prec_residual": _NUMBER,
                            "converged": {"type": "boolean"},
                            "wall_time": _NUMBER,
                            "breakdown": {"type": "boolean"},
                            "residual_history": {"type": "array", "items": _NUMBER},
                        },
                    },
                },
            },
        },
    },
}


def _exact(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.17g}"


def _scientific(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.5e}"


def _fixed(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2f}"


def _flag(value: bool) -> str:
    return "true" if value else "false"


def _eoc_rows(table: EocTable) -> List[Dict[str, Any]]:
    return [
        {
            "level": row.level,
            "h": row.h,
            "rho": row.rho,
            "n_dofs": row.n_dofs,
            "l2_error": row.l2_error,
            "eoc": row.eoc,
            "iterations": row.stats.iterations,
            "wall_time": row.stats.wall_time,
            "converged": row.stats.converged,
        }
        for row in table.rows
    ]


# (key, markdown header, markdown formatter); CSV uses the key as header.
EOC_COLUMNS: List[Column] = [
    ("level", "Level", str),
    ("h", "h", lambda v: f"{v:.6g}"),
    ("rho", "rho", _scientific),
    ("n_dofs", "N_h", str),
    ("l2_error", "error", _scientific),
    ("eoc", "eoc", _fixed),
    ("iterations", "#Its", str),
    ("wall_time", "Time (s)", _fixed),
    ("converged", "converged", _flag),
]

SWEEP_COLUMNS: List[Column] = [
    ("rho", "rho", _scientific),
    ("l2_error", "L2 error", _scientific),
    ("h1_error", "H1 error", _scientific),
    ("iterations", "#Its", str),
    ("converged", "converged", _flag),
]

SPECTRAL_COLUMNS: List[Column] = [
    ("level", "Level", str),
    ("n_dofs", "N_h", str),
    ("lambda_max", "lambda_max", _scientific),
    ("lambda_max_h2", "lambda_max h^2", lambda v: f"{v:.4f}"),
    ("rho_lambda_max2", "rho lambda_max^2", lambda v: f"{v:.4f}"),
    ("schur_rayleigh_min", "S/M min", lambda v: f"{v:.4f}"),
    ("schur_rayleigh_max", "S/M max", lambda v: f"{v:.4f}"),
    ("a_rayleigh_min", "A/M min", lambda v: f"{v:.4f}"),
    ("a_rayleigh_max", "A/M max", lambda v: f"{v:.4f}"),
    ("mass_solve", "M^-1", str),
]


def _csv_cell(value: Any) -> str:
    if isinstance(value, bool):
        return _flag(value)
    if isinstance(value, float):
        return _exact(value)
    if value is None:
        return ""
    return str(value)


def render_csv(columns: Sequence[Column], rows: Sequence[Dict[str, Any]]) -> str:
    """RFC 4180 CSV with a header row."""
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow([key for key, _, _ in columns])
    for row in rows:
        writer.writerow([_csv_cell(row[key]) for key, _, _ in columns])
    return buffer.getvalue()


def render_markdown(columns: Sequence[Column], rows: Sequence[Dict[str, Any]]) -> str:
    """GitHub-flavoured Markdown table."""
    lines = [
        "| " + " | ".join(header for _, header, _ in columns) + " |",
        "|" + "|".join("---" for _ in columns) + "|",
    ]
    for row in rows:
        lines.append("| " + " | ".join(fmt(row[key]) for key, _, fmt in columns) + " |")
    return "\n".join(lines) + "\n"


def validate_eoc_payload(payload: Dict[str, Any]) -> None:
    """
    Checks a JSON payload against EOC_TABLE_SCHEMA.

    Raises:
        ValueError: If the payload or the schema is invalid.
    """
    try:
        validate(instance=payload, schema=EOC_TABLE_SCHEMA)
    except ValidationError as e:
        logger.error(f"EOC table failed schema validation: {e.message}")
        raise ValueError(f"Invalid EOC table: {e.message}") from e
    except SchemaError as e:
        logger.error(f"Invalid EOC table schema: {e.message}")
        raise ValueError(f"Invalid EOC table schema: {e.message}") from e


def render_eoc_table(table: EocTable, fmt: OutputFormat) -> str:
    if fmt == OutputFormat.JSON:
        payload = table.model_dump(mode="json")
        validate_eoc_payload(payload)
        return json.dumps(payload, indent=2) + "\n"
    rows = _eoc_rows(table)
    if fmt == OutputFormat.CSV:
        return render_csv(EOC_COLUMNS, rows)
    return render_markdown(EOC_COLUMNS, rows)


def render_sweep(result: SweepResult, fmt: OutputFormat) -> str:
    if fmt == OutputFormat.JSON:
        return result.model_dump_json(indent=2) + "\n"
    rows = [point.model_dump() for point in result.points]
    if fmt == OutputFormat.CSV:
        return render_csv(SWEEP_COLUMNS, rows)
    slope = "-" if result.fitted_slope is None else f"{result.fitted_slope:.3f}"
    summary = (
        f"Level {result.level}, target {result.target.value}: baseline error {result.baseline_error:.5e} "
        f"at rho={result.baseline_rho:.3e}; fitted slope {slope} over {result.fit_points} points\n\n"
    )
    return summary + render_markdown(SWEEP_COLUMNS, rows)


def render_spectral(report: SpectralReport, fmt: OutputFormat) -> str:
    if fmt == OutputFormat.JSON:
        return report.model_dump_json(indent=2) + "\n"
    rows = [row.model_dump() for row in report.rows]
    if fmt == OutputFormat.CSV:
        return render_csv(SPECTRAL_COLUMNS, rows)
    return render_markdown(SPECTRAL_COLUMNS, rows)


def render_reference_report(report: ReferenceReport) -> str:
    """Markdown summary of a comparison against published values."""
    lines = [
        f"Reference comparison: target {report.target.value}, solver {report.solver.value} "
        f"(error tolerance {report.error_tolerance:.0%}, iteration tolerance {report.iteration_tolerance:.0%})",
        "",
        "| Level | metric | current | published | change | outside band |",
        "|---|---|---|---|---|---|",
    ]
    for d in report.deviations:
        change = "-" if d.pct_change is None else f"{d.pct_change:+.1%}"
        lines.append(
            f"| {d.level} | {d.name} | {d.current_value:.6g} | {d.reference_value:.6g} | {change} | "
            f"{_flag(d.outside_band)} |"
        )
    if report.skipped_levels:
        lines.append("")
        lines.append(f"No published values for levels {report.skipped_levels}")
    return "\n".join(lines) + "\n"
