from __future__ import annotations

import csv
import io
import json
from collections.abc import Sequence

from maxlow.schemas import (
    SCHEMA_VERSION,
    BoundsRow,
    ConstantsReport,
    KappaResult,
    ValidationReport,
)

# Row order of the published constants table.
CONSTANT_ROWS: tuple[tuple[str, str], ...] = (
    ("tilde_c", "c~"),
    ("C1yT_max", "C1(y,T)"),
    ("C_QT", "C_Q,T"),
    ("C_S", "C_S"),
    ("c_M", "c_M"),
    ("C_M1", "C_M1"),
    ("C1_Curl", "C_1,Curl"),
    ("C2_Curl", "C_2,Curl"),
    ("C1_div", "C_1,div"),
    ("C2_div", "C_2,div"),
    ("C_OL", "C_OL"),
    ("C_RD", "C_RD"),
)


def _number(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return f"{value:.10g}"


def _csv(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(headers)
    writer.writerows(rows)
    return buffer.getvalue()


def _markdown(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = [
        "| " + " | ".join(headers) + " |",
        "|" + "|".join("---" for _ in headers) + "|",
    ]
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return "\n".join(lines) + "\n"


def _json(payload: dict) -> str:
    document = {"schema_version": SCHEMA_VERSION, **payload}
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def _table(fmt: str, headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    if fmt == "md":
        return _markdown(headers, rows)
    if fmt == "csv":
        return _csv(headers, rows)
    raise ValueError(f"unknown table format {fmt!r}")


def render_bounds(rows: Sequence[BoundsRow], fmt: str, k: int) -> str:
    """Bounds table: h/sqrt2, kappa_h, M_h, then eigenvalue and lower bound per index."""
    if fmt == "json":
        return _json({"rows": [row.model_dump(exclude={"timings"}) for row in rows]})
    markdown = fmt == "md"
    headers = ["level", "h/sqrt2" if not markdown else "h/√2", "kappa_h", "M_h"]
    for index in range(1, k + 1):
        headers += [f"lambda_h^({index})", f"lower_bound^({index})"]
    headers.append("status")
    body = []
    for row in rows:
        cells = [str(row.level), _number(row.h_over_sqrt2), _number(row.kappa_h)]
        cells.append(_number(row.m_hat))
        for index in range(k):
            cells.append(_number(row.eigenvalues[index]) if index < len(row.eigenvalues) else "")
            cells.append(
                _number(row.lower_bounds[index]) if index < len(row.lower_bounds) else ""
            )
        cells.append(row.status if row.error is None else f"{row.status}: {row.error}")
        body.append(cells)
    return _table(fmt, headers, body)


def render_constants(reports: Sequence[tuple[int, ConstantsReport]], fmt: str) -> str:
    if fmt == "json":
        return _json(
            {"levels": [{"level": level, **report.model_dump()} for level, report in reports]}
        )
    headers = ["level", "constant", "value", "reference"]
    body = []
    for level, report in reports:
        values = report.model_dump()
        for key, label in CONSTANT_ROWS:
            body.append(
                [str(level), label, _number(values[key]), _number(report.reference.get(key))]
            )
        for note in report.flagged:
            body.append([str(level), "flagged", note, ""])
    return _table(fmt, headers, body)


def render_kappa(results: Sequence[tuple[int, float, KappaResult]], fmt: str) -> str:
    if fmt == "json":
        return _json(
            {
                "levels": [
                    {"level": level, "h_over_sqrt2": h, **result.model_dump()}
                    for level, h, result in results
                ]
            }
        )
    headers = ["level", "h/sqrt2", "kappa_h", "mu", "iterations", "method"]
    body = [
        [
            str(level),
            _number(h),
            _number(result.kappa),
            _number(result.mu),
            str(result.iterations),
            result.method,
        ]
        for level, h, result in results
    ]
    return _table(fmt, headers, body)


def render_eigenvalues(results: Sequence[tuple[int, list[float]]], fmt: str) -> str:
    if fmt == "json":
        return _json(
            {"levels": [{"level": level, "eigenvalues": values} for level, values in results]}
        )
    headers = ["level", "k", "lambda_h"]
    body = [
        [str(level), str(index), _number(value)]
        for level, values in results
        for index, value in enumerate(values, start=1)
    ]
    return _table(fmt, headers, body)


def render_validation(reports: Sequence[ValidationReport], fmt: str) -> str:
    if fmt == "json":
        return _json({"reports": [report.model_dump() for report in reports]})
    headers = ["level", "property", "passed", "measured", "threshold", "detail"]
    body = [
        [
            str(report.level),
            prop.name,
            "yes" if prop.passed else "no",
            _number(prop.measured),
            _number(prop.threshold),
            prop.detail or "",
        ]
        for report in reports
        for prop in report.properties
    ]
    return _table(fmt, headers, body)
