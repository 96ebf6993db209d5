from __future__ import annotations

import csv
import io
import json

import pytest

from maxlow.constants import combine
from maxlow.render import (
    render_bounds,
    render_constants,
    render_eigenvalues,
    render_kappa,
    render_validation,
)
from maxlow.schemas import BoundsRow, KappaResult, PropertyResult, ValidationReport


def _rows() -> list[BoundsRow]:
    return [
        BoundsRow(
            level=1,
            h_max=0.7071067811865476,
            h_over_sqrt2=0.5,
            kappa_h=0.1443,
            c_hat=1.5853,
            m_hat=9.1034,
            c1_div=9.729,
            eigenvalues=[9.6, 9.6],
            lower_bounds=[0.0121, 0.0121],
            timings={"evp": 0.1},
        ),
        BoundsRow(level=2, status="failed", error="singular"),
    ]


def test_render_bounds_csv():
    text = render_bounds(_rows(), "csv", 2)
    lines = text.splitlines()

    assert lines[0] == (
        "level,h/sqrt2,kappa_h,M_h,lambda_h^(1),lower_bound^(1),"
        "lambda_h^(2),lower_bound^(2),status"
    )
    assert lines[1] == "1,0.5,0.1443,9.1034,9.6,0.0121,9.6,0.0121,ok"
    assert lines[2] == "2,,,,,,,,failed: singular"


def test_render_bounds_markdown():
    text = render_bounds(_rows(), "md", 1)
    lines = text.splitlines()

    assert lines[0] == (
        "| level | h/√2 | kappa_h | M_h | lambda_h^(1) | lower_bound^(1) | status |"
    )
    assert lines[1] == "|---|---|---|---|---|---|---|"
    assert lines[2].startswith("| 1 | 0.5 | 0.1443 |")


def test_render_bounds_json_drops_timings():
    payload = json.loads(render_bounds(_rows(), "json", 2))

    assert payload["schema_version"] == "1"
    assert payload["rows"][0]["eigenvalues"] == [9.6, 9.6]
    assert "timings" not in payload["rows"][0]
    assert payload["rows"][1]["status"] == "failed"


def test_unknown_format():
    with pytest.raises(ValueError, match="unknown table format"):
        render_bounds(_rows(), "xml", 1)


def test_render_constants_lists_table_rows_and_flags():
    report = combine(
        tilde_c_diam=0.25,
        tilde_c_hT=0.3,
        c1_max=1.05,
        c_qt=0.66,
        c_s=2.2,
        c_m=0.06,
        c_m1=0.95,
        c2_curl=0.91,
        c_ol=13,
        flagged=["c_M: edge patch 3 has no discretely divergence-free fields"],
    )

    rows = list(csv.reader(io.StringIO(render_constants([(2, report)], "csv"))))

    assert rows[0] == ["level", "constant", "value", "reference"]
    assert rows[1] == ["2", "c~", "0.25", "0.2461"]
    assert [row[1] for row in rows[1:13]] == [
        "c~",
        "C1(y,T)",
        "C_Q,T",
        "C_S",
        "c_M",
        "C_M1",
        "C_1,Curl",
        "C_2,Curl",
        "C_1,div",
        "C_2,div",
        "C_OL",
        "C_RD",
    ]
    assert ["2", "C_OL", "13", "13"] in rows
    assert rows[-1][:2] == ["2", "flagged"]


def test_render_constants_json():
    report = combine(
        tilde_c_diam=0.25,
        tilde_c_hT=0.3,
        c1_max=1.0,
        c_qt=0.5,
        c_s=2.0,
        c_m=0.1,
        c_m1=1.0,
        c2_curl=1.0,
        c_ol=9,
    )

    payload = json.loads(render_constants([(1, report)], "json"))

    assert payload["levels"][0]["level"] == 1
    assert payload["levels"][0]["C_OL"] == 9


def test_render_kappa_and_eigenvalues():
    result = KappaResult(
        kappa=0.1443,
        mu=0.0208,
        iterations=12,
        residual=1e-9,
        method="power",
        tolerance=1e-8,
        maximizer=[1.0, 2.0],
    )

    kappa_lines = render_kappa([(1, 0.5, result)], "csv").splitlines()
    eig_lines = render_eigenvalues([(1, [9.6, 20.2871])], "csv").splitlines()

    assert kappa_lines == [
        "level,h/sqrt2,kappa_h,mu,iterations,method",
        "1,0.5,0.1443,0.0208,12,power",
    ]
    assert "maximizer" not in render_kappa([(1, 0.5, result)], "json")
    assert eig_lines == ["level,k,lambda_h", "1,1,9.6", "1,2,20.2871"]


def test_render_validation():
    report = ValidationReport(
        source="square",
        level=1,
        passed=False,
        properties=[
            PropertyResult(name="q_symmetry", passed=True, measured=1e-15, threshold=1e-10),
            PropertyResult(name="mesh_valid", passed=False, detail="bad"),
        ],
    )

    lines = render_validation([report], "csv").splitlines()

    assert lines[1] == "1,q_symmetry,yes,1e-15,1e-10,"
    assert lines[2] == "1,mesh_valid,no,,,bad"
