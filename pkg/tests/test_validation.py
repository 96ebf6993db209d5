from __future__ import annotations

import numpy as np
import pytest

from maxlow.validation import (
    check_complex,
    check_mesh,
    check_quadrature,
    check_rank_one,
    run_validation,
)
from tests.factories import create_annulus_mesh, create_triangle


def test_all_properties_pass_on_square(square1):
    report = run_validation(square1, source="square", level=1, seed=5, samples=20)

    failed = [prop.name for prop in report.properties if not prop.passed]
    assert failed == []
    assert report.passed
    names = {prop.name for prop in report.properties}
    assert {
        "mesh_valid",
        "complex_exactness",
        "quadrature_agreement",
        "rank_one_oracle",
        "q_symmetry",
        "dual_sign_audit",
        "error_representation",
        "hypercircle_defect",
        "hypercircle_error_bound",
        "pi_grad_stability",
        "determinism",
    } <= names


def test_injected_curl_sign_fault_is_caught(square1):
    report = run_validation(
        square1, source="square", level=1, seed=5, samples=5, inject_fault="curl_sign"
    )

    assert not report.passed
    audit = next(prop for prop in report.properties if prop.name == "dual_sign_audit")
    assert not audit.passed


def test_unknown_fault():
    with pytest.raises(ValueError, match="unknown fault"):
        run_validation(create_triangle(), source="t", level=0, inject_fault="nope")


def test_mesh_without_interior_edge_is_handled():
    report = run_validation(create_triangle(), source="triangle", level=0, samples=5)

    assert report.passed
    assert "determinism" not in {prop.name for prop in report.properties}


def test_check_mesh_accepts_multiply_connected_domains():
    assert check_mesh(create_annulus_mesh()).passed


def test_check_complex_on_lshape(lshape1):
    result = check_complex(lshape1, np.random.default_rng(0))

    assert result.passed
    expected = lshape1.n_vertices - 1
    assert result.detail == f"dim ker J = {expected}, V - 1 = {expected}"


def test_check_quadrature(jittered):
    assert check_quadrature(jittered).passed


def test_check_rank_one_visits_each_patch_class_once(square2):
    result = check_rank_one(square2)

    assert result.passed
    classes = int(result.detail.split()[0])
    assert 0 < classes < square2.n_vertices + square2.n_edges
