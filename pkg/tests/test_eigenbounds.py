from __future__ import annotations

import math

import numpy as np
import pytest

from maxlow.constants import PatchCache, combine
from maxlow.eigenbounds import (
    EIGENVALUE_CLUSTERS,
    PI_SQ,
    REFERENCE_EIGENVALUES,
    c_hat,
    lower_bound,
    m_hat,
    maxwell_evp,
    mesh_for,
    representatives,
    run_level,
    run_pipeline,
    tabulated_eigenvalues,
)
from maxlow.errors import MeshError, SolverError
from maxlow.galerkin import kappa_h
from maxlow.mesh import overlap_constant
from maxlow.schemas import RunConfig
from maxlow.spaces import assemble_grad_coupling, fe_space
from tests.factories import create_triangle, write_mesh_file


def _table_report():
    return combine(
        tilde_c_diam=0.2461,
        tilde_c_hT=0.2461,
        c1_max=1.05409,
        c_qt=0.66666,
        c_s=2.25975,
        c_m=0.06522,
        c_m1=0.94974,
        c2_curl=0.9129,
        c_ol=13,
        c1_div_override=9.7290,
    )


def test_c_hat_from_tabulated_constants():
    assert c_hat(_table_report()) == pytest.approx(1.5853, abs=1e-4)


def test_m_hat_reproduces_first_square_row():
    value = m_hat(math.sqrt(2.0) / 2.0, 0.1443, _table_report())

    assert value == pytest.approx(9.1034, rel=1e-3)


@pytest.mark.parametrize(
    ("eigenvalue", "m", "expected"),
    [(9.6, 9.1034, 0.0121), (9.8696, 0.0354, 9.7490)],
)
def test_lower_bound_arithmetic(eigenvalue, m, expected):
    # tabulated to four decimals
    assert lower_bound(eigenvalue, m) == pytest.approx(expected, abs=5e-5)


def test_lower_bound_never_exceeds_eigenvalue():
    for m in (0.0, 0.01, 1.0, 10.0):
        assert lower_bound(9.6, m) <= 9.6
    assert lower_bound(9.6, 0.0) == 9.6


def test_reference_eigenvalues_count_multiplicity():
    assert REFERENCE_EIGENVALUES["square"][:3] == [PI_SQ, PI_SQ, 2 * PI_SQ]
    assert REFERENCE_EIGENVALUES["lshape"][2:4] == [PI_SQ, PI_SQ]
    assert len(REFERENCE_EIGENVALUES["square"]) == 8


def test_maxwell_evp_square_level_one_full_spectrum(square1):
    result = maxwell_evp(square1, 7)

    expected = [
        48 - 16 * math.sqrt(6),
        9.6,
        48 - 16 * math.sqrt(3),
        48.0,
        57.6,
        48 + 16 * math.sqrt(3),
        48 + 16 * math.sqrt(6),
    ]
    np.testing.assert_allclose(result.eigenvalues, expected, rtol=1e-6)


def test_representatives_take_the_closest_member_of_each_cluster():
    spectrum = [8.8082, 9.6, 20.2872, 48.0, 57.6, 75.7128, 87.1918]
    limits = [PI_SQ, 2 * PI_SQ, 4 * PI_SQ, 5 * PI_SQ, 8 * PI_SQ]

    assert representatives(spectrum, limits) == [1, 2, 3, 4, 5]
    assert representatives([9.5751, 9.8305, 20.0235], limits[:2]) == [1, 2]
    assert representatives([1.0], [1.0, 2.0]) == [0]


def test_tabulated_eigenvalues_square_level_one(square1):
    found = tabulated_eigenvalues(square1, 5, "square")

    assert found.indices == [1, 2, 3, 4, 5]
    np.testing.assert_allclose(
        found.values, [9.6, 20.2871, 48.0, 57.6, 75.7128], rtol=1e-3
    )


def test_tabulated_eigenvalues_fall_back_to_sorted_order(square1):
    from_file = tabulated_eigenvalues(square1, 2, "square.m2d")
    past_limits = tabulated_eigenvalues(square1, 6, "square")

    assert from_file.indices == [0, 1]
    assert from_file.values[0] == pytest.approx(48 - 16 * math.sqrt(6), rel=1e-6)
    assert past_limits.indices == list(range(6))


def test_tabulated_eigenvalues_need_enough_clusters(square0):
    with pytest.raises(SolverError, match="clusters"):
        tabulated_eigenvalues(square0, 2, "square")


def test_maxwell_evp_eigenvectors_are_divergence_free(lshape1):
    result = maxwell_evp(lshape1, 3)
    coupling = assemble_grad_coupling(
        fe_space(lshape1, "S1_zero"), fe_space(lshape1, "N0_tangential_zero")
    )

    assert np.all(np.diff(result.eigenvalues) >= 0)
    assert np.abs(coupling @ result.eigenvectors).max() < 1e-10
    assert result.eigenvalues[0] > 0


def test_tabulated_eigenvalues_converge_from_below_towards_pi_squared(square1, square2):
    coarse = tabulated_eigenvalues(square1, 2, "square").values
    fine = tabulated_eigenvalues(square2, 2, "square").values

    assert coarse[0] < fine[0] < PI_SQ
    assert fine[0] == pytest.approx(9.8305, rel=1e-3)
    assert fine[1] == pytest.approx(20.0235, rel=1e-3)


def test_maxwell_evp_needs_an_interior_edge():
    with pytest.raises(SolverError, match="no interior edge"):
        maxwell_evp(create_triangle(), 1)


def test_kappa_h_of_square_level_one(square1):
    assert kappa_h(square1).kappa == pytest.approx(0.1443, rel=2e-2)


def test_mesh_for_builtin_domains():
    assert mesh_for("square", 2).n_triangles == 32
    assert mesh_for("lshape", 1).n_triangles == 24
    with pytest.raises(MeshError):
        mesh_for("square", -1)


def test_mesh_for_file_refines(tmp_path, square1, settings_overrides):
    path = write_mesh_file(tmp_path, square1, name="square.m2d")
    settings_overrides(meshes_root=str(tmp_path))

    assert mesh_for(str(path), 1).n_triangles == 32
    assert mesh_for("square.m2d", 0).n_triangles == 8


def test_run_level_produces_certified_row():
    config = RunConfig(
        domain="square", levels=[1], k=2, c1_div="9.7290", constants_floor_level=0
    )

    row = run_level(config, 1, PatchCache())

    assert row.status == "ok"
    assert row.h_over_sqrt2 == pytest.approx(0.5)
    assert row.c1_div == 9.7290
    assert len(row.eigenvalues) == len(row.lower_bounds) == 2
    for value, bound in zip(row.eigenvalues, row.lower_bounds):
        assert 0 < bound <= value
    assert row.lower_bounds[0] <= PI_SQ
    assert {"mesh", "constants", "kappa", "evp"} <= set(row.timings)
    c_ol = overlap_constant(mesh_for("square", 1))
    expected = (row.h_max * row.c_hat + row.kappa_h * row.c1_div) * math.sqrt(c_ol)
    assert row.m_hat == pytest.approx(expected)


def test_run_level_reproduces_first_square_row():
    config = RunConfig(domain="square", levels=[1], k=2, c1_div="9.7290")

    row = run_level(config, 1, PatchCache())

    assert row.eigenvalue_indices == [2, 3]
    assert row.kappa_h == pytest.approx(0.1443, rel=2e-2)
    assert row.eigenvalues == pytest.approx([9.6000, 20.2871], rel=1e-3)
    assert row.m_hat == pytest.approx(9.1034, rel=1e-2)
    assert row.lower_bounds == pytest.approx([0.0121, 0.0121], rel=2e-2)


def test_lower_bounds_stay_below_the_exact_eigenvalues():
    limits = [limit for limit, _ in EIGENVALUE_CLUSTERS["square"]]
    config = RunConfig(domain="square", levels=[1, 2], k=5)

    rows = run_pipeline(config)

    for row in rows:
        assert row.status == "ok"
        for bound, value, limit in zip(row.lower_bounds, row.eigenvalues, limits):
            assert bound <= value
            assert bound <= limit


def test_lshape_level_one_against_published_row(lshape1):
    # the published row is 0.1355 and 1.3180; this triangulation gives larger values
    kappa = kappa_h(lshape1).kappa
    first = tabulated_eigenvalues(lshape1, 1, "lshape").values[0]

    assert kappa == pytest.approx(0.1443, rel=2e-3)
    assert first == pytest.approx(1.3248, abs=2e-4)
    assert kappa == pytest.approx(0.1355, rel=7e-2)
    assert first == pytest.approx(1.3180, rel=1e-2)


def test_run_pipeline_keeps_going_after_a_failed_level(tmp_path):
    config = RunConfig(mesh=str(tmp_path / "missing.m2d"), levels=[0, 1])

    rows = run_pipeline(config)

    assert [row.level for row in rows] == [0, 1]
    assert all(row.status == "failed" for row in rows)
    assert all(row.error for row in rows)


def test_run_pipeline_fills_the_callers_cache():
    cache = PatchCache()

    run_pipeline(RunConfig(domain="square", levels=[1]), cache)

    assert len(cache) > 0
    assert cache.hits > 0


def test_run_pipeline_orders_rows_by_level():
    config = RunConfig(domain="square", levels=[0, 1], threads=2)

    rows = run_pipeline(config)

    assert [row.level for row in rows] == [0, 1]
    assert all(row.status == "ok" for row in rows)


@pytest.mark.slow
def test_finer_level_tightens_the_bound():
    config = RunConfig(domain="square", levels=[1, 2], c1_div="9.7290")

    coarse, fine = run_pipeline(config)

    assert fine.m_hat < coarse.m_hat
    assert coarse.lower_bounds[0] < fine.lower_bounds[0] <= fine.eigenvalues[0] < PI_SQ


@pytest.mark.slow
@pytest.mark.parametrize(
    ("level", "kappa", "eigenvalues", "m", "bound"),
    [
        (2, 0.0721, [9.8305, 20.0235], 4.5499, 0.0481),
        (3, 0.0356, [9.8612, 19.8205], 2.2592, 0.1921),
    ],
)
def test_square_rows_match_the_published_table(level, kappa, eigenvalues, m, bound):
    config = RunConfig(domain="square", levels=[level], k=2, c1_div="9.7290")

    (row,) = run_pipeline(config)

    assert row.kappa_h == pytest.approx(kappa, rel=2e-2)
    assert row.eigenvalues == pytest.approx(eigenvalues, rel=1e-3)
    assert row.m_hat == pytest.approx(m, rel=1e-2)
    assert row.lower_bounds[0] == pytest.approx(bound, rel=2e-2)


@pytest.mark.slow
def test_lshape_lower_bounds_stay_below_the_exact_eigenvalues():
    limits = [limit for limit, _ in EIGENVALUE_CLUSTERS["lshape"]]
    config = RunConfig(domain="lshape", levels=[1, 2], k=4)

    for row in run_pipeline(config):
        assert row.status == "ok"
        assert row.lower_bounds[0] <= REFERENCE_EIGENVALUES["lshape"][0]
        for bound, value, limit in zip(row.lower_bounds, row.eigenvalues, limits):
            assert bound <= value
            assert bound <= limit
