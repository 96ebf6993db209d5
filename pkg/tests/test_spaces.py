from __future__ import annotations

import numpy as np
import pytest

from maxlow.errors import MeshError
from maxlow.mesh import red_refine
from maxlow.spaces import (
    DUNAVANT4,
    EDGE_MIDPOINT,
    assemble_curl_coupling,
    assemble_grad_coupling,
    assemble_load,
    assemble_mass,
    assemble_normal_jump,
    assemble_rotrot,
    assemble_stiffness_grad,
    basis_norms,
    discrete_gradient,
    evaluate_n0,
    evaluate_s1,
    fe_space,
    interpolate_n0,
    prolong_n0,
    prolong_s1,
    rot_values,
)
from tests.factories import create_triangle


def test_space_dimensions(square1):
    dims = {
        family: fe_space(square1, family).n_dofs
        for family in (
            "S1",
            "S1_zero",
            "CR",
            "N0",
            "N0_tangential_zero",
            "RT0",
            "RT0_normal_zero",
            "P0vec",
        )
    }

    assert dims == {
        "S1": 9,
        "S1_zero": 1,
        "CR": 16,
        "N0": 16,
        "N0_tangential_zero": 8,
        "RT0": 16,
        "RT0_normal_zero": 8,
        "P0vec": 16,
    }


def test_unknown_family(square0):
    with pytest.raises(ValueError, match="unknown finite element family"):
        fe_space(square0, "P2")


def test_entity_to_dof_marks_removed_entities(square1):
    space = fe_space(square1, "N0_tangential_zero")
    mapping = space.entity_to_dof

    assert np.all(mapping[square1.boundary_edges] == -1)
    np.testing.assert_array_equal(mapping[space.dofs], np.arange(space.n_dofs))


def test_s1_mass_integrates_constants(jittered):
    mass = assemble_mass(fe_space(jittered, "S1"))

    assert mass.sum() == pytest.approx(1.0)
    assert abs(mass - mass.T).max() == 0.0


@pytest.mark.parametrize("family", ["S1", "CR", "N0", "RT0"])
def test_mass_matrices_are_exact_under_both_rules(jittered, family):
    space = fe_space(jittered, family)
    low = assemble_mass(space, EDGE_MIDPOINT)
    high = assemble_mass(space, DUNAVANT4)

    assert abs(low - high).max() <= 1e-12 * abs(high).max()


def test_stiffness_annihilates_constants(jittered):
    for family in ("S1", "CR"):
        space = fe_space(jittered, family)
        stiffness = assemble_stiffness_grad(space)
        np.testing.assert_allclose(stiffness @ np.ones(space.n_dofs), 0.0, atol=1e-12)


def test_stiffness_rejects_vector_family(square0):
    with pytest.raises(ValueError):
        assemble_stiffness_grad(fe_space(square0, "N0"))


def test_discrete_gradient_matches_linear_function(jittered):
    slope = np.array([0.7, -1.3])
    values = jittered.vertices @ slope + 0.25
    coeffs = discrete_gradient(jittered) @ values
    triangles = np.arange(jittered.n_triangles)

    field = evaluate_n0(jittered, coeffs, triangles, jittered.centroids())

    np.testing.assert_allclose(field, np.tile(slope, (jittered.n_triangles, 1)), atol=1e-12)
    np.testing.assert_allclose(rot_values(jittered, coeffs), 0.0, atol=1e-10)


def test_rotrot_vanishes_on_gradients(jittered):
    rng = np.random.default_rng(1)
    coeffs = discrete_gradient(jittered) @ rng.standard_normal(jittered.n_vertices)
    rotrot = assemble_rotrot(fe_space(jittered, "N0"))

    np.testing.assert_allclose(rotrot @ coeffs, 0.0, atol=1e-9)


def test_interpolate_constant_field(square2):
    coeffs = interpolate_n0(square2, lambda points: np.tile((2.0, -1.0), (len(points), 1)))
    triangles = np.arange(square2.n_triangles)

    field = evaluate_n0(square2, coeffs, triangles, square2.centroids())

    np.testing.assert_allclose(field, np.tile((2.0, -1.0), (square2.n_triangles, 1)), atol=1e-12)


def test_grad_coupling_is_gradient_times_mass(square2):
    s1z = fe_space(square2, "S1_zero")
    n0d = fe_space(square2, "N0_tangential_zero")
    coupling = assemble_grad_coupling(s1z, n0d)

    assert coupling.shape == (s1z.n_dofs, n0d.n_dofs)
    gradient = discrete_gradient(square2)[n0d.dofs][:, s1z.dofs]
    mass = assemble_mass(n0d)
    assert abs(coupling - gradient.T @ mass).max() < 1e-14


def test_curl_coupling_kills_constants(jittered):
    coupling = assemble_curl_coupling(fe_space(jittered, "S1"), fe_space(jittered, "P0vec"))

    np.testing.assert_allclose(coupling @ np.ones(jittered.n_vertices), 0.0, atol=1e-12)


def test_curl_coupling_of_linear_function(square1):
    # Curl(a x + b y) = (-b, a)
    values = square1.vertices @ np.array([2.0, 3.0])
    coupling = assemble_curl_coupling(fe_space(square1, "S1"), fe_space(square1, "P0vec"))

    per_area = (coupling @ values).reshape(-1, 2) / square1.areas[:, None]

    np.testing.assert_allclose(per_area, np.tile((-3.0, 2.0), (square1.n_triangles, 1)))


def test_normal_jump_kernel_contains_constant_fields(jittered):
    jump = assemble_normal_jump(fe_space(jittered, "P0vec"))
    constant = np.tile((0.3, -2.0), jittered.n_triangles)

    assert jump.shape == (jittered.interior_edges.size, 2 * jittered.n_triangles)
    np.testing.assert_allclose(jump @ constant, 0.0, atol=1e-12)


def test_load_of_constant_field(jittered):
    n0 = fe_space(jittered, "N0")
    load = assemble_load(n0, fe_space(jittered, "P0vec"))
    field = np.array([1.0, 0.5])
    coeffs = interpolate_n0(jittered, lambda points: np.tile(field, (len(points), 1)))

    # the constant field is an edge element field, so both sides are (psi_E, c)
    expected = assemble_mass(n0) @ coeffs
    np.testing.assert_allclose(load @ np.tile(field, jittered.n_triangles), expected, atol=1e-12)


def test_basis_norms_of_reference_triangle():
    triangle = create_triangle()

    norms = basis_norms(triangle, 0, vertex=0, edge=2)

    assert norms.lambda_y == pytest.approx(np.sqrt(0.5 / 6.0))
    assert norms.grad_lambda_y == pytest.approx(1.0)
    # edge 2 joins vertices 1 and 2: |psi|^2 = (|g1|^2 - g1.g2 + |g2|^2) |T| / 6
    assert norms.psi_E == pytest.approx(np.sqrt((1.0 + 1.0) * 0.5 / 6.0))


def test_basis_norms_reject_foreign_entities(square1):
    foreign_edge = int(np.setdiff1d(np.arange(square1.n_edges), square1.tri_edges[0])[0])
    foreign_vertex = int(np.setdiff1d(np.arange(square1.n_vertices), square1.triangles[0])[0])

    with pytest.raises(MeshError):
        basis_norms(square1, 0, edge=foreign_edge)
    with pytest.raises(MeshError):
        basis_norms(square1, 0, vertex=foreign_vertex)


def test_prolong_s1_keeps_linear_functions(lshape1):
    slope = np.array([1.5, -0.5])
    fine = red_refine(lshape1)

    prolonged = prolong_s1(lshape1, lshape1.vertices @ slope)

    np.testing.assert_allclose(prolonged, fine.vertices @ slope)


def test_prolongation_commutes_with_gradient(jittered):
    rng = np.random.default_rng(4)
    values = rng.standard_normal(jittered.n_vertices)
    fine = red_refine(jittered)

    coarse_grad = discrete_gradient(jittered) @ values
    np.testing.assert_allclose(
        prolong_n0(jittered, fine, coarse_grad),
        discrete_gradient(fine) @ prolong_s1(jittered, values),
        atol=1e-12,
    )


def test_evaluate_s1_at_vertices_reproduces_values(square1):
    values = np.arange(square1.n_vertices, dtype=float)
    triangles = np.repeat(np.arange(square1.n_triangles), 3)
    points = square1.vertices[square1.triangles.ravel()]

    np.testing.assert_allclose(
        evaluate_s1(square1, values, triangles, points), values[square1.triangles.ravel()]
    )


def test_local_matrices_of_unit_right_triangle():
    triangle = create_triangle()

    mass = assemble_mass(fe_space(triangle, "S1")).toarray()
    stiffness = assemble_stiffness_grad(fe_space(triangle, "S1")).toarray()
    cr_mass = assemble_mass(fe_space(triangle, "CR")).toarray()

    np.testing.assert_allclose(mass, (0.5 / 12.0) * (np.ones((3, 3)) + np.eye(3)))
    expected = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
    np.testing.assert_allclose(stiffness, expected, atol=1e-15)
    np.testing.assert_allclose(cr_mass, np.eye(3) * 0.5 / 3.0, atol=1e-15)


def test_leg_basis_norm_of_unit_right_triangle():
    # edge 0 joins vertices 0 and 1
    assert basis_norms(create_triangle(), 0, edge=0).psi_E ** 2 == pytest.approx(1.0 / 3.0)
