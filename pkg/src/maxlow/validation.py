"""Property suite run by ``maxlow validate`` on small meshes."""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Callable

import numpy as np

from maxlow.config import settings
from maxlow.constants import (
    c1_vertex_patch,
    edge_functional,
    mean_row,
    pi_grad_stability_check,
)
from maxlow.eigenbounds import maxwell_evp
from maxlow.errors import MeshError, SolverError
from maxlow.galerkin import (
    KappaProblem,
    curl_sign_defect,
    direct_error,
    error_functional,
    hypercircle_check,
    kappa_h,
    kappa_problem,
    random_feasible_rhs,
)
from maxlow.mesh import Triangulation, patch, permuted, similarity_key, validate_mesh
from maxlow.schemas import PropertyResult, ValidationReport
from maxlow.solvers import INERTIA_DENSE_LIMIT, dense_constrained_eigs, rank_one_max_eig
from maxlow.spaces import (
    DUNAVANT4,
    EDGE_MIDPOINT,
    assemble_mass,
    assemble_stiffness_grad,
    discrete_gradient,
    fe_space,
    rot_values,
)

logger = logging.getLogger(__name__)

FAULTS = ("curl_sign",)
ORACLE_MAX_DOFS = 60


def _check(
    name: str, measured: float, threshold: float, detail: str | None = None
) -> PropertyResult:
    return PropertyResult(
        name=name,
        passed=bool(measured <= threshold),
        measured=float(measured),
        threshold=threshold,
        detail=detail,
    )


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def check_mesh(mesh: Triangulation) -> PropertyResult:
    try:
        validate_mesh(mesh, contractible=False)
    except MeshError as exc:
        return PropertyResult(name="mesh_valid", passed=False, detail=str(exc))
    return PropertyResult(name="mesh_valid", passed=True)


def check_complex(mesh: Triangulation, rng: np.random.Generator) -> PropertyResult:
    """rot grad = 0 and the normally continuous fields have dimension V - 1."""
    gradient = discrete_gradient(mesh)
    rot = rot_values(mesh, gradient @ rng.standard_normal(mesh.n_vertices))
    measured = float(np.abs(rot).max())
    detail = None
    if 2 * mesh.n_triangles <= INERTIA_DENSE_LIMIT:
        problem = kappa_problem(mesh)
        rank = int(np.linalg.matrix_rank(problem.J.toarray())) if problem.J.shape[0] else 0
        kernel = 2 * mesh.n_triangles - rank
        detail = f"dim ker J = {kernel}, V - 1 = {mesh.n_vertices - 1}"
        if kernel != mesh.n_vertices - 1:
            return PropertyResult(
                name="complex_exactness", passed=False, measured=measured, detail=detail
            )
    return _check("complex_exactness", measured, 1e-10, detail)


def check_quadrature(mesh: Triangulation) -> PropertyResult:
    """Mass matrices are exact under the edge-midpoint rule; compare with a degree-4 rule."""
    worst = 0.0
    for family in ("S1", "N0", "RT0", "CR"):
        space = fe_space(mesh, family)
        low = assemble_mass(space, EDGE_MIDPOINT)
        high = assemble_mass(space, DUNAVANT4)
        scale = max(float(abs(high).max()), 1e-300)
        worst = max(worst, float(abs(low - high).max()) / scale)
    return _check("quadrature_agreement", worst, 1e-12)


def check_rank_one(mesh: Triangulation) -> PropertyResult:
    """Rank-one maxima against the dense generalized eigenvalue oracle, one patch per class."""
    worst = 0.0
    seen: set = set()
    checked = 0
    for y in range(mesh.n_vertices):
        omega = patch(mesh, "vertex", y)
        sub = omega.submesh()
        local = omega.local_vertex(y)
        key = similarity_key(sub, ((local,),))
        if key in seen or sub.n_vertices > ORACLE_MAX_DOFS:
            continue
        seen.add(key)
        ell = np.zeros(sub.n_vertices)
        ell[local] = 1.0
        stiffness = assemble_stiffness_grad(fe_space(sub, "S1"))
        values, _ = dense_constrained_eigs(np.outer(ell, ell), stiffness, mean_row(sub))
        worst = max(worst, _relative(c1_vertex_patch(sub, local), float(values.max())))
        checked += 1
    for e in range(mesh.n_edges):
        omega = patch(mesh, "edge", e)
        if omega.edges.size > ORACLE_MAX_DOFS:
            continue
        lo, hi = (omega.local_vertex(int(v)) for v in mesh.edges[e])
        key = similarity_key(omega.submesh(), ((lo,), (hi,)))
        if key in seen:
            continue
        seen.add(key)
        ell = edge_functional(mesh, e)
        mass = assemble_mass(fe_space(omega.submesh(), "N0"))
        values, _ = dense_constrained_eigs(np.outer(ell, ell), mass)
        worst = max(worst, _relative(rank_one_max_eig(ell, mass), float(values.max())))
        checked += 1
    return _check("rank_one_oracle", worst, 1e-8, f"{checked} patch classes")


def check_q_symmetry(problem: KappaProblem, rng: np.random.Generator) -> PropertyResult:
    if problem.trivial:
        return PropertyResult(name="q_symmetry", passed=True, detail="no interior edge")
    y = random_feasible_rhs(problem, rng)
    z = random_feasible_rhs(problem, rng)
    gap = abs(y @ problem.apply_q(z) - z @ problem.apply_q(y))
    return _check("q_symmetry", gap / (np.linalg.norm(y) * np.linalg.norm(z)), 1e-10)


def check_dual_sign(problem: KappaProblem, rng: np.random.Generator) -> list[PropertyResult]:
    """(Curl sigma, v) = -(sigma, rot v) on assembled matrices, and f^T Q f against the fields."""
    results = [
        _check(
            "dual_sign_audit",
            curl_sign_defect(problem, rng.standard_normal(problem.s1.n_dofs)),
            1e-10,
        )
    ]
    if problem.trivial:
        return results
    f = random_feasible_rhs(problem, rng)
    results.append(
        _check(
            "error_representation",
            _relative(error_functional(problem, f), direct_error(problem, f)),
            1e-9,
        )
    )
    return results


def check_hypercircle(
    problem: KappaProblem, kappa: float, rng: np.random.Generator
) -> list[PropertyResult]:
    if problem.trivial:
        return [PropertyResult(name="hypercircle_defect", passed=True, detail="no interior edge")]
    report = hypercircle_check(problem, random_feasible_rhs(problem, rng), 2, kappa=kappa)
    scale = max(report.total, 1e-300)
    return [
        _check("hypercircle_defect", report.defect / scale, 1e-8),
        PropertyResult(
            name="hypercircle_error_bound",
            passed=report.error_within_bound,
            measured=report.error_norm,
            threshold=report.kappa_bound,
        ),
    ]


def check_pi_grad(mesh: Triangulation, seed: int, samples: int) -> PropertyResult:
    result = pi_grad_stability_check(mesh, None, samples=samples, seed=seed)
    return _check(
        "pi_grad_stability",
        result.worst_ratio,
        1.0 + 1e-10,
        f"{result.violations} violations in {result.samples} samples",
    )


def check_determinism(mesh: Triangulation, seed: int, k: int = 2) -> PropertyResult:
    """Eigenvalues agree across repeated solves and a renumbered copy of the mesh."""
    first = maxwell_evp(mesh, k).eigenvalues
    again = maxwell_evp(mesh, k).eigenvalues
    shuffled = maxwell_evp(permuted(mesh, seed), k).eigenvalues
    if not np.array_equal(first, again):
        return PropertyResult(name="determinism", passed=False, detail="repeated solve differs")
    worst = max(_relative(a, b) for a, b in zip(first, shuffled))
    return _check("determinism", worst, 1e-9)


def _guard(name: str, check: Callable[[], PropertyResult | list[PropertyResult]]) -> list:
    try:
        result = check()
    except (SolverError, MeshError, ValueError) as exc:
        logger.warning("property errored", extra={"property": name, "error": str(exc)})
        return [PropertyResult(name=name, passed=False, detail=str(exc))]
    return result if isinstance(result, list) else [result]


def run_validation(
    mesh: Triangulation,
    *,
    source: str,
    level: int,
    seed: int | None = None,
    samples: int = 200,
    inject_fault: str | None = None,
) -> ValidationReport:
    """All properties on one mesh; ``inject_fault`` corrupts the assembly for self-tests."""
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ValueError(f"unknown fault {inject_fault!r}; choose from {FAULTS}")
    seed = settings.seed if seed is None else seed
    rng = np.random.default_rng(seed)

    problem = kappa_problem(mesh)
    if inject_fault == "curl_sign":
        problem = dataclasses.replace(problem, G=-problem.G)
    evp_k = 2 if not problem.trivial and problem.n0d.n_dofs - problem.s1z.n_dofs >= 2 else 1

    properties: list[PropertyResult] = []
    properties += _guard("mesh_valid", lambda: check_mesh(mesh))
    properties += _guard("complex_exactness", lambda: check_complex(mesh, rng))
    properties += _guard("quadrature_agreement", lambda: check_quadrature(mesh))
    properties += _guard("rank_one_oracle", lambda: check_rank_one(mesh))
    properties += _guard("q_symmetry", lambda: check_q_symmetry(problem, rng))
    properties += _guard("dual_sign_audit", lambda: check_dual_sign(problem, rng))
    properties += _guard(
        "hypercircle_defect", lambda: check_hypercircle(problem, kappa_h(problem).kappa, rng)
    )
    properties += _guard("pi_grad_stability", lambda: check_pi_grad(mesh, seed, samples))
    if not problem.trivial:
        properties += _guard("determinism", lambda: check_determinism(mesh, seed, evp_k))

    report = ValidationReport(
        source=source,
        level=level,
        passed=all(prop.passed for prop in properties),
        properties=properties,
    )
    logger.info(
        "validation finished",
        extra={"source": source, "level": level, "passed": report.passed},
    )
    return report

