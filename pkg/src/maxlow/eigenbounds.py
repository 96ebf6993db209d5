"""Discrete Maxwell eigenvalues and their guaranteed lower bounds per refinement level."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from maxlow.config import settings
from maxlow.constants import PatchCache, compute_constants, max_report
from maxlow.errors import MeshError, SolverError
from maxlow.galerkin import kappa_h
from maxlow.mesh import Triangulation, generate_lshape, generate_square, refine
from maxlow.mesh_io import read_mesh
from maxlow.run_steps import run_step
from maxlow.schemas import BoundsRow, ConstantsReport, RunConfig
from maxlow.solvers import EigResult, smallest_eigs_constrained
from maxlow.spaces import (
    FeSpace,
    assemble_grad_coupling,
    assemble_mass,
    assemble_rotrot,
    fe_space,
)

logger = logging.getLogger(__name__)

PI_SQ = math.pi**2
# distinct limits of the exact spectrum with their multiplicities, ascending
EIGENVALUE_CLUSTERS: dict[str, list[tuple[float, int]]] = {
    "square": [(PI_SQ, 2), (2 * PI_SQ, 1), (4 * PI_SQ, 2), (5 * PI_SQ, 2), (8 * PI_SQ, 1)],
    "lshape": [(1.4756218241, 1), (3.5340313667, 1), (PI_SQ, 2), (11.3894793979, 1)],
}
# counted with multiplicity
REFERENCE_EIGENVALUES: dict[str, list[float]] = {
    name: [value for value, count in clusters for _ in range(count)]
    for name, clusters in EIGENVALUE_CLUSTERS.items()
}
CLUSTER_SLACK = 2

CONSTRAINT_TOL = 1e-10


def _spaces(mesh: Triangulation) -> tuple[FeSpace, FeSpace]:
    n0d = fe_space(mesh, "N0_tangential_zero")
    s1z = fe_space(mesh, "S1_zero")
    if n0d.n_dofs == 0:
        raise SolverError("the mesh has no interior edge; the discrete space is empty")
    return n0d, s1z


def maxwell_evp(mesh: Triangulation, k: int, tol: float | None = None) -> EigResult:
    """k smallest eigenpairs of rot-rot against mass on discretely divergence-free fields."""
    n0d, s1z = _spaces(mesh)
    coupling = assemble_grad_coupling(s1z, n0d) if s1z.n_dofs else None
    result = smallest_eigs_constrained(
        assemble_rotrot(n0d), assemble_mass(n0d), coupling, k, tol=tol
    )
    if coupling is not None:
        scale = max(float(abs(coupling).sum(axis=1).max()), 1.0)
        violation = float(np.abs(coupling @ result.eigenvectors).max())
        if violation > CONSTRAINT_TOL * scale:
            raise SolverError(f"eigenvectors violate the divergence constraint by {violation:.3e}")
    return result


def representatives(eigenvalues: Sequence[float], limits: Sequence[float]) -> list[int]:
    """Index of one discrete eigenvalue per limit.

    Limits are visited in ascending order and each takes the eigenvalue closest
    to it among those above the previous pick. Fewer indices than limits come
    back when the spectrum runs out.
    """
    values = np.asarray(eigenvalues, dtype=float)
    picked: list[int] = []
    start = 0
    for limit in limits:
        if start >= values.size:
            break
        index = start + int(np.argmin(np.abs(values[start:] - limit)))
        picked.append(index)
        start = index + 1
    return picked


@dataclass(frozen=True)
class TabulatedEigenvalues:
    indices: list[int]
    values: list[float]


def tabulated_eigenvalues(
    mesh: Triangulation, k: int, source: str, tol: float | None = None
) -> TabulatedEigenvalues:
    """k discrete eigenvalues, one per limit of the exact spectrum for built-in domains.

    Discrete clusters split on coarse meshes; the member closest to each limit
    represents it. Mesh files, and requests past the tabulated limits, list the
    k smallest eigenvalues.
    """
    clusters = EIGENVALUE_CLUSTERS.get(source)
    if clusters is None or k > len(clusters):
        values = maxwell_evp(mesh, k, tol).eigenvalues
        return TabulatedEigenvalues(list(range(k)), [float(value) for value in values])
    n0d, s1z = _spaces(mesh)
    wanted = sum(count for _, count in clusters[:k]) + CLUSTER_SLACK
    result = maxwell_evp(mesh, min(wanted, n0d.n_dofs - s1z.n_dofs), tol)
    indices = representatives(result.eigenvalues, [limit for limit, _ in clusters[:k]])
    if len(indices) < k:
        raise SolverError(
            f"requested {k} eigenvalues but only {len(indices)} clusters are resolved"
        )
    return TabulatedEigenvalues(indices, [float(result.eigenvalues[i]) for i in indices])


def c_hat(report: ConstantsReport) -> float:
    return (1.0 + report.C1_Curl) * report.tilde_c + report.C2_Curl


def m_hat(h_max: float, kappa: float, report: ConstantsReport) -> float:
    return (h_max * c_hat(report) + kappa * report.C1_div) * math.sqrt(report.C_OL)


def lower_bound(eigenvalue: float, m: float) -> float:
    return eigenvalue / (1.0 + m**2 * eigenvalue)


def mesh_for(source: str, level: int) -> Triangulation:
    """Mesh of refinement ``level`` for a built-in domain or a mesh file."""
    if level < 0:
        raise MeshError("refinement level must be non-negative")
    if source == "square":
        return generate_square(level)
    if source == "lshape":
        return generate_lshape(level)
    path = Path(source)
    if not path.exists() and (Path(settings.meshes_root) / path).exists():
        path = Path(settings.meshes_root) / path
    return refine(read_mesh(path), level)


def run_level(config: RunConfig, level: int, cache: PatchCache | None = None) -> BoundsRow:
    timings: dict[str, float] = {}
    context = {"level": level, "source": config.source}
    with run_step("mesh", timings, **context):
        mesh = mesh_for(config.source, level)
    with run_step("constants", timings, **context):

        def constants_of(grid: Triangulation) -> ConstantsReport:
            return compute_constants(
                grid,
                normalization=config.tilde_c_normalization,
                c1_div_override=config.c1_div_override,
                threads=1 if len(config.levels) > 1 else config.threads,
                cache=cache,
                eig_tol=config.eig_tol,
            )

        report = constants_of(mesh)
        if level < config.constants_floor_level:
            floor = mesh_for(config.source, config.constants_floor_level)
            report = max_report(report, constants_of(floor))
    with run_step("kappa", timings, **context):
        kappa = kappa_h(
            mesh,
            method=config.kappa_method,
            tol=config.power_tol,
            max_iter=config.power_max_iter,
            seed=config.seed,
        )
    with run_step("evp", timings, **context):
        eigs = tabulated_eigenvalues(mesh, config.k, config.source, tol=config.eig_tol)

    h_max = mesh.h_max
    m = m_hat(h_max, kappa.kappa, report)
    eigenvalues = eigs.values
    return BoundsRow(
        level=level,
        h_max=h_max,
        h_over_sqrt2=h_max / math.sqrt(2.0),
        kappa_h=kappa.kappa,
        c_hat=c_hat(report),
        m_hat=m,
        c1_div=report.C1_div,
        eigenvalues=eigenvalues,
        eigenvalue_indices=[index + 1 for index in eigs.indices],
        lower_bounds=[lower_bound(value, m) for value in eigenvalues],
        timings=timings,
    )


def run_pipeline(config: RunConfig, cache: PatchCache | None = None) -> list[BoundsRow]:
    """One row per level; a failing level yields a ``failed`` row and the rest continue."""
    if cache is None:
        cache = PatchCache(settings.geometry_cache)

    def guarded(level: int) -> BoundsRow:
        try:
            return run_level(config, level, cache)
        except (SolverError, MeshError, ValueError, OSError) as exc:
            logger.error(
                "level failed", extra={"level": level, "source": config.source, "error": str(exc)}
            )
            return BoundsRow(level=level, status="failed", error=str(exc))

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        rows = list(pool.map(guarded, config.levels))
    return sorted(rows, key=lambda row: row.level)
