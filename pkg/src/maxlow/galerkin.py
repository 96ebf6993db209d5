"""Hypercircle constant kappa_h through two prefactored saddle solves.

For a piecewise constant, normally continuous datum f the primal solution
u_h in the discretely divergence-free edge elements and the smallest S1 field
sigma_h with Curl sigma_h = -f give

    |rot u_h - sigma_h|^2 = |sigma_h|^2 - |rot u_h|^2 = f^T Q f,

and kappa_h^2 is the largest value of f^T Q f / f^T M f over such data.
``Curl p = (-d2 p, d1 p)`` throughout, so ``(Curl p, v) = -(p, rot v)`` for
fields v with vanishing tangential trace.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from maxlow.config import settings
from maxlow.mesh import Triangulation, refine
from maxlow.schemas import KappaResult
from maxlow.solvers import (
    ConstrainedSolver,
    Factorization,
    largest_eig_lanczos,
    largest_eig_power,
)
from maxlow.spaces import (
    FeSpace,
    assemble_curl_coupling,
    assemble_grad_coupling,
    assemble_load,
    assemble_mass,
    assemble_normal_jump,
    assemble_rotrot,
    fe_space,
    prolong_n0,
    prolong_s1,
    rot_values,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KappaProblem:
    """Assembled blocks of the primal and dual problems on one mesh.

    D, F: rot-rot and gradient coupling on the tangentially zero edge elements.
    A, G: S1 mass and Curl coupling into piecewise constant vector fields.
    J: normal jumps of piecewise constant fields across interior edges.
    B, M: edge element load and mass of the piecewise constant fields.
    """

    mesh: Triangulation
    n0d: FeSpace
    s1z: FeSpace
    s1: FeSpace
    p0: FeSpace
    D: sparse.csr_matrix
    F: sparse.csr_matrix
    A: sparse.csr_matrix
    G: sparse.csr_matrix
    J: sparse.csr_matrix
    B: sparse.csr_matrix
    M: sparse.csr_matrix

    @property
    def trivial(self) -> bool:
        """True when the mesh has no interior edge and the primal space is empty."""
        return self.n0d.n_dofs == 0

    @property
    def dual_matrix(self) -> sparse.csc_matrix:
        """Symmetric form [[A, -G^T, 0], [-G, 0, J^T], [0, J, 0]]."""
        blocks = [[self.A, -self.G.T], [-self.G, None]]
        if self.J.shape[0]:
            blocks = [
                [self.A, -self.G.T, None],
                [-self.G, None, self.J.T],
                [None, self.J, None],
            ]
        return sparse.bmat(blocks, format="csc")

    @cached_property
    def primal(self) -> ConstrainedSolver:
        return ConstrainedSolver(self.D, self.F if self.F.shape[0] else None)

    @cached_property
    def dual(self) -> Factorization:
        return Factorization(self.dual_matrix)

    @cached_property
    def projector(self) -> ConstrainedSolver:
        """M-orthogonal projection onto normally continuous fields, applied to M y."""
        return ConstrainedSolver(self.M, self.J if self.J.shape[0] else None)

    def apply_q(self, y: np.ndarray) -> np.ndarray:
        sigma, z2 = _dual_solve(self, y)
        u = solve_primal(self, y)
        return -(self.M @ z2) - self.B.T @ u


def kappa_problem(mesh: Triangulation) -> KappaProblem:
    n0d = fe_space(mesh, "N0_tangential_zero")
    s1z = fe_space(mesh, "S1_zero")
    s1 = fe_space(mesh, "S1")
    p0 = fe_space(mesh, "P0vec")
    return KappaProblem(
        mesh=mesh,
        n0d=n0d,
        s1z=s1z,
        s1=s1,
        p0=p0,
        D=assemble_rotrot(n0d),
        F=assemble_grad_coupling(s1z, n0d),
        A=assemble_mass(s1),
        G=assemble_curl_coupling(s1, p0),
        J=assemble_normal_jump(p0),
        B=assemble_load(n0d, p0),
        M=assemble_mass(p0),
    )


def _as_problem(source: Triangulation | KappaProblem) -> KappaProblem:
    return source if isinstance(source, KappaProblem) else kappa_problem(source)


def solve_primal(problem: KappaProblem, f: np.ndarray) -> np.ndarray:
    """u_h on the tangentially zero edge elements with (rot u_h, rot v) = (f, v)."""
    if problem.trivial:
        return np.zeros(0)
    return problem.primal(problem.B @ f)


def _dual_solve(problem: KappaProblem, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n_v = problem.s1.n_dofs
    n_p = problem.p0.n_dofs
    rhs = np.zeros(problem.dual.shape[0])
    rhs[n_v : n_v + n_p] = problem.M @ f
    solution = problem.dual.solve(rhs)
    return solution[:n_v], solution[n_v : n_v + n_p]


def solve_dual(problem: KappaProblem, f: np.ndarray) -> np.ndarray:
    """sigma_h in S1 of least L2 norm with Curl sigma_h = -f."""
    return _dual_solve(problem, f)[0]


def _check_feasible(problem: KappaProblem, f: np.ndarray, tol: float = 1e-8) -> None:
    if not problem.J.shape[0]:
        return
    jump = float(np.linalg.norm(problem.J @ f))
    scale = float(abs(problem.J).sum(axis=1).max()) * float(np.linalg.norm(f))
    if jump > tol * scale:
        raise ValueError(f"datum has normal jumps (|J f| = {jump:.3e}); project it first")


def error_functional(source: Triangulation | KappaProblem, f: np.ndarray) -> float:
    """f^T Q f = |rot u_h - sigma_h|^2 for a normally continuous datum f."""
    problem = _as_problem(source)
    f = np.asarray(f, dtype=float)
    _check_feasible(problem, f)
    if not np.any(f):
        return 0.0
    return float(f @ problem.apply_q(f))


def _s1_minus_p0_sq(mesh: Triangulation, sigma: np.ndarray, rot: np.ndarray) -> float:
    """|sigma - r|^2 for sigma in S1 and a piecewise constant r."""
    mass = assemble_mass(fe_space(mesh, "S1"))
    means = sigma[mesh.triangles].mean(axis=1)
    cross = (mesh.areas * rot * means).sum()
    return float(sigma @ (mass @ sigma) - 2.0 * cross + (mesh.areas * rot**2).sum())


def _full_n0(problem: KappaProblem, u: np.ndarray) -> np.ndarray:
    full = np.zeros(problem.n0d.n_full)
    full[problem.n0d.dofs] = u
    return full


def direct_error(source: Triangulation | KappaProblem, f: np.ndarray) -> float:
    """|rot u_h - sigma_h|^2 evaluated from the recovered fields."""
    problem = _as_problem(source)
    f = np.asarray(f, dtype=float)
    _check_feasible(problem, f)
    mesh = problem.mesh
    rot = rot_values(mesh, _full_n0(problem, solve_primal(problem, f)))
    return _s1_minus_p0_sq(mesh, solve_dual(problem, f), rot)


def random_feasible_rhs(
    source: Triangulation | KappaProblem, rng: np.random.Generator
) -> np.ndarray:
    """M-orthogonal projection of a random piecewise constant field onto ker J."""
    problem = _as_problem(source)
    y = rng.standard_normal(problem.p0.n_dofs)
    return problem.projector(problem.M @ y)


def curl_sign_defect(problem: KappaProblem, sigma: np.ndarray) -> float:
    """Relative defect of (Curl sigma, v) = -(sigma, rot v) over interior edge functions.

    The left side goes through the assembled coupling G, the right side through
    the mean of sigma on each triangle.
    """
    mesh = problem.mesh
    curl = problem.B @ (problem.G @ sigma / problem.M.diagonal())
    signed = mesh.tri_edge_signs / 3.0
    rows = mesh.tri_edges.ravel()
    pairing = np.zeros(mesh.n_edges)
    np.add.at(pairing, rows, (signed * sigma[mesh.triangles].sum(axis=1)[:, None]).ravel())
    expected = -pairing[problem.n0d.dofs]
    scale = max(float(np.linalg.norm(expected)), float(np.linalg.norm(curl)), 1e-300)
    return float(np.linalg.norm(curl - expected)) / scale


def kappa_h(
    source: Triangulation | KappaProblem,
    *,
    method: str | None = None,
    tol: float | None = None,
    max_iter: int | None = None,
    seed: int | None = None,
) -> KappaResult:
    """kappa_h = sqrt((mu + residual) (1 + tol)), mu the top eigenvalue of the pencil (Q, M)."""
    problem = _as_problem(source)
    method = method or settings.kappa_method
    tol = settings.power_tol if tol is None else tol
    if problem.trivial:
        return KappaResult(
            kappa=0.0, mu=0.0, iterations=0, residual=0.0, method="trivial", tolerance=tol
        )
    constraint = problem.J if problem.J.shape[0] else None
    if method == "lanczos":
        result = largest_eig_lanczos(problem.apply_q, problem.M, constraint, tol=tol, seed=seed)
    else:
        result = largest_eig_power(
            problem.apply_q, problem.M, constraint, tol=tol, max_iter=max_iter, seed=seed
        )
    mu = max(result.value, 0.0)
    kappa = math.sqrt(max(result.upper, 0.0) * (1.0 + tol))
    logger.info(
        "kappa_h computed",
        extra={
            "stage": "kappa",
            "kappa": kappa,
            "iterations": result.iterations,
            "method": result.method,
        },
    )
    return KappaResult(
        kappa=kappa,
        mu=mu,
        iterations=result.iterations,
        residual=result.residual,
        method=result.method,
        tolerance=tol,
        maximizer=result.vector.tolist(),
    )


@dataclass(frozen=True)
class HypercircleReport:
    """Terms of |tau - rot u~|^2 + |rot(u~ - v)|^2 = |tau - rot v|^2 on the fine mesh."""

    dual_gap: float
    primal_gap: float
    total: float
    defect: float
    error_norm: float
    kappa_bound: float
    reference_levels: int

    @property
    def error_within_bound(self) -> bool:
        return self.error_norm <= self.kappa_bound * (1.0 + 1e-8) + 1e-14


def hypercircle_check(
    source: Triangulation | KappaProblem,
    f: np.ndarray,
    reference_levels: int = 2,
    kappa: float | None = None,
) -> HypercircleReport:
    """Compare u_h and sigma_h with the primal solution on a finer surrogate mesh.

    u_h and sigma_h are prolonged exactly to ``reference_levels`` red
    refinements; the surrogate u~ is the primal solution there.
    """
    problem = _as_problem(source)
    f = np.asarray(f, dtype=float)
    _check_feasible(problem, f)
    kappa = kappa_h(problem).kappa if kappa is None else kappa

    coarse = problem.mesh
    v = _full_n0(problem, solve_primal(problem, f))
    tau = solve_dual(problem, f)
    fine_f = f
    mesh = coarse
    for _ in range(reference_levels):
        fine = refine(mesh, 1)
        v = prolong_n0(mesh, fine, v)
        tau = prolong_s1(mesh, tau)
        fine_f = np.repeat(fine_f.reshape(-1, 2), 4, axis=0).ravel()
        mesh = fine

    fine_problem = kappa_problem(mesh)
    surrogate = _full_n0(fine_problem, solve_primal(fine_problem, fine_f))
    rot_surrogate = rot_values(mesh, surrogate)
    rot_v = rot_values(mesh, v)
    dual_gap = _s1_minus_p0_sq(mesh, tau, rot_surrogate)
    primal_gap = float((mesh.areas * (rot_surrogate - rot_v) ** 2).sum())
    total = _s1_minus_p0_sq(mesh, tau, rot_v)
    f_norm = math.sqrt(float(f @ (problem.M @ f)))
    return HypercircleReport(
        dual_gap=dual_gap,
        primal_gap=primal_gap,
        total=total,
        defect=abs(dual_gap + primal_gap - total),
        error_norm=math.sqrt(max(primal_gap, 0.0)),
        kappa_bound=kappa * f_norm,
        reference_levels=reference_levels,
    )
