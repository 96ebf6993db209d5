"""Local stability and Poincare constants of the bound chain.

Every quantity is computed on patch submeshes. Patches that agree up to rigid
motion, reflection and scaling share one computation through
:class:`PatchCache`; cached values are scale free.
"""

from __future__ import annotations

import logging
import math
import threading
from collections.abc import Callable, Hashable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from maxlow.config import settings
from maxlow.errors import ConstantsError, MeshError, SolverError
from maxlow.mesh import Patch, Triangulation, overlap_constant, patch, refine, similarity_key
from maxlow.schemas import ConstantsReport, PatchConstant
from maxlow.solvers import ConstrainedSolver, rank_one_max_eig, smallest_eigs_constrained
from maxlow.spaces import (
    DUNAVANT4,
    assemble_cross_mass,
    assemble_grad_coupling,
    assemble_mass,
    assemble_rotrot,
    assemble_stiffness_grad,
    barycentric_gradients,
    basis_norms,
    fe_space,
)

logger = logging.getLogger(__name__)

C1_CURL = math.sqrt(3.0)
C_RD = 1.0


class PatchCache:
    """Thread-safe memo of patch computations keyed by similarity class."""

    def __init__(self, enabled: bool = True) -> None:
        self.enabled = enabled
        self._values: dict[Hashable, object] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get_or_compute(self, key: Hashable, compute: Callable[[], object]) -> object:
        if not self.enabled:
            return compute()
        with self._lock:
            if key in self._values:
                self.hits += 1
                return self._values[key]
        value = compute()
        with self._lock:
            self.misses += 1
            return self._values.setdefault(key, value)

    def __len__(self) -> int:
        return len(self._values)


def mean_row(sub: Triangulation) -> np.ndarray:
    """Integrals of the P1 hat functions; the zero-mean constraint row."""
    row = np.zeros(sub.n_vertices)
    np.add.at(row, sub.triangles.ravel(), np.repeat(sub.areas / 3.0, 3))
    return row[None, :]


def _guarded(kind: str, anchor: int, compute: Callable[[], object]) -> object:
    try:
        return compute()
    except ConstantsError:
        raise
    except SolverError as exc:
        raise ConstantsError(kind, anchor, exc) from exc


# -- patch Poincare constants ------------------------------------------------


@dataclass(frozen=True)
class PoincareResult:
    lambda_cr: float
    lambda_hat: float
    H: float
    bound: float


def poincare_lower_eigenvalue(
    domain: Triangulation, refinements: int | None = None, kappa_sq: float | None = None
) -> PoincareResult:
    """Guaranteed lower bound of the first nonzero Neumann eigenvalue of ``domain``.

    The Crouzeix-Raviart eigenvalue on the refined domain mesh is corrected by
    lambda / (1 + kappa^2 lambda H^2) with H the fine mesh size.
    """
    refinements = settings.poincare_refinements if refinements is None else refinements
    kappa_sq = settings.poincare_kappa_sq if kappa_sq is None else kappa_sq
    fine = refine(domain, refinements)
    cr = fe_space(fine, "CR")
    stiffness = assemble_stiffness_grad(cr)
    mass = assemble_mass(cr)
    mean = sparse.csr_matrix((mass @ np.ones(cr.n_dofs))[None, :])
    lambda_cr = float(smallest_eigs_constrained(stiffness, mass, mean, 1).eigenvalues[0])
    h = fine.h_max
    lambda_hat = lambda_cr / (1.0 + kappa_sq * lambda_cr * h**2)
    return PoincareResult(lambda_cr, lambda_hat, h, 1.0 / math.sqrt(lambda_hat))


def poincare_patch(mesh: Triangulation, triangle: int) -> float:
    """Poincare bound of the element patch of ``triangle`` divided by the patch diameter."""
    omega = patch(mesh, "element", triangle)
    return poincare_lower_eigenvalue(omega.submesh()).bound / omega.diameter


def poincare_tilde_c(
    mesh: Triangulation, cache: PatchCache | None = None, threads: int | None = None
) -> tuple[float, float, list[PatchConstant]]:
    """(c~ normalized by diam, c~ normalized by h_T, per-patch values)."""
    if cache is None:
        cache = PatchCache(settings.geometry_cache)
    threads = threads or settings.threads

    def scaled_bound(t: int) -> float:
        omega = patch(mesh, "element", t)
        sub = omega.submesh()
        key = ("poincare", settings.poincare_refinements, similarity_key(sub))
        return cache.get_or_compute(
            key,
            lambda: _guarded(
                "element", t, lambda: poincare_lower_eigenvalue(sub).bound / omega.diameter
            ),
        )

    with ThreadPoolExecutor(max_workers=threads) as pool:
        by_diam = np.array(list(pool.map(scaled_bound, range(mesh.n_triangles))))
    diameters = np.array([patch(mesh, "element", t).diameter for t in range(mesh.n_triangles)])
    by_ht = by_diam * diameters / mesh.h_T
    details = [
        PatchConstant(quantity="tilde_c", kind="element", anchor=t, value=float(v))
        for t, v in enumerate(by_diam)
    ]
    return float(by_diam.max()), float(by_ht.max()), details


# -- gradient quasi-interpolation constants ----------------------------------


def c1_vertex_patch(sub: Triangulation, local_vertex: int) -> float:
    stiffness = assemble_stiffness_grad(fe_space(sub, "S1"))
    ell = np.zeros(sub.n_vertices)
    ell[local_vertex] = 1.0
    return rank_one_max_eig(ell, stiffness, mean_row(sub))


def c1_yT(mesh: Triangulation, vertex: int, triangle: int | None = None) -> float:
    """max v(y)^2 / |grad v|^2 over zero-mean P1 functions on the vertex patch of y.

    Only the vertex patch enters; ``triangle`` is checked to contain ``vertex``.
    """
    if triangle is not None and vertex not in mesh.triangles[triangle]:
        raise MeshError(f"vertex {vertex} is not a corner of triangle {triangle}")
    omega = patch(mesh, "vertex", vertex)
    return c1_vertex_patch(omega.submesh(), omega.local_vertex(vertex))


def c_QT(mesh: Triangulation, vertex: int, triangle: int, c1: float | None = None) -> float:
    c1 = c1_yT(mesh, vertex, triangle) if c1 is None else c1
    return math.sqrt(c1) * basis_norms(mesh, triangle, vertex=vertex).grad_lambda_y


def split_point_constant(c1_by_vertex: np.ndarray) -> float:
    """2 max_y C1(y,T), the point constant carrying the factor of the mean/point split of c_y.

    Reports print its square root as C1(y,T).
    """
    return 2.0 * float(np.max(c1_by_vertex))


def c2_curl_triangle(mesh: Triangulation, triangle: int, split: float) -> float:
    """sqrt(|T| / h_T^2 * sum_y split) with the same split constant at all three corners."""
    return math.sqrt(mesh.areas[triangle] / mesh.h_T[triangle] ** 2 * 3.0 * split)


def c2_Curl(mesh: Triangulation, c1_by_vertex: np.ndarray | None = None) -> float:
    if c1_by_vertex is None:
        c1_by_vertex = np.array([c1_yT(mesh, y) for y in range(mesh.n_vertices)])
    split = split_point_constant(c1_by_vertex)
    return max(c2_curl_triangle(mesh, t, split) for t in range(mesh.n_triangles))


# -- rotation quasi-interpolation constants ----------------------------------


@dataclass(frozen=True)
class EdgeWeight:
    """The weight z_E^1 of an edge, stored as edge element coefficients.

    The Raviart-Thomas field is the clockwise rotation of the edge element field
    with ``coefficients`` on the interior edges of the extended edge patch.
    ``residual`` is the largest violation of the orthogonality constraint and
    ``div_residual`` the largest per-triangle defect of the divergence equation.
    """

    patch: Patch
    coefficients: np.ndarray
    norm_sq: float
    residual: float
    div_residual: float


def _delta_z0(omega: Patch, first: int, second: int) -> np.ndarray:
    """Values of z0_first - z0_second on the patch triangles."""
    mesh = omega.mesh
    values = np.zeros(len(omega.triangles))
    for vertex, sign in ((first, 1.0), (second, -1.0)):
        members = mesh.vertex_triangles[vertex].indices
        values[np.searchsorted(omega.triangles, members)] += sign / mesh.areas[members].sum()
    return values


def z_E1(mesh: Triangulation, edge: int, reverse: bool = False) -> EdgeWeight:
    """Weight field on the extended edge patch with div z = z0_lo - z0_hi.

    The normal trace vanishes on the patch boundary and z is orthogonal to Curl
    of the interior hat functions. With this orientation the S1 operator built
    from the weights reproduces discrete gradients; ``reverse`` swaps the two
    endpoints and flips the sign of the solution.
    """
    omega = patch(mesh, "edge", edge)
    lo, hi = (int(v) for v in mesh.edges[edge])
    first, second = (lo, hi) if reverse else (hi, lo)
    sub = omega.submesh()
    n0d = fe_space(sub, "N0_tangential_zero")
    s1z = fe_space(sub, "S1_zero")
    if n0d.n_dofs == 0:
        return EdgeWeight(omega, np.zeros(0), 0.0, 0.0, 0.0)

    delta = _delta_z0(omega, first, second)
    signed_rot = np.zeros((sub.n_triangles, sub.n_edges))
    np.put_along_axis(signed_rot, sub.tri_edges, sub.tri_edge_signs.astype(float), axis=1)
    signed_rot = signed_rot[:, n0d.dofs]
    coupling = assemble_grad_coupling(s1z, n0d) if s1z.n_dofs else None
    z = ConstrainedSolver(assemble_rotrot(n0d), coupling)(-(delta @ signed_rot))

    residual = 0.0 if coupling is None else float(np.abs(coupling @ z).max())
    div_residual = float(np.abs(signed_rot @ z / sub.areas + delta).max())
    norm_sq = float(z @ (assemble_mass(n0d) @ z))
    return EdgeWeight(omega, z, norm_sq, residual, div_residual)


def _point_functional(omega_y: Patch, vertex: int) -> np.ndarray:
    """g with (Q u)(y) = g . u, Q the zero-mean gradient projection on the vertex patch."""
    sub = omega_y.submesh()
    s1 = fe_space(sub, "S1")
    ell = np.zeros(s1.n_dofs)
    ell[omega_y.local_vertex(vertex)] = 1.0
    w = ConstrainedSolver(assemble_stiffness_grad(s1), mean_row(sub))(ell)
    return assemble_grad_coupling(s1, fe_space(sub, "N0")).T @ w


def edge_functional(
    mesh: Triangulation, edge: int, weight: EdgeWeight | None = None
) -> np.ndarray:
    """l with l . u = int_E (I - S1) u . t_E for edge element fields u on the edge patch."""
    weight = weight or z_E1(mesh, edge)
    omega = weight.patch
    sub = omega.submesh()
    n0 = fe_space(sub, "N0")
    ell = np.zeros(n0.n_dofs)
    ell[omega.local_edge(edge)] = 1.0
    if weight.coefficients.size:
        cross = assemble_cross_mass(n0, fe_space(sub, "RT0_normal_zero"))
        ell -= cross @ weight.coefficients
    lo, hi = (int(v) for v in mesh.edges[edge])
    for vertex, sign in ((hi, 1.0), (lo, -1.0)):
        omega_y = patch(mesh, "vertex", vertex)
        local_edges = np.searchsorted(omega.edges, omega_y.edges)
        ell[local_edges] -= sign * _point_functional(omega_y, vertex)
    return ell


def c_S_edge(mesh: Triangulation, edge: int, weight: EdgeWeight | None = None) -> float:
    """l^T M^-1 l with M the unconstrained edge element mass of the edge patch."""
    weight = weight or z_E1(mesh, edge)
    ell = edge_functional(mesh, edge, weight)
    return rank_one_max_eig(ell, assemble_mass(fe_space(weight.patch.submesh(), "N0")))


def c_S(mesh: Triangulation, edge: int, triangle: int) -> float:
    """|psi_E|_T sqrt(l^T M^-1 l), the square-root form entering C1_div and C2_div."""
    psi = basis_norms(mesh, triangle, edge=edge).psi_E
    return psi * math.sqrt(c_S_edge(mesh, edge))


def c_M1(mesh: Triangulation, triangle: int, norms_sq: dict[int, float] | None = None) -> float:
    total = 0.0
    for edge in (int(e) for e in mesh.tri_edges[triangle]):
        z_sq = norms_sq[edge] if norms_sq is not None else z_E1(mesh, edge).norm_sq
        total += z_sq * basis_norms(mesh, triangle, edge=edge).psi_E ** 2
    return math.sqrt(3.0 * total)


def discrete_maxwell_min(sub: Triangulation) -> float | None:
    """Smallest rot-rot / mass eigenvalue on discretely divergence-free fields, or None."""
    n0d = fe_space(sub, "N0_tangential_zero")
    s1z = fe_space(sub, "S1_zero")
    if n0d.n_dofs - s1z.n_dofs < 1:
        return None
    coupling = assemble_grad_coupling(s1z, n0d) if s1z.n_dofs else None
    result = smallest_eigs_constrained(assemble_rotrot(n0d), assemble_mass(n0d), coupling, 1)
    return float(result.eigenvalues[0])


def c_M_local(mesh: Triangulation, edge: int, triangle: int) -> float | None:
    """1 / (h_T sqrt(mu_min)) on the edge patch; None for a patch without such fields."""
    mu = discrete_maxwell_min(patch(mesh, "edge", edge).submesh())
    if mu is None:
        return None
    return 1.0 / (mesh.h_T[triangle] * math.sqrt(mu))


# -- mesh-level report -------------------------------------------------------


@dataclass(frozen=True)
class _EdgeData:
    z_norm_sq: float
    s_value: float
    mu_scaled: float | None


def _edge_data(mesh: Triangulation, edge: int) -> _EdgeData:
    weight = z_E1(mesh, edge)
    mu = discrete_maxwell_min(weight.patch.submesh())
    return _EdgeData(
        z_norm_sq=weight.norm_sq,
        s_value=c_S_edge(mesh, edge, weight),
        mu_scaled=None if mu is None else mu * weight.patch.diameter**2,
    )


def combine(
    *,
    tilde_c_diam: float,
    tilde_c_hT: float,
    c1_max: float,
    c_qt: float,
    c_s: float,
    c_m: float,
    c_m1: float,
    c2_curl: float,
    c_ol: int,
    normalization: str = "diam",
    c1_div_override: float | None = None,
    tolerance: float = 0.0,
    flagged: list[str] | None = None,
    patches: list[PatchConstant] | None = None,
) -> ConstantsReport:
    c1_div_formula = c_m1 + 3.0 * c_qt + 3.0 * c_s
    return ConstantsReport(
        tilde_c=tilde_c_diam if normalization == "diam" else tilde_c_hT,
        tilde_c_diam=tilde_c_diam,
        tilde_c_hT=tilde_c_hT,
        tilde_c_normalization=normalization,
        C1yT_max=c1_max,
        C_QT=c_qt,
        C_S=c_s,
        c_M=c_m,
        C_M1=c_m1,
        C1_Curl=C1_CURL,
        C2_Curl=c2_curl,
        C1_div=c1_div_override if c1_div_override is not None else c1_div_formula,
        C1_div_formula=c1_div_formula,
        C1_div_override=c1_div_override,
        C2_div=3.0 * c_s * c_m,
        C_OL=c_ol,
        C_RD=C_RD,
        tolerance=tolerance,
        flagged=flagged or [],
        patches=patches or [],
    )


def max_report(own: ConstantsReport, floor: ConstantsReport) -> ConstantsReport:
    """Componentwise maximum of two reports; per-patch records stay those of ``own``."""
    return combine(
        tilde_c_diam=max(own.tilde_c_diam, floor.tilde_c_diam),
        tilde_c_hT=max(own.tilde_c_hT, floor.tilde_c_hT),
        c1_max=max(own.C1yT_max, floor.C1yT_max),
        c_qt=max(own.C_QT, floor.C_QT),
        c_s=max(own.C_S, floor.C_S),
        c_m=max(own.c_M, floor.c_M),
        c_m1=max(own.C_M1, floor.C_M1),
        c2_curl=max(own.C2_Curl, floor.C2_Curl),
        c_ol=max(own.C_OL, floor.C_OL),
        normalization=own.tilde_c_normalization,
        c1_div_override=own.C1_div_override,
        tolerance=max(own.tolerance, floor.tolerance),
        flagged=sorted(set(own.flagged) | set(floor.flagged)),
        patches=own.patches,
    )


def compute_constants(
    mesh: Triangulation,
    *,
    normalization: str | None = None,
    c1_div_override: float | None = None,
    threads: int | None = None,
    cache: PatchCache | None = None,
    eig_tol: float | None = None,
) -> ConstantsReport:
    """All local constants of ``mesh`` reduced to their maxima over patches.

    Computed values are inflated by ``1 + eig_tol`` so the reported constants
    stay upper bounds of the exact local eigenvalues.
    """
    normalization = normalization or settings.tilde_c_normalization
    threads = threads or settings.threads
    if cache is None:
        cache = PatchCache(settings.geometry_cache)
    eig_tol = settings.eig_tol if eig_tol is None else eig_tol
    inflate = 1.0 + eig_tol

    def vertex_job(y: int) -> float:
        omega = patch(mesh, "vertex", y)
        sub = omega.submesh()
        local = omega.local_vertex(y)
        return cache.get_or_compute(
            ("c1", similarity_key(sub, ((local,),))),
            lambda: _guarded("vertex", y, lambda: c1_vertex_patch(sub, local)),
        )

    def edge_job(e: int) -> _EdgeData:
        omega = patch(mesh, "edge", e)
        lo, hi = (omega.local_vertex(int(v)) for v in mesh.edges[e])
        return cache.get_or_compute(
            ("edge", similarity_key(omega.submesh(), ((lo,), (hi,)))),
            lambda: _guarded("edge", e, lambda: _edge_data(mesh, e)),
        )

    with ThreadPoolExecutor(max_workers=threads) as pool:
        c1_values = np.array(list(pool.map(vertex_job, range(mesh.n_vertices))))
        edge_values = list(pool.map(edge_job, range(mesh.n_edges)))
    tilde_diam, tilde_ht, details = poincare_tilde_c(mesh, cache, threads)
    edge_diameters = np.array([patch(mesh, "edge", e).diameter for e in range(mesh.n_edges)])

    grads = barycentric_gradients(mesh)
    split = split_point_constant(c1_values)
    flagged: set[str] = set()
    c_qt = c_s = c_m = c_m1 = c2_curl = 0.0
    for t in range(mesh.n_triangles):
        area = float(mesh.areas[t])
        h_t = float(mesh.h_T[t])
        for k, y in enumerate(int(v) for v in mesh.triangles[t]):
            value = math.sqrt(c1_values[y] * area * float(grads[t, k] @ grads[t, k]))
            c_qt = max(c_qt, value)
            details.append(
                PatchConstant(quantity="C_QT", kind="vertex", anchor=y, triangle=t, value=value)
            )
        m1_total = 0.0
        for e in (int(e) for e in mesh.tri_edges[t]):
            data = edge_values[e]
            psi_sq = basis_norms(mesh, t, edge=e).psi_E ** 2
            m1_total += data.z_norm_sq * psi_sq
            s_value = math.sqrt(psi_sq * data.s_value)
            c_s = max(c_s, s_value)
            details.append(
                PatchConstant(quantity="C_S", kind="edge", anchor=e, triangle=t, value=s_value)
            )
            if data.mu_scaled is None:
                flagged.add(f"c_M: edge patch {e} has no discretely divergence-free fields")
                continue
            m_value = edge_diameters[e] / (h_t * math.sqrt(data.mu_scaled))
            c_m = max(c_m, m_value)
            details.append(
                PatchConstant(quantity="c_M", kind="edge", anchor=e, triangle=t, value=m_value)
            )
        m1 = math.sqrt(3.0 * m1_total)
        c2_t = c2_curl_triangle(mesh, t, split)
        c_m1 = max(c_m1, m1)
        c2_curl = max(c2_curl, c2_t)
        details.append(PatchConstant(quantity="C_M1", kind="triangle", anchor=t, value=m1))
        details.append(PatchConstant(quantity="C2_Curl", kind="triangle", anchor=t, value=c2_t))
    details.extend(
        PatchConstant(quantity="C1_yT", kind="vertex", anchor=y, value=float(v))
        for y, v in enumerate(c1_values)
    )

    logger.info(
        "constants computed",
        extra={
            "stage": "constants",
            "triangles": mesh.n_triangles,
            "cache_entries": len(cache),
            "cache_hits": cache.hits,
            "flagged": len(flagged),
        },
    )
    return combine(
        tilde_c_diam=tilde_diam * inflate,
        tilde_c_hT=tilde_ht * inflate,
        c1_max=math.sqrt(split * inflate),
        c_qt=c_qt * inflate,
        c_s=c_s * math.sqrt(inflate),
        c_m=c_m * inflate,
        c_m1=c_m1 * inflate,
        c2_curl=c2_curl * inflate,
        c_ol=overlap_constant(mesh),
        normalization=normalization,
        c1_div_override=c1_div_override,
        tolerance=eig_tol,
        flagged=sorted(flagged),
        patches=details,
    )


# -- empirical stability of the gradient quasi-interpolation -----------------


def p2_values(
    mesh: Triangulation, coeffs: np.ndarray, bary: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Values (T, q) and gradients (T, q, 2) of a continuous piecewise quadratic.

    ``coeffs`` holds the vertex values followed by the edge-midpoint values.
    """
    grads = barycentric_gradients(mesh)
    lam = np.broadcast_to(bary, (mesh.n_triangles,) + bary.shape)
    nxt = [1, 2, 0]
    prv = [2, 0, 1]
    vertex_c = coeffs[mesh.triangles]
    edge_c = coeffs[mesh.n_vertices + mesh.tri_edges]
    # edge k is opposite vertex k; its basis function is 4 lambda_nxt lambda_prv
    values = np.einsum("tqk,tk->tq", lam * (2.0 * lam - 1.0), vertex_c) + np.einsum(
        "tqk,tk->tq", 4.0 * lam[..., nxt] * lam[..., prv], edge_c
    )
    vertex_grad = (4.0 * lam - 1.0)[..., None] * grads[:, None]
    edge_grad = 4.0 * (
        lam[..., nxt, None] * grads[:, None, prv] + lam[..., prv, None] * grads[:, None, nxt]
    )
    gradients = np.einsum("tqkc,tk->tqc", vertex_grad, vertex_c) + np.einsum(
        "tqkc,tk->tqc", edge_grad, edge_c
    )
    return values, gradients


def pi_grad_operator(mesh: Triangulation) -> np.ndarray:
    """Dense V x (V + E) matrix of c_y(u) = mean_{omega_y} u + (Q_y u)(y).

    Columns act on continuous piecewise quadratics given by vertex values and
    edge-midpoint values; Q_y is the zero-mean gradient projection on the
    vertex patch of y.
    """
    n_v = mesh.n_vertices
    operator = np.zeros((n_v, n_v + mesh.n_edges))
    grads = barycentric_gradients(mesh)
    local_stiffness = mesh.areas[:, None, None] * np.einsum("tic,tjc->tij", grads, grads)
    for y in range(n_v):
        omega = patch(mesh, "vertex", y)
        sub = omega.submesh()
        columns = np.concatenate([omega.vertices, n_v + omega.edges])
        # at the centroid grad u is grad(lambda_k)/3 for vertex k and
        # -4 grad(lambda_k)/3 for edge k; grad u is affine so that rule is exact
        rhs = np.zeros((sub.n_vertices, columns.size))
        integrals = np.zeros(columns.size)
        for t in omega.triangles:
            rows = np.searchsorted(omega.vertices, mesh.triangles[t])
            edge_cols = omega.vertices.size + np.searchsorted(omega.edges, mesh.tri_edges[t])
            rhs[np.ix_(rows, rows)] += local_stiffness[t] / 3.0
            rhs[np.ix_(rows, edge_cols)] -= 4.0 * local_stiffness[t] / 3.0
            integrals[edge_cols] += mesh.areas[t] / 3.0
        point = np.zeros(sub.n_vertices)
        point[omega.local_vertex(y)] = 1.0
        w = ConstrainedSolver(assemble_stiffness_grad(fe_space(sub, "S1")), mean_row(sub))(point)
        operator[y, columns] = integrals / mesh.areas[omega.triangles].sum() + w @ rhs
    return operator


@dataclass(frozen=True)
class StabilityCheck:
    samples: int
    worst_ratio: float
    worst_triangle: int
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def pi_grad_stability_check(
    mesh: Triangulation,
    report: ConstantsReport | None = None,
    samples: int = 200,
    seed: int | None = None,
    tol: float = 1e-10,
) -> StabilityCheck:
    """Sample |pi u|_T <= C1_Curl |u|_{omega_T} + h_T C2_Curl |grad u|_{omega_T} on every T."""
    seed = settings.seed if seed is None else seed
    if report is None:
        c1_curl, c2_curl = C1_CURL, c2_Curl(mesh)
    else:
        c1_curl, c2_curl = report.C1_Curl, report.C2_Curl
    operator = pi_grad_operator(mesh)
    contacts = mesh.triangle_contacts
    weights = DUNAVANT4.weights * mesh.areas[:, None]
    s1_local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    rng = np.random.default_rng(seed)

    worst, worst_t, violations = 0.0, -1, 0
    for _ in range(samples):
        coeffs = rng.standard_normal(operator.shape[1])
        values, gradients = p2_values(mesh, coeffs, DUNAVANT4.points)
        u_sq = (weights * values**2).sum(axis=1)
        grad_sq = (weights * (gradients**2).sum(axis=2)).sum(axis=1)
        nodal = (operator @ coeffs)[mesh.triangles]
        pi_sq = mesh.areas * np.einsum("ti,ij,tj->t", nodal, s1_local, nodal)
        bound = c1_curl * np.sqrt(contacts @ u_sq) + mesh.h_T * c2_curl * np.sqrt(
            contacts @ grad_sq
        )
        ratio = np.sqrt(pi_sq) / bound
        violations += int((ratio > 1.0 + tol).sum())
        t = int(np.argmax(ratio))
        if ratio[t] > worst:
            worst, worst_t = float(ratio[t]), t
    logger.debug(
        "pi_grad stability sampled",
        extra={"samples": samples, "worst_ratio": worst, "violations": violations},
    )
    return StabilityCheck(samples, worst, worst_t, violations)
