from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import sparse

from maxlow.errors import MeshError
from maxlow.mesh import Triangulation

Family = Literal[
    "S1", "S1_zero", "CR", "N0", "N0_tangential_zero", "RT0", "RT0_normal_zero", "P0vec"
]

_BASE_FAMILY: dict[str, str] = {
    "S1": "S1",
    "S1_zero": "S1",
    "CR": "CR",
    "N0": "N0",
    "N0_tangential_zero": "N0",
    "RT0": "RT0",
    "RT0_normal_zero": "RT0",
    "P0vec": "P0vec",
}


@dataclass(frozen=True)
class QuadratureRule:
    name: str
    points: np.ndarray
    weights: np.ndarray
    degree: int


def _dunavant4() -> QuadratureRule:
    a, wa = 0.44594849091596488632, 0.22338158967801146570
    b, wb = 0.091576213509770743460, 0.10995174365532186764
    points = np.array(
        [
            [1 - 2 * a, a, a],
            [a, 1 - 2 * a, a],
            [a, a, 1 - 2 * a],
            [1 - 2 * b, b, b],
            [b, 1 - 2 * b, b],
            [b, b, 1 - 2 * b],
        ]
    )
    weights = np.array([wa, wa, wa, wb, wb, wb])
    return QuadratureRule("dunavant4", points, weights / weights.sum(), 4)


EDGE_MIDPOINT = QuadratureRule(
    "edge_midpoint",
    np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]),
    np.full(3, 1.0 / 3.0),
    2,
)
DUNAVANT4 = _dunavant4()
CENTROID = QuadratureRule("centroid", np.full((1, 3), 1.0 / 3.0), np.ones(1), 1)


@dataclass(frozen=True, eq=False)
class FeSpace:
    """A finite element family on a mesh.

    ``dofs`` lists the indices of the unconstrained family that survive the
    boundary condition; restricted matrices are slices of full-family ones.
    """

    family: Family
    mesh: Triangulation = field(repr=False)
    dofs: np.ndarray = field(repr=False)
    n_full: int

    @property
    def base(self) -> str:
        return _BASE_FAMILY[self.family]

    @property
    def n_dofs(self) -> int:
        return int(self.dofs.size)

    @property
    def entity_to_dof(self) -> np.ndarray:
        """Full-family index to dof index, -1 where the boundary condition removes it."""
        mapping = np.full(self.n_full, -1, dtype=np.int64)
        mapping[self.dofs] = np.arange(self.dofs.size)
        return mapping

    @property
    def boundary_mask(self) -> np.ndarray:
        if self.base == "S1":
            return self.mesh.boundary_vertices.copy()
        if self.base == "P0vec":
            return np.zeros(self.n_full, dtype=bool)
        return self.mesh.boundary_edges.copy()


def fe_space(mesh: Triangulation, family: Family) -> FeSpace:
    if family not in _BASE_FAMILY:
        raise ValueError(f"unknown finite element family {family!r}")
    if family == "S1":
        dofs = np.arange(mesh.n_vertices)
    elif family == "S1_zero":
        dofs = mesh.interior_vertices
    elif family in ("CR", "N0", "RT0"):
        dofs = np.arange(mesh.n_edges)
    elif family in ("N0_tangential_zero", "RT0_normal_zero"):
        dofs = mesh.interior_edges
    else:
        dofs = np.arange(2 * mesh.n_triangles)
    base = _BASE_FAMILY[family]
    n_full = {
        "S1": mesh.n_vertices,
        "CR": mesh.n_edges,
        "N0": mesh.n_edges,
        "RT0": mesh.n_edges,
        "P0vec": 2 * mesh.n_triangles,
    }[base]
    return FeSpace(family=family, mesh=mesh, dofs=np.asarray(dofs, dtype=np.int64), n_full=n_full)


def _gradients_from_corners(p: np.ndarray) -> np.ndarray:
    opposite = np.roll(p, -2, axis=-2) - np.roll(p, -1, axis=-2)
    rotated = np.stack([-opposite[..., 1], opposite[..., 0]], axis=-1)
    d1 = p[..., 1, :] - p[..., 0, :]
    d2 = p[..., 2, :] - p[..., 0, :]
    signed_area = 0.5 * (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0])
    return rotated / (2.0 * signed_area[..., None, None])


def barycentric_gradients(mesh: Triangulation) -> np.ndarray:
    """(T, 3, 2) array of the constant gradients of the barycentric coordinates."""
    return _gradients_from_corners(mesh.vertices[mesh.triangles])


def barycentric_coordinates(
    mesh: Triangulation, triangles: np.ndarray, points: np.ndarray
) -> np.ndarray:
    grads = barycentric_gradients(mesh)[triangles]
    centroids = mesh.centroids()[triangles]
    return 1.0 / 3.0 + np.einsum("nkc,nc->nk", grads, points - centroids)


def _local_dofs(mesh: Triangulation, base: str) -> np.ndarray:
    if base == "S1":
        return mesh.triangles
    if base == "P0vec":
        t = np.arange(mesh.n_triangles)
        return np.column_stack([2 * t, 2 * t + 1])
    return mesh.tri_edges


def _basis_values(mesh: Triangulation, base: str, bary: np.ndarray) -> np.ndarray:
    """Basis values at barycentric points, shape (T, q, n_local, n_components).

    ``bary`` is (q, 3) for a reference rule or (T, q, 3) per triangle. Edge
    bases carry the global orientation sign.
    """
    n_t = mesh.n_triangles
    if bary.ndim == 2:
        bary = np.broadcast_to(bary, (n_t,) + bary.shape)
    if base == "S1":
        return bary[..., None]
    if base == "CR":
        return (1.0 - 2.0 * bary)[..., None]
    if base == "P0vec":
        eye = np.broadcast_to(np.eye(2), (n_t, bary.shape[1], 2, 2))
        return eye
    grads = barycentric_gradients(mesh)
    nxt = [1, 2, 0]
    prv = [2, 0, 1]
    lam_a = bary[..., nxt]
    lam_b = bary[..., prv]
    grad_a = grads[:, nxt, :][:, None]
    grad_b = grads[:, prv, :][:, None]
    whitney = lam_a[..., None] * grad_b - lam_b[..., None] * grad_a
    whitney = whitney * mesh.tri_edge_signs[:, None, :, None]
    if base == "RT0":
        return np.stack([whitney[..., 1], -whitney[..., 0]], axis=-1)
    return whitney


def _rot_values(mesh: Triangulation) -> np.ndarray:
    """(T, 3) constant rot of the edge basis; equals div of the RT0 basis."""
    return mesh.tri_edge_signs / mesh.areas[:, None]


def _assemble_symmetric(local_dofs: np.ndarray, local: np.ndarray, n: int) -> sparse.csr_matrix:
    """Scatter symmetric local matrices keeping only the upper triangle, then mirror."""
    rows = np.broadcast_to(local_dofs[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(local_dofs[:, None, :], local.shape).ravel()
    values = local.ravel()
    keep = rows <= cols
    upper = sparse.coo_matrix((values[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    upper.sum_duplicates()
    return (upper + sparse.triu(upper, k=1).T).tocsr()


def _assemble_general(
    row_dofs: np.ndarray, col_dofs: np.ndarray, local: np.ndarray, shape: tuple[int, int]
) -> sparse.csr_matrix:
    rows = np.broadcast_to(row_dofs[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(col_dofs[:, None, :], local.shape).ravel()
    matrix = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()
    matrix.sum_duplicates()
    return matrix


def restrict(
    matrix: sparse.spmatrix, rows: FeSpace | None, cols: FeSpace | None
) -> sparse.csr_matrix:
    """Sub-block of a full-family matrix on the dofs of constrained spaces."""
    result = sparse.csr_matrix(matrix)
    if rows is not None:
        result = result[rows.dofs]
    if cols is not None:
        result = result[:, cols.dofs]
    return result.tocsr()


def assemble_mass(space: FeSpace, rule: QuadratureRule = EDGE_MIDPOINT) -> sparse.csr_matrix:
    mesh = space.mesh
    if space.base == "P0vec":
        full = sparse.diags(np.repeat(mesh.areas, 2)).tocsr()
        return restrict(full, space, space)
    values = _basis_values(mesh, space.base, rule.points)
    local = np.einsum("q,tqic,tqjc->tij", rule.weights, values, values)
    local *= mesh.areas[:, None, None]
    full = _assemble_symmetric(_local_dofs(mesh, space.base), local, space.n_full)
    return restrict(full, space, space)


def assemble_stiffness_grad(space: FeSpace) -> sparse.csr_matrix:
    if space.base not in ("S1", "CR"):
        raise ValueError(f"gradient stiffness needs a scalar family, got {space.family}")
    mesh = space.mesh
    grads = barycentric_gradients(mesh)
    factor = 4.0 if space.base == "CR" else 1.0
    local = factor * mesh.areas[:, None, None] * np.einsum("tic,tjc->tij", grads, grads)
    full = _assemble_symmetric(_local_dofs(mesh, space.base), local, space.n_full)
    return restrict(full, space, space)


def assemble_rotrot(space: FeSpace) -> sparse.csr_matrix:
    """(rot u, rot v) on edge elements, (div u, div v) on Raviart-Thomas."""
    if space.base not in ("N0", "RT0"):
        raise ValueError(f"rot-rot needs an edge element family, got {space.family}")
    mesh = space.mesh
    rot = _rot_values(mesh)
    local = mesh.areas[:, None, None] * rot[:, :, None] * rot[:, None, :]
    full = _assemble_symmetric(mesh.tri_edges, local, space.n_full)
    return restrict(full, space, space)


def discrete_gradient(mesh: Triangulation) -> sparse.csr_matrix:
    """E x V incidence with grad(lambda_v) = sum_E G[E, v] psi_E."""
    n_e = mesh.n_edges
    rows = np.repeat(np.arange(n_e), 2)
    cols = mesh.edges.ravel()
    data = np.tile([-1.0, 1.0], n_e)
    return sparse.csr_matrix((data, (rows, cols)), shape=(n_e, mesh.n_vertices))


def assemble_grad_coupling(s1z: FeSpace, n0d: FeSpace) -> sparse.csr_matrix:
    """F[v, E] = (grad lambda_v, psi_E), rows on ``s1z`` and columns on ``n0d``."""
    n0 = fe_space(n0d.mesh, "N0")
    gradient = restrict(discrete_gradient(n0d.mesh), n0d, s1z)
    return (gradient.T @ restrict(assemble_mass(n0), n0d, n0d)).tocsr()


def assemble_curl_coupling(s1: FeSpace, p0: FeSpace) -> sparse.csr_matrix:
    """G[2t + c, v] = int_T (Curl lambda_v)_c with Curl = (-d2, d1)."""
    mesh = s1.mesh
    grads = barycentric_gradients(mesh)
    curl = np.stack([-grads[..., 1], grads[..., 0]], axis=-1) * mesh.areas[:, None, None]
    local = np.transpose(curl, (0, 2, 1))
    full = _assemble_general(
        _local_dofs(mesh, "P0vec"),
        mesh.triangles,
        local,
        (2 * mesh.n_triangles, mesh.n_vertices),
    )
    return restrict(full, p0, s1)


def assemble_normal_jump(p0: FeSpace) -> sparse.csr_matrix:
    """One row per interior edge: |E| n_E . (y_left - y_right), n_E = R_cw t_E.

    The kernel is the space of piecewise constant fields with continuous normal
    component.
    """
    mesh = p0.mesh
    interior = mesh.interior_edges
    lo, hi = mesh.edges[interior].T
    diff = mesh.vertices[hi] - mesh.vertices[lo]
    scaled_normal = np.column_stack([diff[:, 1], -diff[:, 0]])
    left, right = mesh.edge_triangles[interior].T
    n_i = interior.size
    rows = np.repeat(np.arange(n_i), 4)
    cols = np.column_stack([2 * left, 2 * left + 1, 2 * right, 2 * right + 1]).ravel()
    data = np.column_stack([scaled_normal, -scaled_normal]).ravel()
    full = sparse.csr_matrix((data, (rows, cols)), shape=(n_i, 2 * mesh.n_triangles))
    return restrict(full, None, p0)


def assemble_load(n0: FeSpace, p0: FeSpace) -> sparse.csr_matrix:
    """B[E, 2t + c] = int_T (psi_E)_c."""
    mesh = n0.mesh
    values = _basis_values(mesh, "N0", CENTROID.points)[:, 0]
    local = values * mesh.areas[:, None, None]
    full = _assemble_general(
        mesh.tri_edges, _local_dofs(mesh, "P0vec"), local, (mesh.n_edges, 2 * mesh.n_triangles)
    )
    return restrict(full, n0, p0)


def assemble_cross_mass(
    n0: FeSpace, rt0: FeSpace, rule: QuadratureRule = EDGE_MIDPOINT
) -> sparse.csr_matrix:
    """(psi_i, phi_j) between edge elements and Raviart-Thomas functions."""
    mesh = n0.mesh
    psi = _basis_values(mesh, "N0", rule.points)
    phi = _basis_values(mesh, "RT0", rule.points)
    local = np.einsum("q,tqic,tqjc->tij", rule.weights, psi, phi) * mesh.areas[:, None, None]
    full = _assemble_general(mesh.tri_edges, mesh.tri_edges, local, (mesh.n_edges, mesh.n_edges))
    return restrict(full, n0, rt0)


@dataclass(frozen=True)
class BasisNorms:
    psi_E: float | None = None
    lambda_y: float | None = None
    grad_lambda_y: float | None = None


def basis_norms(
    mesh: Triangulation, triangle: int, *, edge: int | None = None, vertex: int | None = None
) -> BasisNorms:
    """L2(T) norms of the basis functions attached to ``edge`` and ``vertex``."""
    psi_norm = lam_norm = grad_norm = None
    area = float(mesh.areas[triangle])
    grads = _gradients_from_corners(mesh.vertices[mesh.triangles[triangle]])
    if edge is not None:
        local = np.flatnonzero(mesh.tri_edges[triangle] == edge)
        if local.size == 0:
            raise MeshError(f"edge {edge} is not an edge of triangle {triangle}")
        values = local_whitney_values(mesh, triangle, EDGE_MIDPOINT.points)[:, int(local[0])]
        psi_norm = float(np.sqrt(area * EDGE_MIDPOINT.weights @ (values**2).sum(axis=1)))
    if vertex is not None:
        local = np.flatnonzero(mesh.triangles[triangle] == vertex)
        if local.size == 0:
            raise MeshError(f"vertex {vertex} is not a vertex of triangle {triangle}")
        grad = grads[int(local[0])]
        lam_norm = float(np.sqrt(area / 6.0))
        grad_norm = float(np.sqrt(area) * np.hypot(grad[0], grad[1]))
    return BasisNorms(psi_E=psi_norm, lambda_y=lam_norm, grad_lambda_y=grad_norm)


def local_whitney_values(mesh: Triangulation, triangle: int, bary: np.ndarray) -> np.ndarray:
    """(q, 3, 2) signed edge basis values of one triangle at barycentric points."""
    bary = np.asarray(bary, dtype=float)
    grads = _gradients_from_corners(mesh.vertices[mesh.triangles[triangle]])
    nxt = [1, 2, 0]
    prv = [2, 0, 1]
    whitney = bary[:, nxt, None] * grads[prv] - bary[:, prv, None] * grads[nxt]
    return whitney * mesh.tri_edge_signs[triangle][None, :, None]


def rot_values(mesh: Triangulation, coeffs: np.ndarray) -> np.ndarray:
    """Piecewise constant rot of an edge element field given by full-family coefficients."""
    return (_rot_values(mesh) * coeffs[mesh.tri_edges]).sum(axis=1)


def evaluate_n0(
    mesh: Triangulation, coeffs: np.ndarray, triangles: np.ndarray, points: np.ndarray
) -> np.ndarray:
    """Edge element field at ``points``, each located in the matching triangle."""
    triangles = np.asarray(triangles)
    bary = barycentric_coordinates(mesh, triangles, points)
    grads = barycentric_gradients(mesh)[triangles]
    nxt = [1, 2, 0]
    prv = [2, 0, 1]
    whitney = bary[:, nxt, None] * grads[:, prv] - bary[:, prv, None] * grads[:, nxt]
    whitney *= mesh.tri_edge_signs[triangles][..., None]
    return np.einsum("nkc,nk->nc", whitney, coeffs[mesh.tri_edges[triangles]])


def evaluate_s1(
    mesh: Triangulation, coeffs: np.ndarray, triangles: np.ndarray, points: np.ndarray
) -> np.ndarray:
    triangles = np.asarray(triangles)
    bary = barycentric_coordinates(mesh, triangles, points)
    return (bary * coeffs[mesh.triangles[triangles]]).sum(axis=1)


def prolong_s1(coarse: Triangulation, coeffs: np.ndarray) -> np.ndarray:
    """Nodal values on ``red_refine(coarse)`` of a continuous P1 function."""
    midpoints = 0.5 * (coeffs[coarse.edges[:, 0]] + coeffs[coarse.edges[:, 1]])
    return np.concatenate([coeffs, midpoints])


def prolong_n0(coarse: Triangulation, fine: Triangulation, coeffs: np.ndarray) -> np.ndarray:
    """Edge moments on ``fine = red_refine(coarse)`` of a coarse edge element field.

    The tangential component of a lowest-order edge field is constant along any
    segment inside a triangle, so the moment is the midpoint value times the
    edge vector.
    """
    left, right = fine.edge_triangles.T
    owner = np.where(left >= 0, left, right)
    parents = owner // 4
    lo, hi = fine.edges.T
    midpoints = 0.5 * (fine.vertices[lo] + fine.vertices[hi])
    values = evaluate_n0(coarse, coeffs, parents, midpoints)
    return np.einsum("nc,nc->n", values, fine.vertices[hi] - fine.vertices[lo])


def interpolate_n0(
    mesh: Triangulation, field_at: Callable[[np.ndarray], np.ndarray]
) -> np.ndarray:
    """Edge moments of a field that is affine along every edge (midpoint rule)."""
    lo, hi = mesh.edges.T
    midpoints = 0.5 * (mesh.vertices[lo] + mesh.vertices[hi])
    return np.einsum("nc,nc->n", field_at(midpoints), mesh.vertices[hi] - mesh.vertices[lo])
