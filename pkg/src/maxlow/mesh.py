from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from scipy import sparse
from scipy.spatial.distance import pdist

from maxlow.errors import MeshError

logger = logging.getLogger(__name__)

PatchKind = Literal["element", "vertex", "edge"]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Conforming triangle mesh with a fixed orientation convention.

    Local edge ``k`` of a triangle is the edge opposite its local vertex ``k``.
    Every edge is stored as ``(lo, hi)`` with ``lo < hi``; its tangent points from
    ``lo`` to ``hi``. ``tri_edge_signs[t, k]`` is +1 when the counterclockwise
    traversal of triangle ``t`` runs along that tangent.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray = field(init=False, repr=False)
    tri_edges: np.ndarray = field(init=False, repr=False)
    tri_edge_signs: np.ndarray = field(init=False, repr=False)
    edge_triangles: np.ndarray = field(init=False, repr=False)
    edge_counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=float).reshape(-1, 2)
        triangles = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MeshError("triangle references a vertex that does not exist")
        object.__setattr__(self, "vertices", _frozen(vertices))
        object.__setattr__(self, "triangles", _frozen(triangles))

        local = np.stack(
            [triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1
        )
        edges, inverse, counts = np.unique(
            np.sort(local.reshape(-1, 2), axis=1),
            axis=0,
            return_inverse=True,
            return_counts=True,
        )
        tri_edges = np.asarray(inverse).reshape(len(triangles), 3)
        signs = np.where(local[..., 0] < local[..., 1], 1, -1)

        # column 0: triangle left of the tangent, column 1: triangle to its right
        edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
        owners = np.repeat(np.arange(len(triangles)), 3)
        flat_edges = tri_edges.ravel()
        left = signs.ravel() > 0
        edge_triangles[flat_edges[left], 0] = owners[left]
        edge_triangles[flat_edges[~left], 1] = owners[~left]

        object.__setattr__(self, "edges", _frozen(edges.astype(np.int64)))
        object.__setattr__(self, "tri_edges", _frozen(tri_edges.astype(np.int64)))
        object.__setattr__(self, "tri_edge_signs", _frozen(signs.astype(np.int64)))
        object.__setattr__(self, "edge_triangles", _frozen(edge_triangles))
        object.__setattr__(self, "edge_counts", _frozen(counts.astype(np.int64)))

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return _frozen(0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]))

    @cached_property
    def areas(self) -> np.ndarray:
        return _frozen(np.abs(self.signed_areas))

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        diff = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return _frozen(np.hypot(diff[:, 0], diff[:, 1]))

    @cached_property
    def edge_tangents(self) -> np.ndarray:
        diff = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return _frozen(diff / self.edge_lengths[:, None])

    @cached_property
    def h_T(self) -> np.ndarray:
        return _frozen(self.edge_lengths[self.tri_edges].max(axis=1))

    @property
    def h_max(self) -> float:
        return float(self.h_T.max())

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return _frozen(self.edge_counts == 1)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.edges[self.boundary_edges].ravel()] = True
        return _frozen(mask)

    @cached_property
    def interior_edges(self) -> np.ndarray:
        return _frozen(np.flatnonzero(~self.boundary_edges))

    @cached_property
    def interior_vertices(self) -> np.ndarray:
        return _frozen(np.flatnonzero(~self.boundary_vertices))

    @cached_property
    def vertex_triangles(self) -> sparse.csr_matrix:
        """V x T incidence; row ``y`` lists the triangles of the vertex patch."""
        rows = self.triangles.ravel()
        cols = np.repeat(np.arange(self.n_triangles), 3)
        data = np.ones(rows.size, dtype=np.int64)
        return sparse.csr_matrix(
            (data, (rows, cols)), shape=(self.n_vertices, self.n_triangles)
        )

    @cached_property
    def triangle_contacts(self) -> sparse.csr_matrix:
        """T x T pattern of triangles whose closures intersect."""
        vt = self.vertex_triangles
        contact = (vt.T @ vt).tocsr()
        contact.data[:] = 1
        contact.sort_indices()
        return contact

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)


@dataclass(frozen=True, eq=False)
class Patch:
    """Union of triangles around an anchor entity.

    ``vertices``, ``edges`` and ``triangles`` are sorted global indices and act as
    the local-to-global maps of :meth:`submesh`.
    """

    kind: PatchKind
    anchor: int
    triangles: np.ndarray
    vertices: np.ndarray
    edges: np.ndarray
    diameter: float
    mesh: Triangulation = field(repr=False)

    @cached_property
    def _submesh(self) -> Triangulation:
        local = np.searchsorted(self.vertices, self.mesh.triangles[self.triangles])
        return Triangulation(self.mesh.vertices[self.vertices], local)

    def submesh(self) -> Triangulation:
        """The patch as a mesh of its own.

        Vertex order follows global order, so edge tangents and local edge signs
        agree with the parent mesh and local edge ``i`` is ``self.edges[i]``.
        """
        return self._submesh

    def local_vertex(self, vertex: int) -> int:
        index = int(np.searchsorted(self.vertices, vertex))
        if index >= len(self.vertices) or self.vertices[index] != vertex:
            raise MeshError(f"vertex {vertex} is not in the {self.kind} patch {self.anchor}")
        return index

    def local_edge(self, edge: int) -> int:
        index = int(np.searchsorted(self.edges, edge))
        if index >= len(self.edges) or self.edges[index] != edge:
            raise MeshError(f"edge {edge} is not in the {self.kind} patch {self.anchor}")
        return index

    def local_triangle(self, triangle: int) -> int:
        index = int(np.searchsorted(self.triangles, triangle))
        if index >= len(self.triangles) or self.triangles[index] != triangle:
            raise MeshError(
                f"triangle {triangle} is not in the {self.kind} patch {self.anchor}"
            )
        return index


def _unit_square() -> Triangulation:
    vertices = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    return Triangulation(np.array(vertices), np.array([(0, 1, 2), (0, 2, 3)]))


def _lshape() -> Triangulation:
    vertices = [
        (0.0, 0.0),
        (1.0, 0.0),
        (1.0, 1.0),
        (0.0, 1.0),
        (-1.0, 1.0),
        (-1.0, 0.0),
        (-1.0, -1.0),
        (0.0, -1.0),
    ]
    triangles = [(0, 1, 2), (0, 2, 3), (5, 0, 3), (5, 3, 4), (6, 7, 0), (6, 0, 5)]
    return Triangulation(np.array(vertices), np.array(triangles))


def red_refine(mesh: Triangulation) -> Triangulation:
    """Split every triangle into four congruent children through edge midpoints.

    Midpoint of edge ``e`` becomes vertex ``V + e``; the children of triangle ``t``
    are ``4t .. 4t + 3`` with the middle triangle last.
    """
    nv = mesh.n_vertices
    midpoints = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    a, b, c = mesh.triangles.T
    m0, m1, m2 = (nv + mesh.tri_edges).T
    children = np.stack(
        [
            np.column_stack([a, m2, m1]),
            np.column_stack([m2, b, m0]),
            np.column_stack([m1, m0, c]),
            np.column_stack([m0, m1, m2]),
        ],
        axis=1,
    ).reshape(-1, 3)
    return Triangulation(np.vstack([mesh.vertices, midpoints]), children)


def refine(mesh: Triangulation, times: int) -> Triangulation:
    if times < 0:
        raise MeshError("refinement count must be non-negative")
    for _ in range(times):
        mesh = red_refine(mesh)
    return mesh


def generate_square(levels: int) -> Triangulation:
    """Unit square split along the (0,0)-(1,1) diagonal, red-refined ``levels`` times."""
    return refine(_unit_square(), levels)


def generate_lshape(levels: int) -> Triangulation:
    """(-1,1)^2 minus [0,1]x[-1,0], three unit squares with two triangles each."""
    return refine(_lshape(), levels)


def validate_mesh(mesh: Triangulation, contractible: bool = True) -> None:
    if mesh.n_triangles == 0:
        raise MeshError("mesh has no triangles")
    bad = np.flatnonzero(mesh.signed_areas <= 0)
    if bad.size:
        raise MeshError(f"triangle {int(bad[0])} is not counterclockwise or degenerate")
    crowded = np.flatnonzero(mesh.edge_counts > 2)
    if crowded.size:
        lo, hi = mesh.edges[crowded[0]]
        raise MeshError(f"edge ({lo}, {hi}) is shared by more than two triangles")
    interior = mesh.edge_counts == 2
    if np.any(mesh.edge_triangles[interior] < 0):
        raise MeshError("neighbouring triangles have inconsistent orientation")
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.triangles.ravel()] = True
    if not used.all():
        raise MeshError(f"vertex {int(np.flatnonzero(~used)[0])} belongs to no triangle")
    if contractible:
        euler = mesh.n_vertices - mesh.n_edges + mesh.n_triangles
        if euler != 1:
            raise MeshError(f"Euler characteristic is {euler}, expected 1")


def patch(mesh: Triangulation, kind: PatchKind, anchor: int) -> Patch:
    """Element patch, vertex patch or extended edge patch around ``anchor``."""
    anchor = int(anchor)
    if kind == "element":
        if not 0 <= anchor < mesh.n_triangles:
            raise MeshError(f"triangle {anchor} does not exist")
        contacts = mesh.triangle_contacts
        members = contacts.indices[contacts.indptr[anchor] : contacts.indptr[anchor + 1]]
    elif kind == "vertex":
        if not 0 <= anchor < mesh.n_vertices:
            raise MeshError(f"vertex {anchor} does not exist")
        members = mesh.vertex_triangles[anchor].indices
    elif kind == "edge":
        if not 0 <= anchor < mesh.n_edges:
            raise MeshError(f"edge {anchor} does not exist")
        members = np.union1d(
            mesh.vertex_triangles[mesh.edges[anchor, 0]].indices,
            mesh.vertex_triangles[mesh.edges[anchor, 1]].indices,
        )
    else:
        raise MeshError(f"unknown patch kind {kind!r}")
    triangles = np.unique(members).astype(np.int64)
    vertices = np.unique(mesh.triangles[triangles])
    edges = np.unique(mesh.tri_edges[triangles])
    diameter = float(pdist(mesh.vertices[vertices]).max()) if len(vertices) > 1 else 0.0
    return Patch(
        kind=kind,
        anchor=anchor,
        triangles=_frozen(triangles),
        vertices=_frozen(vertices),
        edges=_frozen(edges),
        diameter=diameter,
        mesh=mesh,
    )


def overlap_constant(mesh: Triangulation) -> int:
    """max over T of the number of element patches whose closure contains T."""
    counts = np.diff(mesh.triangle_contacts.indptr)
    return int(counts.max())


def scaled(mesh: Triangulation, factor: float) -> Triangulation:
    return Triangulation(mesh.vertices * factor, mesh.triangles)


def permuted(mesh: Triangulation, seed: int = 0) -> Triangulation:
    """Same mesh with shuffled vertex and triangle numbering.

    Each triangle's vertices are rotated cyclically so orientation is kept.
    """
    rng = np.random.default_rng(seed)
    vertex_perm = rng.permutation(mesh.n_vertices)
    new_index = np.empty_like(vertex_perm)
    new_index[vertex_perm] = np.arange(mesh.n_vertices)
    triangles = new_index[mesh.triangles[rng.permutation(mesh.n_triangles)]]
    shifts = rng.integers(0, 3, size=len(triangles))
    rows = np.arange(len(triangles))[:, None]
    cols = (np.arange(3)[None, :] + shifts[:, None]) % 3
    return Triangulation(mesh.vertices[vertex_perm], triangles[rows, cols])


def similarity_key(
    submesh: Triangulation, marks: tuple[tuple[int, ...], ...] = (), decimals: int = 8
) -> tuple:
    """Hashable form of a mesh up to rigid motion, reflection and uniform scaling.

    ``marks`` are tuples of local vertex indices (an anchor vertex, the vertices
    of an anchor triangle, the ordered endpoints of an anchor edge); they are
    carried through the canonicalization so marked patches only match when the
    marked entities correspond.
    """
    points = submesh.vertices - submesh.vertices.mean(axis=0)
    radius = np.hypot(points[:, 0], points[:, 1])
    scale = float(radius.max())
    if scale == 0.0:
        raise MeshError("cannot normalize a patch without extent")
    points = points / scale
    radius = radius / scale
    candidates = np.flatnonzero(radius > 1.0 - 10.0 ** (-decimals + 2))

    best: tuple | None = None
    for index in candidates:
        direction = points[index] / radius[index]
        rotation = np.array([[direction[0], direction[1]], [-direction[1], direction[0]]])
        base = points @ rotation.T
        for flip in (1.0, -1.0):
            coords = np.round(base * np.array([1.0, flip]), decimals) + 0.0
            order = np.lexsort((coords[:, 1], coords[:, 0]))
            rank = np.empty_like(order)
            rank[order] = np.arange(len(order))
            encoded = (
                tuple(map(tuple, coords[order].tolist())),
                tuple(sorted(tuple(sorted(rank[tri].tolist())) for tri in submesh.triangles)),
                tuple(tuple(rank[list(mark)].tolist()) for mark in marks),
            )
            if best is None or encoded < best:
                best = encoded
    return best
