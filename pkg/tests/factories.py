from __future__ import annotations

from pathlib import Path

import numpy as np

from maxlow.mesh import Triangulation
from maxlow.mesh_io import write_mesh


def create_triangle(
    *, corners: tuple[tuple[float, float], ...] = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))
) -> Triangulation:
    return Triangulation(np.array(corners), np.array([(0, 1, 2)]))


def create_equilateral_triangle(*, side: float = 1.0) -> Triangulation:
    return create_triangle(
        corners=((0.0, 0.0), (side, 0.0), (0.5 * side, 0.5 * np.sqrt(3.0) * side))
    )


def create_grid_mesh(
    *, n: int = 3, alternate: bool = False, width: float = 1.0
) -> Triangulation:
    """n x n squares of [0, width]^2, each split along a diagonal."""
    xs = np.linspace(0.0, width, n + 1)
    vertices = np.array([(x, y) for y in xs for x in xs])
    triangles = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            b, c, d = a + 1, a + n + 2, a + n + 1
            if alternate and (i + j) % 2:
                triangles += [(a, b, d), (b, c, d)]
            else:
                triangles += [(a, b, c), (a, c, d)]
    return Triangulation(vertices, np.array(triangles))


def create_jittered_mesh(*, n: int = 4, amplitude: float = 0.06, seed: int = 7) -> Triangulation:
    """Alternating-diagonal grid with interior vertices moved by a seeded jitter."""
    grid = create_grid_mesh(n=n, alternate=True)
    vertices = grid.vertices.copy()
    interior = grid.interior_vertices
    rng = np.random.default_rng(seed)
    vertices[interior] += rng.uniform(-amplitude, amplitude, size=(interior.size, 2))
    return Triangulation(vertices, grid.triangles)


def create_annulus_mesh() -> Triangulation:
    """Square frame around a square hole; Euler characteristic zero."""
    outer = [(0.0, 0.0), (3.0, 0.0), (3.0, 3.0), (0.0, 3.0)]
    inner = [(1.0, 1.0), (2.0, 1.0), (2.0, 2.0), (1.0, 2.0)]
    triangles = []
    for k in range(4):
        o0, o1 = k, (k + 1) % 4
        i0, i1 = 4 + k, 4 + (k + 1) % 4
        triangles += [(o0, o1, i1), (o0, i1, i0)]
    return Triangulation(np.array(outer + inner), np.array(triangles))


def write_mesh_file(tmp_path: Path, mesh: Triangulation, name: str = "mesh.m2d") -> Path:
    path = tmp_path / name
    write_mesh(mesh, path)
    return path
