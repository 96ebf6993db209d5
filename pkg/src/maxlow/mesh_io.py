from __future__ import annotations

from pathlib import Path
from typing import Iterator

import numpy as np

from maxlow.errors import MeshError, MeshFormatError
from maxlow.mesh import Triangulation, validate_mesh

MAGIC = "mesh2d v1"


def _content_lines(path: Path) -> Iterator[tuple[int, str]]:
    with path.open("r", encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield number, line


def _parse_numbers(line: str, number: int, count: int, kind: type) -> list:
    tokens = line.split()
    if len(tokens) != count:
        raise MeshFormatError(f"expected {count} values, found {len(tokens)}", number)
    try:
        return [kind(token) for token in tokens]
    except ValueError as exc:
        raise MeshFormatError(f"invalid number in {line!r}", number) from exc


def read_mesh(path: Path | str) -> Triangulation:
    """Read a ``mesh2d v1`` file; edges are always derived from the triangles."""
    path = Path(path)
    lines = _content_lines(path)
    try:
        number, header = next(lines)
    except StopIteration:
        raise MeshFormatError("empty mesh file", 1) from None
    if header != MAGIC:
        raise MeshFormatError(f"expected header {MAGIC!r}, found {header!r}", number)
    try:
        number, counts_line = next(lines)
    except StopIteration:
        raise MeshFormatError("missing counts line", number + 1) from None
    counts_number = number
    n_vertices, n_edges, n_triangles = _parse_numbers(counts_line, number, 3, int)
    if n_vertices < 3 or n_triangles < 1 or n_edges < 0:
        raise MeshFormatError("counts must describe at least one triangle", number)

    vertices = np.empty((n_vertices, 2))
    triangles = np.empty((n_triangles, 3), dtype=np.int64)
    last = number
    for target, width, kind, label in (
        (vertices, 2, float, "vertex"),
        (triangles, 3, int, "triangle"),
    ):
        for row in range(target.shape[0]):
            try:
                last, line = next(lines)
            except StopIteration:
                raise MeshFormatError(
                    f"file ends before {label} {row} of {target.shape[0]}", last + 1
                ) from None
            target[row] = _parse_numbers(line, last, width, kind)
            if label == "triangle":
                missing = [i for i in target[row] if not 0 <= i < n_vertices]
                if missing:
                    raise MeshFormatError(f"triangle refers to missing vertex {missing[0]}", last)
    for last, _ in lines:
        raise MeshFormatError("unexpected trailing content", last)

    mesh = Triangulation(vertices, triangles)
    try:
        validate_mesh(mesh, contractible=False)
    except MeshError as exc:
        raise MeshFormatError(str(exc)) from exc
    if n_edges and n_edges != mesh.n_edges:
        raise MeshFormatError(
            f"header declares {n_edges} edges but the triangles define {mesh.n_edges}",
            counts_number,
        )
    return mesh


def write_mesh(mesh: Triangulation, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [MAGIC, f"{mesh.n_vertices} {mesh.n_edges} {mesh.n_triangles}"]
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in mesh.vertices)
    lines.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
