"""Conforming triangular meshes of 2D polygonal domains.

A :class:`Mesh` stores vertices, positively oriented triangles and an ordered
list of boundary edges (counterclockwise per loop) with lengths and outward
unit normals.  Meshes are immutable after construction and safe to share
across threads.

The plain-text exchange format is::

    robinmesh 1
    V <count>
    x y            (one vertex per line)
    T <count>
    i j k          (0-based, positive orientation)
    B <count>
    i j            (boundary edges, counterclockwise)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshFormatError, NonManifoldError, OrientationError


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation with explicit boundary-edge structure.

    Attributes
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array, positively oriented
    edges : (E, 2) int array
        Boundary edges ordered counterclockwise per loop.
    edge_lengths : (E,) float array
    edge_normals : (E, 2) float array, outward unit normals
    edge_owner : (E,) int array, owning-triangle index of each boundary edge
    edge_arclength : (E,) float array, arclength of each edge start point
    boundary_vertices : (B,) int array, sorted
    is_boundary : (V,) bool array
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_lengths: np.ndarray
    edge_normals: np.ndarray
    edge_owner: np.ndarray
    edge_arclength: np.ndarray
    boundary_vertices: np.ndarray
    is_boundary: np.ndarray
    triangle_areas: np.ndarray = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    @property
    def area(self) -> float:
        return float(self.triangle_areas.sum())

    @property
    def max_edge_length(self) -> float:
        return float(self.edge_lengths.max())

    def boundary_loop_area(self) -> float:
        """Shoelace area of the boundary loops (CCW positive)."""
        p = self.vertices[self.edges[:, 0]]
        q = self.vertices[self.edges[:, 1]]
        return float(0.5 * np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))

    def serialize(self) -> str:
        lines = ["robinmesh 1", f"V {self.n_vertices}"]
        lines += [f"{x:.17g} {y:.17g}" for x, y in self.vertices]
        lines.append(f"T {self.n_triangles}")
        lines += [f"{a} {b} {c}" for a, b, c in self.triangles]
        lines.append(f"B {self.n_edges}")
        lines += [f"{a} {b}" for a, b in self.edges]
        return "\n".join(lines) + "\n"


def _signed_areas(vertices, triangles):
    p = vertices[triangles]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


def from_arrays(vertices, triangles, boundary_edges) -> Mesh:
    """Build and validate a mesh from raw arrays.

    ``boundary_edges`` must list every edge owned by exactly one triangle, in
    the triangle's own (counterclockwise) direction, ordered along each loop.
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshFormatError("vertices must be an (V, 2) array")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshFormatError("triangles must be an (T, 3) array")
    nv = vertices.shape[0]
    if triangles.size and (triangles.min() < 0 or triangles.max() >= nv):
        raise MeshFormatError("triangle vertex index out of range")

    areas = _signed_areas(vertices, triangles)
    bad = np.flatnonzero(areas <= 0.0)
    if bad.size:
        raise OrientationError(
            f"triangle {bad[0]} has non-positive signed area {areas[bad[0]]:g}"
        )

    # Count owners of every undirected edge and remember the directed owner.
    owner = {}
    count = {}
    for t, (a, b, c) in enumerate(triangles):
        for i, j in ((a, b), (b, c), (c, a)):
            key = (min(i, j), max(i, j))
            count[key] = count.get(key, 0) + 1
            if count[key] > 2:
                raise NonManifoldError(f"edge {key} is shared by more than two triangles")
            owner[(i, j)] = t

    declared = set()
    for i, j in boundary_edges:
        key = (min(i, j), max(i, j))
        if key in declared:
            raise MeshFormatError(f"boundary edge {key} declared twice")
        declared.add(key)
        if key not in count:
            raise MeshFormatError(f"declared boundary edge {key} is not a mesh edge")
        if count[key] == 2:
            raise NonManifoldError(f"declared boundary edge {key} is shared by two triangles")
        if (int(i), int(j)) not in owner:
            raise OrientationError(
                f"boundary edge ({i}, {j}) is oriented against its owning triangle"
            )
    derived = {k for k, c in count.items() if c == 1}
    if derived != declared:
        missing = sorted(derived - declared)
        raise MeshFormatError(f"boundary edges missing from declaration: {missing[:5]}")

    # Each boundary vertex must have one incoming and one outgoing edge.
    out_deg = {}
    in_deg = {}
    for i, j in boundary_edges:
        out_deg[int(i)] = out_deg.get(int(i), 0) + 1
        in_deg[int(j)] = in_deg.get(int(j), 0) + 1
        if out_deg[int(i)] > 1 or in_deg[int(j)] > 1:
            raise MeshFormatError("boundary edges do not form simple closed loops")
    if set(out_deg) != set(in_deg):
        raise MeshFormatError("boundary edges do not form closed loops")

    p = vertices[boundary_edges[:, 0]]
    q = vertices[boundary_edges[:, 1]]
    tang = q - p
    lengths = np.hypot(tang[:, 0], tang[:, 1])
    if np.any(lengths <= 0.0):
        raise MeshFormatError("zero-length boundary edge")
    normals = np.column_stack([tang[:, 1], -tang[:, 0]]) / lengths[:, None]
    edge_owner = np.array(
        [owner[(int(i), int(j))] for i, j in boundary_edges], dtype=np.int64
    )

    # Outward check: the owning triangle's centroid lies on the inner side.
    centroids = vertices[triangles[edge_owner]].mean(axis=1)
    mid = 0.5 * (p + q)
    if np.any(np.einsum("ij,ij->i", normals, centroids - mid) >= 0.0):
        raise MeshFormatError("boundary edge normal does not point outward")

    shoelace = float(
        0.5 * np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1])
    )
    total = float(areas.sum())
    if abs(shoelace - total) > 1e-12 * max(1.0, abs(total)):
        raise MeshFormatError(
            f"boundary loop area {shoelace:.17g} != triangle area {total:.17g}"
        )

    arclength = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    boundary_vertices = np.unique(boundary_edges)
    is_boundary = np.zeros(nv, dtype=bool)
    is_boundary[boundary_vertices] = True

    for arr in (vertices, triangles, boundary_edges, lengths, normals,
                edge_owner, arclength, boundary_vertices, is_boundary, areas):
        arr.setflags(write=False)
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        edges=boundary_edges,
        edge_lengths=lengths,
        edge_normals=normals,
        edge_owner=edge_owner,
        edge_arclength=arclength,
        boundary_vertices=boundary_vertices,
        is_boundary=is_boundary,
        triangle_areas=areas,
    )


def generate_square(n: int) -> Mesh:
    """Structured triangulation of the unit square with n x n cells."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    xs = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(xs, xs)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    edges = []
    edges += [(vid(i, 0), vid(i + 1, 0)) for i in range(n)]
    edges += [(vid(n, j), vid(n, j + 1)) for j in range(n)]
    edges += [(vid(n - i, n), vid(n - i - 1, n)) for i in range(n)]
    edges += [(vid(0, n - j), vid(0, n - j - 1)) for j in range(n)]
    return from_arrays(vertices, np.array(tris), np.array(edges))


def generate_disk(n_boundary: int, n_rings: int) -> Mesh:
    """Polygonal approximation of the unit disk.

    Concentric rings of ``n_boundary`` vertices each, fan triangulation at
    the center; the boundary is the regular n_boundary-gon inscribed in the
    unit circle.
    """
    if n_boundary < 3:
        raise ValueError("n_boundary must be at least 3")
    if n_rings < 1:
        raise ValueError("n_rings must be a positive integer")
    nb, nr = n_boundary, n_rings
    theta = 2.0 * np.pi * np.arange(nb) / nb
    verts = [np.zeros((1, 2))]
    for j in range(1, nr + 1):
        r = j / nr
        verts.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
    vertices = np.vstack(verts)

    def vid(j, i):
        return 1 + (j - 1) * nb + (i % nb)

    tris = []
    for i in range(nb):
        tris.append((0, vid(1, i), vid(1, i + 1)))
    for j in range(1, nr):
        for i in range(nb):
            a, b = vid(j, i), vid(j + 1, i)
            c, d = vid(j + 1, i + 1), vid(j, i + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    edges = [(vid(nr, i), vid(nr, i + 1)) for i in range(nb)]
    return from_arrays(vertices, np.array(tris), np.array(edges))


def load_mesh(text: str) -> Mesh:
    """Parse the plain-text mesh format and validate all invariants."""
    lines = text.splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines):
            pos += 1
            stripped = lines[pos - 1].strip()
            if stripped:
                return stripped, pos
        raise MeshFormatError("unexpected end of file", line=len(lines))

    header, ln = next_line()
    if header != "robinmesh 1":
        raise MeshFormatError(f"expected 'robinmesh 1' header, got {header!r}", line=ln)

    def read_count(tag):
        text_line, ln = next_line()
        parts = text_line.split()
        if len(parts) != 2 or parts[0] != tag:
            raise MeshFormatError(f"expected '{tag} <count>', got {text_line!r}", line=ln)
        try:
            n = int(parts[1])
        except ValueError:
            raise MeshFormatError(f"bad count {parts[1]!r}", line=ln) from None
        if n < 0:
            raise MeshFormatError(f"negative count {n}", line=ln)
        return n

    def read_rows(count, width, conv, what):
        rows = np.empty((count, width), dtype=float if conv is float else np.int64)
        for k in range(count):
            text_line, ln = next_line()
            parts = text_line.split()
            if len(parts) != width:
                raise MeshFormatError(
                    f"expected {width} fields for {what}, got {len(parts)}", line=ln
                )
            try:
                rows[k] = [conv(p) for p in parts]
            except ValueError:
                raise MeshFormatError(f"bad {what} entry {text_line!r}", line=ln) from None
        return rows

    nv = read_count("V")
    vertices = read_rows(nv, 2, float, "vertex")
    nt = read_count("T")
    triangles = read_rows(nt, 3, int, "triangle")
    ne = read_count("B")
    edges = read_rows(ne, 2, int, "boundary edge")
    return from_arrays(vertices, triangles, edges)
