import numpy as np
import pytest

import robinopt as ro
from robinopt.errors import MeshFormatError, NonManifoldError, OrientationError


@pytest.mark.parametrize(
    "n,nv,nt,ne",
    [(1, 4, 2, 4), (2, 9, 8, 8), (16, 289, 512, 64)],
)
def test_square_counts(n, nv, nt, ne):
    m = ro.generate_square(n)
    assert m.n_vertices == nv
    assert m.n_triangles == nt
    assert m.n_edges == ne
    assert m.perimeter == pytest.approx(4.0, abs=1e-14)
    assert abs(m.area - 1.0) <= 1e-12
    assert np.allclose(m.edge_lengths, 1.0 / n)


def test_square_rejects_zero():
    with pytest.raises(ValueError):
        ro.generate_square(0)


def test_disk_fan():
    m = ro.generate_disk(3, 1)
    assert m.n_vertices == 4
    assert m.n_triangles == 3
    assert m.n_edges == 3


def test_disk_inscribed_polygon_geometry():
    # Oracle: perimeter and area of the inscribed regular n-gon.
    n = 64
    m = ro.generate_disk(n, 16)
    assert m.perimeter == pytest.approx(2 * n * np.sin(np.pi / n), rel=1e-13)
    assert m.area == pytest.approx(0.5 * n * np.sin(2 * np.pi / n), rel=1e-12)


def test_disk_perimeter_second_order_in_n():
    # 2 pi - perimeter(n) = pi^3 / (3 n^2) + O(n^-4)
    for n in (64, 256):
        m = ro.generate_disk(n, 2)
        deficit = 2 * np.pi - m.perimeter
        predicted = np.pi**3 / (3 * n**2)
        assert 0.5 * predicted < deficit < 2.0 * predicted


def test_disk_rejects_degenerate():
    with pytest.raises(ValueError):
        ro.generate_disk(2, 4)
    with pytest.raises(ValueError):
        ro.generate_disk(8, 0)


@pytest.mark.parametrize("make", [lambda: ro.generate_square(5),
                                  lambda: ro.generate_disk(16, 4)])
def test_shoelace_matches_triangle_area(make):
    m = make()
    assert m.boundary_loop_area() == pytest.approx(m.area, rel=1e-12)


@pytest.mark.parametrize("make", [lambda: ro.generate_square(4),
                                  lambda: ro.generate_disk(12, 3)])
def test_normals_point_outward(make):
    m = make()
    centroids = m.vertices[m.triangles[m.edge_owner]].mean(axis=1)
    mids = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
    dots = np.einsum("ij,ij->i", m.edge_normals, centroids - mids)
    assert (dots < 0).all()
    assert np.allclose(np.hypot(m.edge_normals[:, 0], m.edge_normals[:, 1]), 1.0)


def test_boundary_edges_owned_once():
    m = ro.generate_disk(10, 3)
    for e, (i, j) in enumerate(m.edges):
        tri = m.triangles[m.edge_owner[e]]
        cyc = [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
        assert (i, j) in cyc


def test_serialize_roundtrip():
    m = ro.generate_square(3)
    m2 = ro.load_mesh(m.serialize())
    assert np.array_equal(m2.vertices, m.vertices)
    assert np.array_equal(m2.triangles, m.triangles)
    assert np.array_equal(m2.edges, m.edges)
    m3 = ro.load_mesh(m2.serialize())
    assert m2.serialize() == m3.serialize()


def test_load_rejects_bad_header():
    with pytest.raises(MeshFormatError) as exc:
        ro.load_mesh("robinmesh 2\nV 0\nT 0\nB 0\n")
    assert exc.value.line == 1


def test_load_reports_parse_line():
    text = "robinmesh 1\nV 3\n0 0\n1 0\nzero one\nT 1\n0 1 2\nB 3\n0 1\n1 2\n2 0\n"
    with pytest.raises(MeshFormatError) as exc:
        ro.load_mesh(text)
    assert exc.value.line == 5


def test_load_rejects_negative_orientation():
    # Single triangle listed clockwise.
    text = "robinmesh 1\nV 3\n0 0\n1 0\n0 1\nT 1\n0 2 1\nB 3\n0 1\n1 2\n2 0\n"
    with pytest.raises(OrientationError):
        ro.load_mesh(text)


def test_load_rejects_interior_edge_declared_boundary():
    m = ro.generate_square(1)
    # The diagonal (0, 3) is shared by both triangles.
    text = m.serialize().replace("B 4\n", "B 5\n0 3\n")
    with pytest.raises(NonManifoldError):
        ro.load_mesh(text)


def test_load_rejects_reversed_boundary_edge():
    m = ro.generate_square(1)
    text = m.serialize().replace("B 4\n0 1\n", "B 4\n1 0\n")
    with pytest.raises(OrientationError):
        ro.load_mesh(text)


def test_mesh_is_immutable():
    m = ro.generate_square(2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0
