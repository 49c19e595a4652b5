import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contact_topopt.errors import ConfigurationError, InvertedElementError
from contact_topopt.mesh import (DomainSpec, Mesh, generate_domain, mesh_quality, move_vertices, parse_side,
                                 read_mesh, signed_areas, smooth_interior, triangle_quality, vertex_neighbors,
                                 write_mesh)

from conftest import rectangle, single_triangle


def test_rectangle_area_exact():
    m = generate_domain(DomainSpec("rectangle", dict(width=2.0, height=1.0), 0.5,
                                   dict(bottom="C", right="F", top="F", left="D")))
    assert m.volume == 2.0


def test_holed_square_area():
    spec = DomainSpec("square_with_hole", dict(side=1.0, hole_center=(0.5, 0.5), hole_radius=0.2), 0.05,
                      dict(bottom="C", right="D", top="F", left="D", hole="F"))
    m = generate_domain(spec)
    exact = 1 - math.pi * 0.04
    assert abs(m.volume - exact) / exact < 0.01
    # the polygonal hole is inscribed, so the meshed area exceeds the smooth one
    assert m.volume > exact


def test_lshape_area_exact():
    m = generate_domain(DomainSpec("lshape", dict(outer=2.0, notch=1.0), 0.25,
                                   dict(bottom="C", notch_side="F", notch_top="F", right="F", top="D", left="F")))
    assert m.volume == 3.0


@pytest.mark.parametrize("fixture", ["small_rect", "hole_mesh", "lshape_mesh"])
def test_generated_meshes_are_valid(fixture, request):
    m = request.getfixturevalue(fixture)
    m.validate()
    assert np.all(m.signed_areas() > 0)
    h = 0.25 if fixture != "hole_mesh" else 0.1
    assert m.max_edge_length() <= 1.5 * h
    assert mesh_quality(m) > 0.2


def test_edge_tags_follow_breakpoints():
    m = rectangle(h=0.25, top="F, N 0.5 1.0")
    n_edges = m.edges_with("N")
    mid = m.vertices[n_edges].mean(axis=1)
    assert np.all((mid[:, 0] > 0.5) & (mid[:, 0] < 1.0))
    assert np.allclose(mid[:, 1], 1.0)
    assert np.sum(m.edge_lengths(n_edges)) == pytest.approx(0.5, abs=1e-12)


def test_boundary_edges_oriented_outward(small_rect):
    n = small_rect.outward_normals(small_rect.edges_with("C"))
    assert np.allclose(n, [0.0, -1.0])


def test_degenerate_specs_rejected():
    with pytest.raises(ConfigurationError):
        generate_domain(DomainSpec("rectangle", dict(width=2.0, height=1.0), 0.0,
                                   dict(bottom="C", right="F", top="F", left="D")))
    with pytest.raises(ConfigurationError):
        generate_domain(DomainSpec("square_with_hole", dict(side=1.0, hole_center=(0.5, 0.5), hole_radius=0.5),
                                   0.1, dict(bottom="C", right="D", top="F", left="D", hole="F")))
    with pytest.raises(ConfigurationError):
        generate_domain(DomainSpec("rectangle", dict(width=2.0, height=1.0), 0.5, dict(bottom="C", left="D")))


def test_missing_clamp_rejected():
    with pytest.raises(ConfigurationError):
        generate_domain(DomainSpec("rectangle", dict(width=1.0, height=1.0), 0.5,
                                   dict(bottom="C", right="F", top="F", left="F")))


@pytest.mark.parametrize("text, expected", [
    ("F", ("F", [])),
    ("f, n 0.4 0.6", ("F", [("N", 0.4, 0.6)])),
    ("D, C 0 1, N 1 2", ("D", [("C", 0.0, 1.0), ("N", 1.0, 2.0)])),
])
def test_parse_side(text, expected):
    assert parse_side(text) == expected


@pytest.mark.parametrize("text", ["", "X", "F, N 0.6 0.4", "F, N a b", "F, N 0.1"])
def test_parse_side_rejects(text):
    with pytest.raises(ConfigurationError):
        parse_side(text)


def test_zero_velocity_leaves_mesh(small_rect):
    moved = move_vertices(small_rect, np.zeros_like(small_rect.vertices), 123.0)
    assert np.array_equal(moved.vertices, small_rect.vertices)


def _square_pair():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    return Mesh(verts, [[0, 1, 3], [0, 3, 2]], [[0, 1], [1, 3], [3, 2], [2, 0]], ["D", "F", "F", "D"])


def test_translation_of_free_vertex():
    m = _square_pair()
    V = np.zeros((4, 2))
    V[3] = [0.3, -0.2]
    moved = move_vertices(m, V, 0.1)
    assert np.allclose(moved.vertices[3], [1.03, 0.98], atol=1e-15)
    assert np.array_equal(moved.vertices[:3], m.vertices[:3])


def test_moving_fixed_vertex_is_an_error():
    m = _square_pair()
    V = np.zeros((4, 2))
    V[1] = [0.1, 0.0]
    with pytest.raises(ValueError):
        move_vertices(m, V, 0.1)


def test_inverting_step_rejected():
    m = _square_pair()
    V = np.zeros((4, 2))
    V[3] = [-2.0, -2.0]  # pushes the free corner across the diagonal of both triangles
    move_vertices(m, V, 0.25)
    with pytest.raises(InvertedElementError) as err:
        move_vertices(m, V, 1.0)
    assert np.all(signed_areas(m.vertices + V, m.triangles)[err.value.triangles] <= 0)


def test_smoothing_fixed_point_on_structured_grid(small_rect):
    out = smooth_interior(small_rect)
    assert np.allclose(out.vertices, small_rect.vertices, atol=1e-14)


def test_smoothing_pulls_perturbed_vertex_to_ring_centroid(small_rect):
    interior = np.flatnonzero(~small_rect.boundary_vertex_mask())
    k = interior[len(interior) // 2]
    x = small_rect.vertices.copy()
    x[k] += [0.05, -0.04]
    m = small_rect.with_vertices(x)
    indptr, nbrs = vertex_neighbors(m)
    ring = x[nbrs[indptr[k]:indptr[k + 1]]].mean(axis=0)
    out = smooth_interior(m, iterations=1)
    assert np.linalg.norm(out.vertices[k] - ring) < np.linalg.norm(x[k] - ring)
    boundary = small_rect.boundary_vertex_mask()
    assert np.array_equal(out.vertices[boundary], x[boundary])


def test_smoothing_without_interior_vertices():
    m = _square_pair()
    assert smooth_interior(m) is m


def test_quality_examples():
    eq = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
    assert triangle_quality(eq, np.array([[0, 1, 2]]))[0] == pytest.approx(1.0, abs=1e-14)
    right = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    inr, circ = (2 - math.sqrt(2)) / 2, math.sqrt(2) / 2
    q = triangle_quality(right, np.array([[0, 1, 2]]))[0]
    assert q == pytest.approx(2 * inr / circ, rel=1e-13)
    assert q == pytest.approx(0.8284, abs=1e-4)
    sliver = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1e-3]])
    assert triangle_quality(sliver, np.array([[0, 1, 2]]))[0] < 0.1


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(-3.0, 3.0), st.floats(0.0, 2 * math.pi))
def test_quality_is_similarity_invariant(scale, shift, angle):
    tri = np.array([[0.0, 0.0], [1.0, 0.2], [0.3, 0.8]])
    R = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    moved = scale * tri @ R.T + shift
    t = np.array([[0, 1, 2]])
    assert triangle_quality(moved, t)[0] == pytest.approx(triangle_quality(tri, t)[0], rel=1e-9)


def test_mesh_file_round_trip(tmp_path, hole_mesh):
    path = tmp_path / "m.txt"
    write_mesh(hole_mesh, path)
    back = read_mesh(path)
    assert np.array_equal(back.vertices, hole_mesh.vertices)
    assert np.array_equal(back.triangles, hole_mesh.triangles)
    assert np.array_equal(back.boundary_edges, hole_mesh.boundary_edges)
    assert np.array_equal(back.edge_tags, hole_mesh.edge_tags)


def test_mesh_file_bad_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("nonsense\n")
    with pytest.raises(ConfigurationError):
        read_mesh(path)


def test_mesh_is_immutable(small_rect):
    with pytest.raises(ValueError):
        small_rect.vertices[0, 0] = 1.0


def test_single_triangle_validates():
    single_triangle().validate()
