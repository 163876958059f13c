import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tvmanifold.errors import ParameterError
from tvmanifold.mesh import (
    Mesh,
    build_disk,
    build_flat_torus,
    build_icosphere,
    conformal_factor,
    disk_ring_radii,
    read_off,
    sphere_to_stereographic,
    stereographic_to_sphere,
    write_off,
)


def test_icosahedron_counts():
    m = build_icosphere(0)
    assert (m.n_vertices, m.n_faces) == (12, 20)


@pytest.mark.parametrize("s", range(5))
def test_icosphere_topology(s):
    m = build_icosphere(s)
    assert m.n_faces == 20 * 4**s
    assert m.euler_characteristic == 2
    assert m.is_closed and m.is_oriented()
    assert np.allclose(np.linalg.norm(m.vertices, axis=1), 1.0)
    assert np.all(m.areas > 0)
    # outward orientation
    assert np.all(np.einsum("fk,fk->f", m.normals, m.centroids) > 0)


def test_icosphere_area_converges():
    assert abs(build_icosphere(3).total_area - 4 * np.pi) / (4 * np.pi) < 0.01
    a = [build_icosphere(s).total_area for s in (2, 3, 4)]
    assert a[0] < a[1] < a[2] < 4 * np.pi


@pytest.mark.parametrize("bad", [-1, 9, 2.5, "3"])
def test_icosphere_rejects_bad_subdiv(bad):
    with pytest.raises(ParameterError):
        build_icosphere(bad)


def test_torus_counts_and_area():
    m = build_flat_torus(3)
    assert (m.n_vertices, m.n_faces) == (9, 18)
    for n in (3, 7, 64):
        m = build_flat_torus(n)
        assert m.total_area == pytest.approx(1.0, abs=1e-14)
        assert m.euler_characteristic == 0
        assert m.is_closed and m.is_oriented()


@pytest.mark.parametrize("bad", [0, 2, -4])
def test_torus_rejects_small_n(bad):
    with pytest.raises(ParameterError):
        build_flat_torus(bad)


def test_disk_boundary_and_rings():
    m = build_disk(2.0, 0.1)
    r = np.linalg.norm(m.vertices[:, :2], axis=1)
    assert not m.is_closed and m.is_oriented()
    assert np.allclose(r[m.boundary_vertices], 2.0)
    assert m.euler_characteristic == 1
    assert m.total_area == pytest.approx(np.pi * 4, rel=0.01)


def test_graded_rings_are_nested():
    small = disk_ring_radii(4.0, 0.03, 0.5, 2.5)
    big = disk_ring_radii(16.0, 0.03, 0.5, 2.5)
    inner = small[small < 3.0]
    assert np.array_equal(inner, big[: len(inner)])


def test_disk_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        build_disk(-1.0, 0.1)
    with pytest.raises(ParameterError):
        build_disk(1.0, 2.0)


def test_gradient_of_affine_field_is_exact(unit_disk):
    a = np.array([0.3, -1.7, 0.0])
    u = unit_disk.vertices @ a + 2.0
    g = unit_disk.gradient(u)
    assert np.max(np.abs(g - a)) < 1e-12


def test_gradient_is_tangent(sphere3, rng):
    g = sphere3.gradient(rng.normal(size=sphere3.n_vertices))
    assert np.max(np.abs(np.einsum("fk,fk->f", g, sphere3.normals))) < 1e-12


def test_torus_gradient_of_periodic_linear_pieces(torus64):
    # sin(2 pi x) has the same per-face gradient as its linear interpolant across the seam
    u = np.sin(2 * np.pi * torus64.vertices[:, 0])
    g = torus64.gradient(u)
    assert np.all(np.abs(g[:, 2]) == 0)
    assert np.max(np.linalg.norm(g, axis=1)) <= 2 * np.pi


@pytest.mark.parametrize("which", ["sphere4", "torus64"])
@given(seed=st.integers(0, 2**32 - 1))
def test_integration_by_parts_is_exact(which, seed, request):
    m = request.getfixturevalue(which)
    r = np.random.default_rng(seed)
    u = r.normal(size=m.n_vertices)
    phi = r.normal(size=(m.n_faces, 3))
    assert m.operators.pairing_residual(u, phi) < 1e-12


def test_stiffness_annihilates_constants(sphere3):
    K = sphere3.operators.stiffness
    assert np.max(np.abs(K @ np.ones(sphere3.n_vertices))) < 1e-12
    assert abs(K - K.T).max() < 1e-12


def test_mass_sums_to_area(sphere3):
    assert sphere3.operators.mass.sum() == pytest.approx(sphere3.total_area, rel=1e-14)


def test_scaled_mesh(torus32):
    s = torus32.scaled(3.0)
    assert s.total_area == pytest.approx(9.0)
    assert s.mean_edge_length == pytest.approx(3 * torus32.mean_edge_length)


def test_nonmanifold_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1]], float)
    f = [[0, 1, 2], [0, 1, 3], [0, 1, 4]]
    with pytest.raises(ParameterError):
        Mesh(v, f)


def test_degenerate_face_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], float)
    with pytest.raises(ParameterError):
        Mesh(v, [[0, 1, 2]])


def test_inconsistent_orientation_detected():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], float)
    m = Mesh(v, [[0, 1, 2], [1, 2, 3]])
    assert not m.is_oriented()
    with pytest.raises(ParameterError):
        m.audit()


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_stereographic_round_trip(x, y):
    p = np.array([x, y])
    X = stereographic_to_sphere(p)
    assert np.linalg.norm(X) == pytest.approx(1.0)
    assert np.allclose(sphere_to_stereographic(X), p, rtol=1e-9, atol=1e-9)


def test_stereographic_conventions():
    assert np.allclose(stereographic_to_sphere([0.0, 0.0]), [0, 0, -1])
    assert np.allclose(stereographic_to_sphere([1.0, 0.0]), [1, 0, 0])
    assert conformal_factor([0.0, 0.0]) == pytest.approx(4.0)
    # total sphere area from the conformal density
    r = np.linspace(0, 2000, 400001)
    area = np.trapezoid(conformal_factor(np.stack([r, 0 * r], 1)) * 2 * np.pi * r, r)
    assert area == pytest.approx(4 * np.pi, rel=1e-3)


def test_off_round_trip(tmp_path, sphere3):
    p = tmp_path / "s.off"
    write_off(sphere3, p)
    m = read_off(p)
    assert np.array_equal(m.faces, sphere3.faces)
    assert np.array_equal(m.vertices, sphere3.vertices)


def test_off_malformed(tmp_path):
    p = tmp_path / "bad.off"
    p.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n")
    with pytest.raises(ParameterError):
        read_off(p)
