import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tvmanifold.errors import ParameterError
from tvmanifold.fields import (
    FaceVectorField,
    LevelGeometry,
    Region,
    ScalarField,
    distribution_curve,
    field_from_csv,
    field_to_csv,
    l1_norm,
    level_length,
    level_measure,
    positive_part_integral,
    random_smooth_field,
    read_csv,
    sublevel_measure,
    total_gradient_norm,
    write_csv,
)


def test_field_validation(sphere3):
    with pytest.raises(ParameterError):
        ScalarField(sphere3, np.zeros(3))
    with pytest.raises(ParameterError):
        ScalarField(sphere3, np.full(sphere3.n_vertices, np.nan))
    with pytest.raises(ParameterError):
        FaceVectorField(sphere3, np.zeros((2, 3)))
    with pytest.raises(ParameterError):
        Region(sphere3, np.zeros(5, bool))


def test_fields_are_immutable(sphere3):
    u = ScalarField(sphere3, np.zeros(sphere3.n_vertices))
    with pytest.raises(ValueError):
        u.values[0] = 1.0


def test_constant_field_has_zero_variation(sphere3):
    u = ScalarField(sphere3, np.full(sphere3.n_vertices, 3.0))
    assert total_gradient_norm(u) == 0
    assert level_length(u, 3.0) == 0


def test_sine_total_variation(torus128):
    u = ScalarField(torus128, np.sin(2 * np.pi * torus128.vertices[:, 0]))
    assert total_gradient_norm(u) == pytest.approx(4.0, rel=1e-3)
    assert l1_norm(u) == pytest.approx(2 / np.pi, rel=1e-3)
    assert level_measure(u, 0.0) == pytest.approx(0.5, abs=1e-12)
    assert level_length(u, 0.0) == pytest.approx(2.0, rel=1e-12)


def test_height_level_sets_on_sphere(sphere5):
    z = ScalarField(sphere5, sphere5.vertices[:, 2])
    for t in (-0.6, 0.0, 0.5):
        cap = 2 * np.pi * (1 - t)
        assert level_measure(z, t) == pytest.approx(cap, rel=3e-3)
        assert level_length(z, t) == pytest.approx(2 * np.pi * np.sqrt(1 - t * t), rel=3e-3)


def test_measures_partition_area(sphere3, rng):
    u = random_smooth_field(sphere3, rng)
    for t in np.linspace(u.min, u.max, 7):
        assert level_measure(u, t) + sublevel_measure(u, t) == pytest.approx(sphere3.total_area, rel=1e-12)


def test_level_measure_limits(sphere3, rng):
    u = random_smooth_field(sphere3, rng)
    assert level_measure(u, u.min - 1) == pytest.approx(sphere3.total_area)
    assert level_measure(u, u.max) == 0.0
    assert level_length(u, u.max + 1) == 0.0


@given(seed=st.integers(0, 2**32 - 1))
def test_distribution_curve_nonincreasing(sphere3, seed):
    u = random_smooth_field(sphere3, np.random.default_rng(seed))
    c = distribution_curve(u, np.linspace(u.min - 0.1, u.max + 0.1, 50))
    assert np.all(np.diff(c.values) <= 0)
    assert c.values[0] == pytest.approx(sphere3.total_area)
    assert c.values[-1] == 0


def test_distribution_curve_rejects_bad_grid(sphere3, rng):
    u = random_smooth_field(sphere3, rng)
    with pytest.raises(ParameterError):
        distribution_curve(u, [0.0, 0.0, 1.0])
    with pytest.raises(ParameterError):
        distribution_curve(u, [])


@given(seed=st.integers(0, 2**32 - 1))
def test_positive_part_matches_fine_quadrature(sphere3, seed):
    """Exact positive-part integral against the layer-cake integral of mu over t > 0."""
    u = random_smooth_field(sphere3, np.random.default_rng(seed))
    if u.max <= 0:
        return
    t = np.linspace(0, u.max, 4001)
    mu, _, _ = LevelGeometry(u).sweep(t)
    assert positive_part_integral(u) == pytest.approx(np.sum(0.5 * (mu[1:] + mu[:-1]) * np.diff(t)), rel=1e-5)


def test_sweep_accepts_unsorted_thresholds(sphere3, rng):
    u = random_smooth_field(sphere3, rng)
    t = rng.uniform(u.min, u.max, 20)
    geo = LevelGeometry(u)
    mu, P, _ = geo.sweep(t)
    for k in range(5):
        assert mu[k] == pytest.approx(level_measure(u, t[k]), rel=1e-12)
        assert P[k] == pytest.approx(level_length(u, t[k]), rel=1e-12)


def test_weighted_sweep(sphere3, rng):
    u = random_smooth_field(sphere3, rng)
    geo = LevelGeometry(u)
    w = np.ones((sphere3.n_faces, 1))
    mu, _, W = geo.sweep([0.1], w)
    assert W[0, 0] == pytest.approx(mu[0])


def test_region_lift_and_complement(sphere3):
    E = Region.polar_cap(sphere3, np.pi / 3)
    lift = E.vertex_lift().values
    assert set(np.unique(lift)) <= {0.0, 0.5, 1.0}
    comp = E.complement().vertex_lift().values
    assert np.allclose(lift + comp, 1.0)
    assert E.area + E.complement().area == pytest.approx(sphere3.total_area)


def test_empty_and_full_regions(sphere3):
    E = Region(sphere3, np.zeros(sphere3.n_faces, bool))
    assert E.is_empty() and E.complement().is_full()


def test_vector_field_divergence_matches_operator(sphere3, rng):
    phi = FaceVectorField(sphere3, rng.normal(size=(sphere3.n_faces, 3)))
    assert np.allclose(phi.divergence(), sphere3.operators.divergence(phi.vectors))
    assert phi.norms().shape == (sphere3.n_faces,)


def test_csv_round_trip(tmp_path, sphere3, rng):
    u = random_smooth_field(sphere3, rng)
    p = tmp_path / "u.csv"
    field_to_csv(u, p)
    v = field_from_csv(sphere3, p)
    assert np.array_equal(u.values, v.values)


def test_csv_formatting(tmp_path):
    p = tmp_path / "x.csv"
    write_csv(p, ["a", "b", "c"], [(True, 3, 0.1)])
    header, rows = read_csv(p)
    assert header == ["a", "b", "c"]
    assert rows == [["1", "3", "0.10000000000000001"]]


def test_random_smooth_field_is_periodic_on_torus(torus32):
    u = random_smooth_field(torus32, np.random.default_rng(0))
    # bounded face gradients: no jump across the seam
    assert np.max(u.gradient_norm()) < 200
