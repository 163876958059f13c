import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tvmanifold.errors import ParameterError
from tvmanifold.fields import Region, ScalarField, random_smooth_field, total_gradient_norm
from tvmanifold.isoperimetry import random_region
from tvmanifold.perimeter import (
    HeatFlowTrace,
    default_schedule,
    empirical_theta,
    heat_flow,
    monotonicity_check,
    perimeter_cut,
    perimeter_heat,
    spectral_bound,
    tv_dual,
)


def test_cut_of_empty_and_full(sphere3):
    n = sphere3.n_faces
    assert perimeter_cut(Region(sphere3, np.zeros(n, bool))) == 0
    assert perimeter_cut(Region(sphere3, np.ones(n, bool))) == 0


def test_torus_strip_cut_is_two(torus64):
    E = Region(torus64, torus64.centroids[:, 0] < 0.5)
    assert perimeter_cut(E) == pytest.approx(2.0, abs=1e-12)


@given(seed=st.integers(0, 2**32 - 1))
def test_cut_symmetric_under_complement(sphere3, seed):
    E = random_region(sphere3, np.random.default_rng(seed))
    assert perimeter_cut(E) == perimeter_cut(E.complement())


def test_hemisphere_cut_metrication(sphere5):
    """Edge paths overestimate a great circle by about 12% on this mesh."""
    cut = perimeter_cut(Region.polar_cap(sphere5, np.pi / 2))
    assert 2 * np.pi < cut < 1.2 * 2 * np.pi


def test_dual_of_constant_is_zero(sphere3):
    r = tv_dual(ScalarField(sphere3, np.ones(sphere3.n_vertices)))
    assert r.value == 0


def test_dual_sine_matches_total_variation(torus128):
    u = ScalarField(torus128, np.sin(2 * np.pi * torus128.vertices[:, 0]))
    r = tv_dual(u)
    assert r.value == pytest.approx(4.0, rel=5e-3)
    assert r.value <= total_gradient_norm(u) + 1e-9
    assert np.all(r.certificate.norms() <= 1 + 1e-9)


@given(seed=st.integers(0, 2**32 - 1))
def test_weak_duality(sphere3, seed):
    u = random_smooth_field(sphere3, np.random.default_rng(seed))
    r = tv_dual(u, max_iters=30)
    tv = total_gradient_norm(u)
    assert r.value <= tv * (1 + 1e-12)
    assert np.all(r.certificate.norms() <= 1 + 1e-9)


def test_strong_duality_gap(sphere3, rng):
    u = random_smooth_field(sphere3, rng)
    r = tv_dual(u, max_iters=500)
    assert abs(total_gradient_norm(u) - r.value) / total_gradient_norm(u) < 1e-3


def test_dual_hemisphere_lift(sphere5):
    E = Region.polar_cap(sphere5, np.pi / 2)
    r = tv_dual(E.vertex_lift())
    assert r.value == pytest.approx(perimeter_cut(E), rel=0.03)


def test_dual_rejects_bad_iterations(sphere3):
    with pytest.raises(ParameterError):
        tv_dual(ScalarField(sphere3, np.zeros(sphere3.n_vertices)), max_iters=0)


def test_spectral_bound_dominates(sphere3, rng):
    L = spectral_bound(sphere3)
    ops = sphere3.operators
    for _ in range(5):
        u = rng.normal(size=sphere3.n_vertices)
        ray = (u @ (ops.stiffness @ u)) / (u @ (ops.mass * u))
        assert ray <= L


def test_heat_flow_constant(sphere3):
    tr = heat_flow(ScalarField(sphere3, np.full(sphere3.n_vertices, 2.0)), 1e-3, 5)
    assert np.all(tr.values == 0)


@given(seed=st.integers(0, 2**32 - 1))
def test_heat_flow_conserves_mass_and_max(sphere3, seed):
    r = np.random.default_rng(seed)
    u0 = random_region(sphere3, r).vertex_lift()
    tr = heat_flow(u0, 1e-3, 5, keep_fields=True)
    assert np.all(np.abs(tr.masses - tr.masses[0]) <= 1e-10 * abs(tr.masses[0]))
    maxes = [f.max for f in tr.fields]
    assert all(b <= a + 1e-10 for a, b in zip(maxes, maxes[1:]))
    assert np.all(np.diff(tr.times) > 0)


def test_heat_flow_rejects_bad_input(sphere3):
    u = ScalarField(sphere3, np.zeros(sphere3.n_vertices))
    with pytest.raises(ParameterError):
        heat_flow(u, 0.0, 3)
    with pytest.raises(ParameterError):
        heat_flow(u, 1e-3, 0)


@pytest.mark.parametrize("which", ["sphere4", "torus64"])
def test_monotonicity_on_random_indicators(which, request, rng):
    m = request.getfixturevalue(which)
    h = m.mean_edge_length
    for _ in range(3):
        tr = heat_flow(random_region(m, rng).vertex_lift(), h * h, 10)
        ok, worst = monotonicity_check(tr, 0.0)
        assert ok, worst
        assert empirical_theta(tr) == 0.0


def test_monotonicity_counterexample():
    tr = HeatFlowTrace(1.0, np.array([0.0, 1.0]), np.array([1.0, 2.0]))
    ok, worst = monotonicity_check(tr, 0.0)
    assert not ok and worst == pytest.approx(1.0)
    assert empirical_theta(tr) == pytest.approx(np.log(2))
    ok, _ = monotonicity_check(tr, np.log(2) + 1e-9)
    assert ok


def test_monotonicity_constant_trace():
    tr = HeatFlowTrace(1.0, np.arange(3.0), np.zeros(3))
    assert monotonicity_check(tr, 0.0) == (True, 0.0)


def test_heat_values_rise_toward_small_time(sphere4):
    E = Region.polar_cap(sphere4, np.pi / 2)
    res = perimeter_heat(E)
    assert np.all(np.diff(res.samples) > 0)


def test_perimeter_heat_empty(sphere3):
    assert perimeter_heat(Region(sphere3, np.zeros(sphere3.n_faces, bool))).value == 0


def test_perimeter_heat_hemisphere_near_great_circle(sphere5):
    E = Region.polar_cap(sphere5, np.pi / 2)
    assert perimeter_heat(E).value == pytest.approx(2 * np.pi, rel=0.05)


def test_schedule_validation(sphere3):
    E = Region.polar_cap(sphere3, 1.0)
    with pytest.raises(ParameterError):
        perimeter_heat(E, [])
    with pytest.raises(ParameterError):
        perimeter_heat(E, [1e-3, 2e-3])
    sched = default_schedule(sphere3)
    assert sched[0] > sched[1] > sched[2] > 0


def test_trace_csv(tmp_path, sphere3):
    tr = heat_flow(Region.polar_cap(sphere3, 1.0).vertex_lift(), 1e-3, 3)
    tr.to_csv(tmp_path / "t.csv", theta=0.5)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,f,damped_f" and len(lines) == 5
