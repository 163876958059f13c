"""The compiled and NumPy backends must agree."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tvmanifold import kernels
from tvmanifold.fields import LevelGeometry, random_smooth_field
from tvmanifold.isoperimetry import random_region

pytestmark = pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled extension not built")


@pytest.fixture
def python_backend():
    prev = kernels.backend_name()
    kernels.use_backend("python")
    yield
    kernels.use_backend(prev)


def _sweep(geo, t, w, name):
    mod = kernels.BACKENDS[name]
    return mod.level_sweep(geo.sorted_vals, geo.areas, geo.lmid, w, np.sort(t))


@given(seed=st.integers(0, 2**32 - 1), nt=st.integers(1, 300))
def test_level_sweep_backends_agree(sphere3, seed, nt):
    r = np.random.default_rng(seed)
    u = random_smooth_field(sphere3, r)
    geo = LevelGeometry(u)
    w = np.ascontiguousarray(np.column_stack([geo.grad_norm, geo.grad_norm**2]))
    t = r.uniform(u.min - 0.5, u.max + 0.5, nt)
    a = _sweep(geo, t, w, "cython")
    b = _sweep(geo, t, w, "python")
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-12)


def test_level_sweep_at_vertex_values(sphere3, rng):
    u = random_smooth_field(sphere3, rng)
    geo = LevelGeometry(u)
    w = np.zeros((sphere3.n_faces, 0))
    t = np.unique(u.values)[::37]
    a = _sweep(geo, t, w, "cython")
    b = _sweep(geo, t, w, "python")
    assert np.allclose(a[0], b[0], rtol=1e-12) and np.allclose(a[1], b[1], rtol=1e-12)


@given(seed=st.integers(0, 2**32 - 1), frac=st.floats(0.01, 0.99), jitter=st.floats(0, 1))
def test_grow_region_backends_agree(sphere3, seed, frac, jitter):
    A = sphere3.face_adjacency
    r = np.random.default_rng(seed)
    start = int(r.integers(sphere3.n_faces))
    target = max(1, int(frac * sphere3.n_faces))
    rand = r.random(4 * sphere3.n_faces)
    args = (A.indptr.astype(np.int64), A.indices.astype(np.int64), start, target, rand, jitter)
    a = kernels.BACKENDS["cython"].grow_region(*args)
    b = kernels.BACKENDS["python"].grow_region(*args)
    assert np.array_equal(np.asarray(a, bool), np.asarray(b, bool))
    assert np.asarray(a).sum() == target


def test_grown_region_is_connected(sphere3, rng):
    from scipy.sparse.csgraph import connected_components

    E = random_region(sphere3, rng)
    sub = sphere3.face_adjacency[E.mask][:, E.mask]
    assert connected_components(sub, directed=False)[0] == 1


def test_use_backend(python_backend):
    assert kernels.backend_name() == "python"
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")
