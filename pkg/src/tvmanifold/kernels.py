"""Backend selection for the hot loops: compiled Cython if importable, else NumPy."""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

_active = "cython" if _ckernels is not None else "python"
if os.environ.get("TVMANIFOLD_BACKEND") in BACKENDS:
    _active = os.environ["TVMANIFOLD_BACKEND"]


def backend_name() -> str:
    return _active


def use_backend(name: str) -> None:
    global _active
    if name not in BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(BACKENDS)}")
    _active = name


def level_sweep(vals, areas, lmid, weights, thresholds):
    import numpy as np

    mod = BACKENDS[_active]
    return mod.level_sweep(
        np.ascontiguousarray(vals, dtype=float),
        np.ascontiguousarray(areas, dtype=float),
        np.ascontiguousarray(lmid, dtype=float),
        np.ascontiguousarray(weights, dtype=float),
        np.ascontiguousarray(thresholds, dtype=float),
    )


def grow_region(indptr, indices, start, target, rand, jitter=1.0):
    import numpy as np

    mod = BACKENDS[_active]
    return mod.grow_region(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int64),
        int(start),
        int(target),
        np.ascontiguousarray(rand, dtype=float),
        float(jitter),
    )
