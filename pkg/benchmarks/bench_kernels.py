"""Time the compiled and pure-Python kernels on the same inputs.

Usage: python3 benchmarks/bench_kernels.py [--subdiv 5] [--thresholds 1000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from tvmanifold import kernels
from tvmanifold.fields import LevelGeometry, random_smooth_field
from tvmanifold.mesh import build_icosphere


def cases(subdiv, n_thresholds):
    mesh = build_icosphere(subdiv)
    rng = np.random.default_rng(0)
    u = random_smooth_field(mesh, rng)
    geo = LevelGeometry(u)
    w = np.column_stack([geo.grad_norm, geo.grad_norm**2])
    t = np.sort(rng.uniform(u.min, u.max, n_thresholds))
    A = mesh.face_adjacency
    rand = rng.random(4 * mesh.n_faces)
    return {
        "level_sweep": lambda: kernels.level_sweep(geo.sorted_vals, geo.areas, geo.lmid, w, t),
        "grow_region": lambda: kernels.grow_region(A.indptr, A.indices, 0, mesh.n_faces // 2, rand, 0.5),
    }, mesh.n_faces


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--subdiv", type=int, default=5)
    ap.add_argument("--thresholds", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    fns, n_faces = cases(args.subdiv, args.thresholds)
    print(f"icosphere subdiv {args.subdiv}: {n_faces} faces, {args.thresholds} thresholds")
    if "cython" not in kernels.BACKENDS:
        print("compiled extension not built; timing the Python backend only")
    best = {}
    for backend in sorted(kernels.BACKENDS):
        kernels.use_backend(backend)
        for name, fn in fns.items():
            fn()
            best[backend, name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    print(f"{'kernel':<14}{'backend':<10}{'best [ms]':>12}{'speedup':>10}")
    for name in fns:
        base = best["python", name]
        for backend in sorted(kernels.BACKENDS):
            t = best[backend, name]
            print(f"{name:<14}{backend:<10}{1e3 * t:>12.2f}{base / t:>9.1f}x")


if __name__ == "__main__":
    main()
