"""Pure NumPy/Python implementations of the compiled kernels in ``_ckernels.pyx``."""

import numpy as np

_CHUNK_ELEMS = 2_000_000


def level_sweep(vals, areas, lmid, weights, thresholds):
    """Per-threshold sums over faces of super-level area, level length and weighted area.

    ``vals`` holds each face's vertex values sorted ascending (a <= b <= c).
    Returns ``(mu, P, W)`` with ``mu[i] = sum_f |f ∩ {u > t_i}|``,
    ``P[i] = sum_f len(f ∩ {u = t_i})`` and ``W[i, k] = sum_f weights[f, k] |f ∩ {u > t_i}|``.
    """
    vals = np.asarray(vals, dtype=float)
    a, b, c = vals[:, 0], vals[:, 1], vals[:, 2]
    areas = np.asarray(areas, dtype=float)
    lmid = np.asarray(lmid, dtype=float)
    weights = np.asarray(weights, dtype=float).reshape(len(areas), -1)
    thresholds = np.asarray(thresholds, dtype=float)
    T = len(thresholds)
    mu = np.zeros(T)
    P = np.zeros(T)
    W = np.zeros((T, weights.shape[1]))
    step = max(1, _CHUNK_ELEMS // max(1, len(areas)))
    span_ab = np.where(b > a, b - a, 1.0)
    span_ca = np.where(c > a, c - a, 1.0)
    span_cb = np.where(c > b, c - b, 1.0)
    for s in range(0, T, step):
        t = thresholds[s : s + step, None]
        below = t < a
        lower = (t >= a) & (t < b)
        upper = (t >= b) & (t < c)
        frac = np.where(below, 1.0, 0.0)
        frac = np.where(lower, 1.0 - (t - a) ** 2 / (span_ab * span_ca), frac)
        frac = np.where(upper, (c - t) ** 2 / (span_ca * span_cb), frac)
        ln = np.where(lower, lmid * (t - a) / span_ab, 0.0)
        ln = np.where(upper, lmid * (c - t) / span_cb, ln)
        fa = frac * areas
        mu[s : s + step] = fa.sum(axis=1)
        P[s : s + step] = ln.sum(axis=1)
        W[s : s + step] = fa @ weights
    return mu, P, W


def grow_region(indptr, indices, start, target, rand, jitter):
    """Grow a connected face set of ``target`` faces from ``start``.

    The next face is drawn uniformly from the oldest ``max(1, jitter * len(queue))``
    queued faces: ``jitter = 0`` is breadth-first growth, ``jitter = 1`` picks
    anywhere on the frontier.
    """
    n = len(indptr) - 1
    mask = np.zeros(n, dtype=bool)
    flag = np.zeros(n, dtype=bool)
    queue = [int(start)]
    flag[start] = True
    head = 0
    count = 0
    r = 0
    nr = len(rand)
    while count < target and head < len(queue):
        window = max(1, int(jitter * (len(queue) - head)))
        pick = min(head + int(rand[r % nr] * window), head + window - 1)
        r += 1
        queue[pick], queue[head] = queue[head], queue[pick]
        face = queue[head]
        head += 1
        mask[face] = True
        count += 1
        for nb in indices[indptr[face] : indptr[face + 1]]:
            if not flag[nb]:
                flag[nb] = True
                queue.append(int(nb))
    return mask
