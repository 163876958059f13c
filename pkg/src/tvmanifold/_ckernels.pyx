# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; semantics mirror ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _bisect_left(const double[::1] x, double v) nogil:
    cdef Py_ssize_t lo = 0, hi = x.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if x[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def level_sweep(const double[:, ::1] vals, const double[::1] areas, const double[::1] lmid,
                const double[:, ::1] weights, const double[::1] thresholds):
    cdef Py_ssize_t F = vals.shape[0], T = thresholds.shape[0], K = weights.shape[1]
    cdef Py_ssize_t f, i, k, ia, ic
    cdef double a, b, c, A, t, frac, ln
    full_np = np.zeros(T + 1)
    mu_np = np.zeros(T)
    P_np = np.zeros(T)
    fullW_np = np.zeros((T + 1, K))
    W_np = np.zeros((T, K))
    cdef double[::1] full = full_np
    cdef double[::1] mu = mu_np
    cdef double[::1] P = P_np
    cdef double[:, ::1] fullW = fullW_np
    cdef double[:, ::1] W = W_np
    with nogil:
        for f in range(F):
            a = vals[f, 0]
            b = vals[f, 1]
            c = vals[f, 2]
            A = areas[f]
            ia = _bisect_left(thresholds, a)
            # thresholds with index < ia see the whole face; suffix sums below keep exact zeros above max u
            full[ia] += A
            for k in range(K):
                fullW[ia, k] += A * weights[f, k]
            if c <= a:
                continue
            ic = _bisect_left(thresholds, c)
            for i in range(ia, ic):
                t = thresholds[i]
                if t < b:
                    frac = 1.0 - (t - a) * (t - a) / ((b - a) * (c - a))
                    ln = lmid[f] * (t - a) / (b - a)
                else:
                    frac = (c - t) * (c - t) / ((c - a) * (c - b))
                    ln = lmid[f] * (c - t) / (c - b)
                P[i] += ln
                mu[i] += A * frac
                for k in range(K):
                    W[i, k] += A * frac * weights[f, k]
    suffix = np.cumsum(full_np[::-1])[::-1]
    suffixW = np.cumsum(fullW_np[::-1], axis=0)[::-1]
    return mu_np + suffix[1:], P_np, W_np + suffixW[1:]


def grow_region(const long[::1] indptr, const long[::1] indices, long start, long target,
                const double[::1] rand, double jitter):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    mask_np = np.zeros(n, dtype=np.uint8)
    flag_np = np.zeros(n, dtype=np.uint8)
    queue_np = np.empty(n, dtype=np.int64)
    cdef unsigned char[::1] mask = mask_np
    cdef unsigned char[::1] flag = flag_np
    cdef long[::1] queue = queue_np
    cdef Py_ssize_t head = 0, tail = 1, count = 0, r = 0, nr = rand.shape[0], j, pick, window
    cdef long face, nb
    queue[0] = start
    flag[start] = 1
    with nogil:
        while count < target and head < tail:
            window = <Py_ssize_t>(jitter * (tail - head))
            if window < 1:
                window = 1
            pick = head + <Py_ssize_t>(rand[r % nr] * window)
            if pick >= head + window:
                pick = head + window - 1
            r += 1
            face = queue[pick]
            queue[pick] = queue[head]
            queue[head] = face
            head += 1
            mask[face] = 1
            count += 1
            for j in range(indptr[face], indptr[face + 1]):
                nb = indices[j]
                if flag[nb] == 0:
                    flag[nb] = 1
                    queue[tail] = nb
                    tail += 1
    return mask_np.astype(bool)
