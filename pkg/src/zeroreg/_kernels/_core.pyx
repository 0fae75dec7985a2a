# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: RANSAC inlier scoring, log-domain Sinkhorn sweeps,
and z-buffer depth scatter. Semantics mirror `_fallback` exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

BACKEND = "compiled"


def count_inliers_batch(cnp.ndarray[cnp.float64_t, ndim=3] rotations,
                        cnp.ndarray[cnp.float64_t, ndim=2] translations,
                        cnp.ndarray[cnp.float64_t, ndim=2] src,
                        cnp.ndarray[cnp.float64_t, ndim=2] dst,
                        double threshold):
    cdef Py_ssize_t B = rotations.shape[0]
    cdef Py_ssize_t N = src.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(B, dtype=np.int64)
    cdef double thr2 = threshold * threshold
    cdef Py_ssize_t b, n
    cdef double r00, r01, r02, r10, r11, r12, r20, r21, r22, t0, t1, t2
    cdef double px, py, pz, dx, dy, dz
    cdef long c
    for b in range(B):
        r00 = rotations[b, 0, 0]; r01 = rotations[b, 0, 1]; r02 = rotations[b, 0, 2]
        r10 = rotations[b, 1, 0]; r11 = rotations[b, 1, 1]; r12 = rotations[b, 1, 2]
        r20 = rotations[b, 2, 0]; r21 = rotations[b, 2, 1]; r22 = rotations[b, 2, 2]
        t0 = translations[b, 0]; t1 = translations[b, 1]; t2 = translations[b, 2]
        c = 0
        for n in range(N):
            px = src[n, 0]; py = src[n, 1]; pz = src[n, 2]
            dx = r00 * px + r01 * py + r02 * pz + t0 - dst[n, 0]
            dy = r10 * px + r11 * py + r12 * pz + t1 - dst[n, 1]
            dz = r20 * px + r21 * py + r22 * pz + t2 - dst[n, 2]
            if dx * dx + dy * dy + dz * dz < thr2:
                c += 1
        counts[b] = c
    return counts


def sinkhorn_log(cnp.ndarray[cnp.float64_t, ndim=2] logits, int iterations):
    cdef Py_ssize_t R = logits.shape[0]
    cdef Py_ssize_t C = logits.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] z = np.array(logits, dtype=np.float64, copy=True)
    cdef Py_ssize_t it, i, j
    cdef double m, s
    for it in range(iterations):
        for i in range(R - 1):
            m = z[i, 0]
            for j in range(1, C):
                if z[i, j] > m:
                    m = z[i, j]
            s = 0.0
            for j in range(C):
                s += exp(z[i, j] - m)
            s = m + log(s)
            for j in range(C):
                z[i, j] -= s
        for j in range(C - 1):
            m = z[0, j]
            for i in range(1, R):
                if z[i, j] > m:
                    m = z[i, j]
            s = 0.0
            for i in range(R):
                s += exp(z[i, j] - m)
            s = m + log(s)
            for i in range(R):
                z[i, j] -= s
    return np.exp(z)


def zbuffer_min(cnp.ndarray[cnp.int64_t, ndim=1] pixel_u,
                cnp.ndarray[cnp.int64_t, ndim=1] pixel_v,
                cnp.ndarray[cnp.float64_t, ndim=1] depths,
                int height, int width):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] depth = np.zeros((height, width), dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] owner = np.full((height, width), -1, dtype=np.int64)
    cdef Py_ssize_t K = depths.shape[0]
    cdef Py_ssize_t k
    cdef long u, v
    cdef double zv
    for k in range(K):
        u = pixel_u[k]
        v = pixel_v[k]
        zv = depths[k]
        if owner[v, u] < 0 or zv < depth[v, u]:
            depth[v, u] = zv
            owner[v, u] = k
    return depth, owner
