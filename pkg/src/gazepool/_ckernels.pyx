# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the two hot kernels.

Same contracts as gazepool._pykernels; see there for semantics.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, exp, floor

cnp.import_array()

BACKEND = "cython"


def accumulate_density(u, v, int height, int width, double sigma,
                       double radius, bint use_max):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((height, width), dtype=np.float64)

    cdef double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma)
    cdef double radius2 = radius * radius
    cdef Py_ssize_t n = uu.shape[0]
    cdef Py_ssize_t i, r, c
    cdef int r0, r1, c0, c1
    cdef double fu, fv, dr, dc, dist2, val

    for i in range(n):
        fu = uu[i]
        fv = vv[i]
        r0 = <int>ceil(fv - 0.5 - radius)
        r1 = <int>floor(fv - 0.5 + radius)
        c0 = <int>ceil(fu - 0.5 - radius)
        c1 = <int>floor(fu - 0.5 + radius)
        if r0 < 0:
            r0 = 0
        if r1 > height - 1:
            r1 = height - 1
        if c0 < 0:
            c0 = 0
        if c1 > width - 1:
            c1 = width - 1
        for r in range(r0, r1 + 1):
            dr = (<double>r) + 0.5 - fv
            for c in range(c0, c1 + 1):
                dc = (<double>c) + 0.5 - fu
                dist2 = dr * dr + dc * dc
                if dist2 <= radius2:
                    val = exp(-dist2 * inv_two_sigma2)
                    if use_max:
                        if val > out[r, c]:
                            out[r, c] = val
                    else:
                        out[r, c] += val
    return out


def weighted_pool(features, density):
    cdef cnp.ndarray[cnp.float32_t, ndim=3] feat = np.ascontiguousarray(features, dtype=np.float32)
    cdef cnp.ndarray[cnp.float32_t, ndim=2] dens = np.ascontiguousarray(density, dtype=np.float32)

    cdef Py_ssize_t channels = feat.shape[0]
    cdef Py_ssize_t h = feat.shape[1]
    cdef Py_ssize_t w = feat.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(channels, dtype=np.float64)
    cdef Py_ssize_t k, r, c
    cdef double acc
    cdef double cells = <double>(h * w)

    for k in range(channels):
        acc = 0.0
        for r in range(h):
            for c in range(w):
                acc += (<double>feat[k, r, c]) * (<double>dens[r, c])
        out[k] = acc / cells
    return out
