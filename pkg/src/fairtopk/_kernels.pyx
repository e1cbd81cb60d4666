# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte Carlo kernels; bit-identical twin of ``_fallback.py``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, uint8_t
from libc.string cimport memset

cnp.import_array()

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef uint64_t STREAM = 0xD1B54A32D192ED03ULL
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t stream_key(uint64_t base, int64_t index) noexcept nogil:
    return mix64(base + <uint64_t>(index + 1) * STREAM)


cdef inline double uniform(uint64_t key, int64_t t) noexcept nogil:
    return <double>(mix64(key + <uint64_t>(t + 1) * GAMMA) >> 11) * INV53


cdef void sample_row(int model, int n, int n_p, double param, uint64_t key,
                     int depth, uint8_t* row) noexcept nogil:
    # fills row[0:n]; only row[0:depth] is guaranteed final
    cdef int i, r, stop
    cdef int64_t rp, rn
    cdef uint8_t tmp
    cdef double u, w
    cdef bint hit
    if model == 0:
        memset(row, 0, n)
        memset(row, 1, n_p)
        stop = depth if depth < n - 1 else n - 1
        for i in range(stop):
            u = uniform(key, i)
            r = i + <int>(u * (n - i))
            tmp = row[r]
            row[r] = row[i]
            row[i] = tmp
        return
    rp = n_p
    rn = n - n_p
    for i in range(depth):
        u = uniform(key, i)
        if rp == 0:
            hit = False
        elif rn == 0:
            hit = True
        elif model == 1:
            hit = u < param
        else:
            w = param * <double>rp
            hit = u < w / (w + <double>rn)
        row[i] = hit
        if hit:
            rp -= 1
        else:
            rn -= 1


def sample_block(int model, int n, int n_p, double param, uint64_t seed,
                 int64_t start, int64_t count):
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] out = np.zeros((count, n), dtype=np.uint8)
    cdef uint8_t* base_ptr = <uint8_t*> out.data
    cdef uint64_t base = mix64(seed + GAMMA)
    cdef int64_t i
    with nogil:
        for i in range(count):
            sample_row(model, n, n_p, param, stream_key(base, start + i), n,
                       base_ptr + i * n)
    return out


def prefix_histogram(int model, int n, int n_p, double param, uint64_t seed,
                     int64_t start, int64_t count, int k):
    cdef cnp.ndarray[cnp.int64_t, ndim=2] hist = np.zeros((k, n_p + 1), dtype=np.int64)
    cdef int64_t[:, ::1] h = hist
    cdef uint8_t[::1] row = np.zeros(n, dtype=np.uint8)
    cdef uint64_t base = mix64(seed + GAMMA)
    cdef int64_t i
    cdef int j, y
    with nogil:
        for i in range(count):
            sample_row(model, n, n_p, param, stream_key(base, start + i), k, &row[0])
            y = 0
            for j in range(k):
                y += row[j]
                h[j, y] += 1
    return hist


def min_lookup(int model, int n, int n_p, double param, uint64_t seed,
               int64_t start, int64_t count, const double[:, ::1] table):
    cdef int k = table.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] res = np.empty(count, dtype=np.float64)
    cdef double[::1] out = res
    cdef uint8_t[::1] row = np.zeros(n, dtype=np.uint8)
    cdef uint64_t base = mix64(seed + GAMMA)
    cdef int64_t i
    cdef int j, y
    cdef double z, v
    with nogil:
        for i in range(count):
            sample_row(model, n, n_p, param, stream_key(base, start + i), k, &row[0])
            y = 0
            z = 2.0
            for j in range(k):
                y += row[j]
                v = table[j, y]
                if v < z:
                    z = v
            out[i] = z
    return res
