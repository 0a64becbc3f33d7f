# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; a line-for-line mirror of _pykernels.

Randomness is consumed exclusively through next-double uniforms pulled
straight from the Generator's bit stream, in the same order as the pure
backend, so both produce identical output from the same seed.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp
from libc.stdlib cimport calloc, free, malloc
from numpy.random cimport bitgen_t

cnp.import_array()

PROGENY_CAP_DEFAULT = 10_000_000


def backend_name():
    return "cython"


cdef bitgen_t *_bitgen(object rng) except NULL:
    return <bitgen_t *> PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")


cdef inline double _next_double(bitgen_t *bg) noexcept nogil:
    return bg.next_double(bg.state)


cdef inline long _poisson_small(bitgen_t *bg, double mu) noexcept nogil:
    cdef double u = _next_double(bg)
    cdef double p = exp(-mu)
    cdef double c = p
    cdef long k = 0
    while u > c:
        k += 1
        p *= mu / k
        c += p
        if p <= 0.0 or k > 10000:
            break
    return k


cdef inline long _uniform_address(bitgen_t *bg, long m) noexcept nogil:
    cdef long a = <long> (_next_double(bg) * m) + 1
    return m if a > m else a


cdef inline long _progeny(bitgen_t *bg, double mu, long cap, int *truncated) noexcept nogil:
    cdef long alive = 1
    cdef long total = 0
    while alive > 0:
        total += 1
        if total > cap:
            truncated[0] = 1
            return cap
        alive += _poisson_small(bg, mu) - 1
    truncated[0] = 0
    return total


cdef inline long _block_displacement(bitgen_t *bg, long x, unsigned char *table) noexcept nogil:
    cdef long total = 0
    cdef long pos, j
    for j in range(x - 1):
        pos = _uniform_address(bg, x) - 1
        while table[pos]:
            pos += 1
            if pos == x:
                pos = 0
            total += 1
        table[pos] = 1
    for j in range(x):
        table[j] = 0
    return total


def sample_borel_batch(double mu, Py_ssize_t count, long cap, object rng):
    """Borel-distributed batch via branching-process totals.

    Returns (values int64 array, number of capped draws).
    """
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(count, dtype=np.int64)
    cdef bitgen_t *bg = _bitgen(rng)
    cdef long truncated = 0
    cdef int t = 0
    cdef Py_ssize_t i
    with rng.bit_generator.lock:
        for i in range(count):
            out[i] = _progeny(bg, mu, cap, &t)
            truncated += t
    return out, truncated


def sample_displacements_for_sizes(object sizes, object rng):
    """For each size x draw the total displacement of x - 1 balls in a
    circular table of x cells."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] xs = np.ascontiguousarray(sizes, dtype=np.int64)
    cdef Py_ssize_t count = xs.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(count, dtype=np.int64)
    cdef bitgen_t *bg = _bitgen(rng)
    cdef long bufcap = 1024
    cdef long x
    cdef Py_ssize_t i
    cdef unsigned char *table = <unsigned char *> calloc(bufcap, 1)
    if table == NULL:
        raise MemoryError
    try:
        with rng.bit_generator.lock:
            for i in range(count):
                x = xs[i]
                if x > bufcap:
                    bufcap = max(2 * bufcap, x)
                    free(table)
                    table = <unsigned char *> calloc(bufcap, 1)
                    if table == NULL:
                        raise MemoryError
                out[i] = _block_displacement(bg, x, table)
    finally:
        free(table)
    return out


def sample_pair_batch(double mu, Py_ssize_t count, long cap, object rng):
    """Draw (size, displacement) pairs: size from the branching-process
    total, then the displacement of size - 1 balls in a size-cell table.

    Draws interleave per pair.  Returns (x, y, truncated_count).
    """
    cdef cnp.ndarray[cnp.int64_t, ndim=1] x_out = np.empty(count, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] y_out = np.empty(count, dtype=np.int64)
    cdef bitgen_t *bg = _bitgen(rng)
    cdef long truncated = 0
    cdef long bufcap = 1024
    cdef long x
    cdef int t = 0
    cdef Py_ssize_t i
    cdef unsigned char *table = <unsigned char *> calloc(bufcap, 1)
    if table == NULL:
        raise MemoryError
    try:
        with rng.bit_generator.lock:
            for i in range(count):
                x = _progeny(bg, mu, cap, &t)
                truncated += t
                if x > bufcap:
                    bufcap = max(2 * bufcap, x)
                    free(table)
                    table = <unsigned char *> calloc(bufcap, 1)
                    if table == NULL:
                        raise MemoryError
                x_out[i] = x
                y_out[i] = _block_displacement(bg, x, table)
    finally:
        free(table)
    return x_out, y_out, truncated


def insert_displacements(long m, object addresses):
    """Insert all addresses (1-based) into a circular table of m cells.

    Returns (per-ball displacements, per-ball final cells 1-based,
    occupancy bool array, total displacement).
    """
    cdef cnp.ndarray[cnp.int64_t, ndim=1] addr = np.ascontiguousarray(addresses, dtype=np.int64)
    cdef Py_ssize_t n = addr.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] disp = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] final = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] occ = np.zeros(m, dtype=np.uint8)
    cdef long total = 0
    cdef long pos, d
    cdef Py_ssize_t j
    for j in range(n):
        pos = addr[j] - 1
        d = 0
        while occ[pos]:
            pos += 1
            if pos == m:
                pos = 0
            d += 1
        occ[pos] = 1
        disp[j] = d
        final[j] = pos + 1
        total += d
    return disp, final, occ.astype(bool), total


def enumerate_displacement_counts(long n):
    """Visit every address sequence of length n on a table of n + 1
    cells and tally total displacements.

    Returns (counts indexed by displacement, number of sequences visited).
    """
    cdef long m = n + 1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(n * (n - 1) // 2 + 1, dtype=np.int64)
    if n == 0:
        counts[0] = 1
        return counts, 1
    cdef long *a = <long *> malloc(n * sizeof(long))
    cdef long *z = <long *> calloc(m + 1, sizeof(long))
    if a == NULL or z == NULL:
        free(a)
        free(z)
        raise MemoryError
    cdef long sigma, w, wsum, wmin, e
    cdef long i, j
    cdef long long visited = 0
    try:
        for j in range(n):
            a[j] = 1
        z[1] = n
        while True:
            # Displacement from the address multiset, one O(m) pass.
            # With w_i = sigma_i - i the empty cell is the first
            # minimiser of w over 1..m; unrolling the circle there
            # gives the total as sum(w) - m*min(w) - argmin(w) + 1.
            sigma = z[1]
            w = sigma - 1
            wsum = w
            wmin = w
            e = 1
            for i in range(2, m + 1):
                sigma += z[i]
                w = sigma - i
                wsum += w
                if w < wmin:
                    wmin = w
                    e = i
            counts[wsum - m * wmin - e + 1] += 1
            visited += 1
            j = n - 1
            while j >= 0 and a[j] == m:
                z[m] -= 1
                z[1] += 1
                a[j] = 1
                j -= 1
            if j < 0:
                break
            z[a[j]] -= 1
            a[j] += 1
            z[a[j]] += 1
    finally:
        free(a)
        free(z)
    return counts, int(visited)
