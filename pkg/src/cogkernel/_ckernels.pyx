# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels.  Must stay behaviourally identical to
``_pykernels``; the test suite checks both against the same oracles."""

from libc.math cimport log, pow, exp, INFINITY
from libc.stdlib cimport malloc, free

cdef double _bla(object times, double now, double d, double floor_ms) except? -1e308:
    cdef double total = 0.0
    cdef double age
    cdef double t
    cdef Py_ssize_t n = 0
    for x in times:
        t = x
        age = now - t
        if floor_ms > 0.0:
            if age < floor_ms:
                age = floor_ms
        elif age <= 0.0:
            raise ValueError("access at or after evaluation time")
        total += pow(age / 1000.0, -d)
        n += 1
    if n == 0:
        return -INFINITY
    return log(total)


def bla(times, double now, double d, double floor_ms=0.0):
    return _bla(times, now, d, floor_ms)


def bla_batch(histories, double now, double d, double floor_ms=0.0):
    return [_bla(h, now, d, floor_ms) for h in histories]


cdef Py_ssize_t _lower(double *a, Py_ssize_t n, double x):
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def episode_scores(episode_times, intervals):
    """Count, per episode time, how many intervals [start, end) contain it.

    ``episode_times`` must be sorted ascending."""
    cdef Py_ssize_t n = len(episode_times)
    cdef Py_ssize_t i, lo, hi
    cdef double s, e
    cdef double *ts = <double *>malloc((n + 1) * sizeof(double))
    cdef long *diff = <long *>malloc((n + 1) * sizeof(long))
    if ts == NULL or diff == NULL:
        free(ts)
        free(diff)
        raise MemoryError()
    try:
        for i in range(n):
            ts[i] = episode_times[i]
            diff[i] = 0
        diff[n] = 0
        for iv in intervals:
            s = iv[0]
            e = iv[1]
            if e <= s:
                continue
            lo = _lower(ts, n, s)
            hi = _lower(ts, n, e)
            if lo < hi:
                diff[lo] += 1
                diff[hi] -= 1
        out = [0] * n
        acc = 0
        for i in range(n):
            acc += diff[i]
            out[i] = acc
        return out
    finally:
        free(ts)
        free(diff)


def softmax_weights(values, double temperature):
    cdef Py_ssize_t n = len(values)
    cdef Py_ssize_t i
    cdef double m = -INFINITY, z = 0.0, v
    if n == 0:
        return []
    for x in values:
        v = x
        if v > m:
            m = v
    ws = [0.0] * n
    for i in range(n):
        v = exp((<double>values[i] - m) / temperature)
        ws[i] = v
        z += v
    for i in range(n):
        ws[i] = ws[i] / z
    return ws
