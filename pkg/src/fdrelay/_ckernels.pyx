# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops; see ``_pykernels`` for the reference numpy versions."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _nearest(double v, const double[::1] levels) noexcept nogil:
    cdef Py_ssize_t best = 0, g
    cdef double d, dbest = (v - levels[0]) * (v - levels[0])
    for g in range(1, levels.shape[0]):
        d = (v - levels[g]) * (v - levels[g])
        if d < dbest:
            dbest = d
            best = g
    return best


def quantize_labels(const double complex[::1] y, const double[::1] levels):
    cdef Py_ssize_t n = y.shape[0], i, side = levels.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _nearest(y[i].real, levels) * side + _nearest(y[i].imag, levels)
    return out


def feedback_detect(const double complex[:, :, ::1] base,
                    const double complex[:, :, ::1] coupling,
                    Py_ssize_t delay,
                    const double[::1] levels):
    cdef Py_ssize_t T = base.shape[0], n = base.shape[1], K = base.shape[2]
    cdef Py_ssize_t side = levels.shape[0]
    cdef Py_ssize_t t, i, k, j, li, lq
    cdef double complex z
    labels = np.empty((T, n, K), dtype=np.int64)
    symbols = np.empty((T, n, K), dtype=np.complex128)
    cdef long long[:, :, ::1] lab = labels
    cdef double complex[:, :, ::1] sym = symbols
    with nogil:
        for t in range(T):
            for i in range(n):
                for k in range(K):
                    z = base[t, i, k]
                    if i >= delay:
                        for j in range(K):
                            z = z + coupling[t, k, j] * sym[t, i - delay, j]
                    li = _nearest(z.real, levels)
                    lq = _nearest(z.imag, levels)
                    lab[t, i, k] = li * side + lq
                    sym[t, i, k] = levels[li] + 1j * levels[lq]
    return labels, symbols
