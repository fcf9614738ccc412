# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, fabs

cnp.import_array()


def ordered_product(factors):
    cdef double complex[:, :, ::1] f = np.ascontiguousarray(factors, dtype=np.complex128)
    cdef Py_ssize_t n = f.shape[0], d = f.shape[1]
    cdef Py_ssize_t k, i, j, l
    cdef double complex acc
    out_arr = np.eye(d, dtype=np.complex128)
    tmp_arr = np.empty((d, d), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex[:, ::1] tmp = tmp_arr
    for k in range(n):
        for i in range(d):
            for j in range(d):
                acc = 0
                for l in range(d):
                    acc = acc + f[k, i, l] * out[l, j]
                tmp[i, j] = acc
        for i in range(d):
            for j in range(d):
                out[i, j] = tmp[i, j]
    return out_arr


cdef inline double _arg_ratio(double complex a, double complex b) nogil:
    # angle(a / b) for |b| > 0
    cdef double complex q = a * b.conjugate()
    return atan2(q.imag, q.real)


def track_phases(eigvals, double ambiguity_tol=1e-12):
    cdef double complex[:, ::1] ev = np.ascontiguousarray(eigvals, dtype=np.complex128)
    cdef Py_ssize_t n = ev.shape[0]
    theta_arr = np.empty((n, 2))
    amb_arr = np.zeros(n, dtype=np.uint8)
    cdef double[:, ::1] theta = theta_arr
    cdef unsigned char[::1] amb = amb_arr
    cdef double complex p0 = ev[0, 0], p1 = ev[0, 1], e0, e1
    cdef double d00, d11, d10, d01, keep, swap
    cdef Py_ssize_t k
    theta[0, 0] = atan2(p0.imag, p0.real)
    theta[0, 1] = atan2(p1.imag, p1.real)
    for k in range(1, n):
        e0 = ev[k, 0]
        e1 = ev[k, 1]
        d00 = _arg_ratio(e0, p0)
        d11 = _arg_ratio(e1, p1)
        d10 = _arg_ratio(e1, p0)
        d01 = _arg_ratio(e0, p1)
        keep = d00 * d00 + d11 * d11
        swap = d10 * d10 + d01 * d01
        if fabs(keep - swap) <= ambiguity_tol:
            amb[k] = 1
        if keep <= swap:
            theta[k, 0] = theta[k - 1, 0] + d00
            theta[k, 1] = theta[k - 1, 1] + d11
            p0 = e0
            p1 = e1
        else:
            theta[k, 0] = theta[k - 1, 0] + d10
            theta[k, 1] = theta[k - 1, 1] + d01
            p0 = e1
            p1 = e0
    return theta_arr, amb_arr.astype(bool)
