# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: batched Gaussian-mixture density evaluation.

Mirrors the signatures of ``hybridclust._kernels_py``. The quadrature and
importance-sampling engines and the EM E-step funnel essentially all of
their runtime through these two functions.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

DEF MAX_COMPONENTS = 256


def component_logpdfs(points, means, inv_chols, log_norms, out=None):
    """Per-component Gaussian log-densities, shape (n, K)."""
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] mu = np.ascontiguousarray(means, dtype=np.float64)
    cdef const double[:, :, ::1] linv = np.ascontiguousarray(inv_chols, dtype=np.float64)
    cdef const double[::1] ln = np.ascontiguousarray(log_norms, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0], d = pts.shape[1], K = mu.shape[0]
    if out is None:
        out = np.empty((n, K))
    cdef double[:, ::1] res = out
    cdef Py_ssize_t i, k, r, c
    cdef double q, yr
    with nogil:
        for i in range(n):
            for k in range(K):
                q = 0.0
                for r in range(d):
                    yr = 0.0
                    for c in range(r + 1):
                        yr += linv[k, r, c] * (pts[i, c] - mu[k, c])
                    q += yr * yr
                res[i, k] = ln[k] - 0.5 * q
    return out


def mixture_logpdf(points, means, inv_chols, log_norms, log_coefs, out=None):
    """Mixture log-density via log-sum-exp over components, shape (n,)."""
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] mu = np.ascontiguousarray(means, dtype=np.float64)
    cdef const double[:, :, ::1] linv = np.ascontiguousarray(inv_chols, dtype=np.float64)
    cdef const double[::1] ln = np.ascontiguousarray(log_norms, dtype=np.float64)
    cdef const double[::1] lw = np.ascontiguousarray(log_coefs, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0], d = pts.shape[1], K = mu.shape[0]
    if K > MAX_COMPONENTS:
        raise ValueError(f"too many mixture components for the compiled kernel: {K}")
    if out is None:
        out = np.empty(n)
    cdef double[::1] res = out
    cdef Py_ssize_t i, k, r, c
    cdef double q, yr, m, s
    cdef double buf[MAX_COMPONENTS]
    with nogil:
        for i in range(n):
            m = -1e308
            for k in range(K):
                q = 0.0
                for r in range(d):
                    yr = 0.0
                    for c in range(r + 1):
                        yr += linv[k, r, c] * (pts[i, c] - mu[k, c])
                    q += yr * yr
                buf[k] = lw[k] + ln[k] - 0.5 * q
                if buf[k] > m:
                    m = buf[k]
            s = 0.0
            for k in range(K):
                s += exp(buf[k] - m)
            res[i] = m + log(s)
    return out
