# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the slack-eliminated augmented Lagrangian.

Signatures and results match :mod:`isacpack._pykernels`.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _phi(double a, double b, double c, double *dphi) noexcept nogil:
    if a >= -b / c:
        dphi[0] = b + c * a
        return b * a + 0.5 * c * a * a
    dphi[0] = 0.0
    return -0.5 * b * b / c


def lagrangian_value_grad(const double[::1] z, Py_ssize_t M, Py_ssize_t N,
                          const double[::1] gains, const double[::1] s0,
                          double d, double eps2,
                          const double[::1] lam, const double[::1] v, double mu,
                          double[::1] grad):
    """Value of the augmented Lagrangian; its gradient is written into ``grad``."""
    cdef Py_ssize_t k, l, n, p = 0
    cdef double f = 0.0, q, diff, dphi, coef, val
    with nogil:
        for n in range(M * N):
            f += z[n] * z[n]
            grad[n] = 2.0 * z[n]
        for l in range(M):
            for k in range(M):
                if k == l:
                    continue
                q = 0.0
                for n in range(N):
                    diff = z[k * N + n] - z[l * N + n]
                    q += gains[n] * diff * diff
                val = _phi(d - q, lam[p], mu, &dphi)
                f += val
                if dphi != 0.0:
                    coef = -2.0 * dphi
                    for n in range(N):
                        diff = coef * gains[n] * (z[k * N + n] - z[l * N + n])
                        grad[k * N + n] += diff
                        grad[l * N + n] -= diff
                p += 1
        for k in range(M):
            q = 0.0
            for n in range(N):
                diff = z[k * N + n] - s0[n]
                q += diff * diff
            val = _phi(q - eps2, v[k], mu, &dphi)
            f += val
            if dphi != 0.0:
                for n in range(N):
                    grad[k * N + n] += 2.0 * dphi * (z[k * N + n] - s0[n])
    return f


def pair_sq_distances(const double[:, ::1] S, const double[::1] gains):
    """Weighted squared distances for ordered pairs, in the multiplier order."""
    cdef Py_ssize_t M = S.shape[0], N = S.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(M * (M - 1))
    cdef double[::1] o = out
    cdef Py_ssize_t k, l, n, p = 0
    cdef double q, diff
    with nogil:
        for l in range(M):
            for k in range(M):
                if k == l:
                    continue
                q = 0.0
                for n in range(N):
                    diff = S[k, n] - S[l, n]
                    q += gains[n] * diff * diff
                o[p] = q
                p += 1
    return out
