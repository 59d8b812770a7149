# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same signatures as ``_pykernels``."""

import numpy as np
from libc.math cimport cos, sin


cdef inline void _plate(double delta, double theta, double* w) noexcept nogil:
    cdef double s = sin(0.5 * delta)
    w[0] = cos(0.5 * delta)
    w[1] = -s * cos(2.0 * theta)
    w[2] = -s * sin(2.0 * theta)
    w[3] = 0.0


cdef inline void _mul(const double* a, const double* b, double* out) noexcept nogil:
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + b[0] * a[1] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] + b[0] * a[2] + a[3] * b[1] - a[1] * b[3]
    out[3] = a[0] * b[3] + b[0] * a[3] + a[1] * b[2] - a[2] * b[1]


cdef inline void _triple(double t1, double t2, double t3,
                         double d1, double d2, double d3, double* u) noexcept nogil:
    cdef double w1[4]
    cdef double w2[4]
    cdef double w3[4]
    cdef double tmp[4]
    _plate(d1, t1, w1)
    _plate(d2, t2, w2)
    _plate(d3, t3, w3)
    _mul(w3, w2, tmp)
    _mul(tmp, w1, u)


cdef inline void _accumulate(const double* u, double complex r00, double complex r01,
                             double complex r10, double complex r11,
                             double complex* acc) noexcept nogil:
    # U = [[u0 - i u3, -i u1 - u2], [-i u1 + u2, u0 + i u3]]
    cdef double complex a = u[0] - 1j * u[3]
    cdef double complex b = -1j * u[1] - u[2]
    cdef double complex c = -1j * u[1] + u[2]
    cdef double complex d = u[0] + 1j * u[3]
    cdef double complex m00 = a * r00 + b * r10
    cdef double complex m01 = a * r01 + b * r11
    cdef double complex m10 = c * r00 + d * r10
    cdef double complex m11 = c * r01 + d * r11
    acc[0] += m00 * a.conjugate() + m01 * b.conjugate()
    acc[1] += m00 * c.conjugate() + m01 * d.conjugate()
    acc[2] += m10 * a.conjugate() + m11 * b.conjugate()
    acc[3] += m10 * c.conjugate() + m11 * d.conjugate()


def stack_pauli(theta1, theta2, theta3, delta, offset):
    cdef double[::1] t1 = np.ascontiguousarray(theta1, dtype=np.float64)
    cdef double[::1] t2 = np.ascontiguousarray(theta2, dtype=np.float64)
    cdef double[::1] t3 = np.ascontiguousarray(theta3, dtype=np.float64)
    cdef double d1 = delta[0], d2 = delta[1], d3 = delta[2]
    cdef double o1 = offset[0], o2 = offset[1], o3 = offset[2]
    cdef Py_ssize_t q, n = t1.shape[0]
    out = np.empty((n, 4))
    cdef double[:, ::1] res = out
    with nogil:
        for q in range(n):
            _triple(t1[q] + o1, t2[q] + o2, t3[q] + o3, d1, d2, d3, &res[q, 0])
    return out


def average_conjugation(u, rho):
    cdef double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double complex[:, ::1] r = np.ascontiguousarray(rho, dtype=np.complex128)
    cdef double complex acc[4]
    cdef Py_ssize_t q, n = uu.shape[0]
    acc[0] = acc[1] = acc[2] = acc[3] = 0
    with nogil:
        for q in range(n):
            _accumulate(&uu[q, 0], r[0, 0], r[0, 1], r[1, 0], r[1, 1], acc)
    return np.array([[acc[0], acc[1]], [acc[2], acc[3]]]) / n


def monte_carlo_outputs(theta, deltas, offsets, rho):
    cdef double[:, ::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef double[:, ::1] dl = np.ascontiguousarray(deltas, dtype=np.float64)
    cdef double[:, ::1] of = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef double complex[:, ::1] r = np.ascontiguousarray(rho, dtype=np.complex128)
    cdef Py_ssize_t nr = dl.shape[0], nq = th.shape[1], k, q
    cdef double u[4]
    cdef double complex acc[4]
    out = np.empty((nr, 2, 2), dtype=np.complex128)
    cdef double complex[:, :, ::1] res = out
    with nogil:
        for k in range(nr):
            acc[0] = acc[1] = acc[2] = acc[3] = 0
            for q in range(nq):
                _triple(th[0, q] + of[k, 0], th[1, q] + of[k, 1], th[2, q] + of[k, 2],
                        dl[k, 0], dl[k, 1], dl[k, 2], u)
                _accumulate(u, r[0, 0], r[0, 1], r[1, 0], r[1, 1], acc)
            res[k, 0, 0] = acc[0] / nq
            res[k, 0, 1] = acc[1] / nq
            res[k, 1, 0] = acc[2] / nq
            res[k, 1, 1] = acc[3] / nq
    return out


def unit_norm_jacobian(coeffs, basis):
    cdef double[:, ::1] c = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(basis, dtype=np.float64)
    cdef Py_ssize_t nq = b.shape[0], nk = b.shape[1], q, i, k
    cdef double v, norm2
    resid = np.empty(nq)
    jac = np.empty((nq, 4 * nk))
    cdef double[::1] rr = resid
    cdef double[:, ::1] jj = jac
    with nogil:
        for q in range(nq):
            norm2 = 0.0
            for i in range(4):
                v = 0.0
                for k in range(nk):
                    v = v + c[i, k] * b[q, k]
                norm2 = norm2 + v * v
                for k in range(nk):
                    jj[q, i * nk + k] = 2.0 * v * b[q, k]
            rr[q] = norm2 - 1.0
    return resid, jac
