# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched SU(2) kernels; same contracts as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, acos, cos, sin, fabs, M_PI

cnp.import_array()

cdef double DEGENERATE_TOL = 1e-8


cdef inline void _mul(const double* p, const double* q, double* o) noexcept nogil:
    cdef double a, b, c, d, n
    a = p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3]
    b = p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2]
    c = p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1]
    d = p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0]
    n = sqrt(a * a + b * b + c * c + d * d)
    o[0] = a / n
    o[1] = b / n
    o[2] = c / n
    o[3] = d / n


cdef inline void _pow(const double* q, double t, double* o) noexcept nogil:
    cdef double a = q[0]
    cdef double vn, phi, ang, s
    cdef double ax = 1.0, ay = 0.0, az = 0.0
    if a > 1.0:
        a = 1.0
    elif a < -1.0:
        a = -1.0
    vn = sqrt(q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if a <= -1.0 + 0.5 * DEGENERATE_TOL:
        phi = M_PI
    else:
        phi = acos(a)
    if vn > 1e-300:
        ax = q[1] / vn
        ay = q[2] / vn
        az = q[3] / vn
    ang = phi * t
    s = sin(ang)
    o[0] = cos(ang)
    o[1] = s * ax
    o[2] = s * ay
    o[3] = s * az


def qmul(p, q):
    p, q = np.broadcast_arrays(np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64))
    shape = p.shape
    cdef const double[:, ::1] pv = np.ascontiguousarray(p.reshape(-1, 4))
    cdef const double[:, ::1] qv = np.ascontiguousarray(q.reshape(-1, 4))
    out = np.empty((pv.shape[0], 4))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, n = pv.shape[0]
    with nogil:
        for i in range(n):
            _mul(&pv[i, 0], &qv[i, 0], &ov[i, 0])
    return out.reshape(shape)


def qconj(q):
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def qpow(q, t):
    q = np.asarray(q, dtype=np.float64)
    tt = np.broadcast_to(np.asarray(t, dtype=np.float64), q.shape[:-1])
    shape = np.broadcast_shapes(q.shape[:-1], tt.shape) + (4,)
    q = np.broadcast_to(q, shape)
    cdef const double[:, ::1] qv = np.ascontiguousarray(q.reshape(-1, 4))
    cdef const double[::1] tv = np.ascontiguousarray(np.broadcast_to(tt, shape[:-1]).reshape(-1))
    out = np.empty((qv.shape[0], 4))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, n = qv.shape[0]
    with nogil:
        for i in range(n):
            _pow(&qv[i, 0], tv[i], &ov[i, 0])
    return out.reshape(shape)


def slerp_mid(u, v):
    u, v = np.broadcast_arrays(np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64))
    shape = u.shape
    cdef const double[:, ::1] uv = np.ascontiguousarray(u.reshape(-1, 4))
    cdef const double[:, ::1] vv = np.ascontiguousarray(v.reshape(-1, 4))
    out = np.empty((uv.shape[0], 4))
    cdef double[:, ::1] ov = out
    cdef double uc[4]
    cdef double w[4]
    cdef double r[4]
    cdef Py_ssize_t i, n = uv.shape[0]
    with nogil:
        for i in range(n):
            uc[0] = uv[i, 0]
            uc[1] = -uv[i, 1]
            uc[2] = -uv[i, 2]
            uc[3] = -uv[i, 3]
            _mul(uc, &vv[i, 0], w)
            _pow(w, 0.5, r)
            _mul(&uv[i, 0], r, &ov[i, 0])
    return out.reshape(shape)


def qflux(q):
    q = np.asarray(q, dtype=np.float64)
    return np.arccos(np.clip(q[..., 0], -1.0, 1.0))


def eigenframe(q):
    q = np.asarray(q, dtype=np.float64)
    shape = q.shape
    cdef const double[:, ::1] qv = np.ascontiguousarray(q.reshape(-1, 4))
    eta = np.empty((qv.shape[0], 4))
    phi = np.empty(qv.shape[0])
    cdef double[:, ::1] ev = eta
    cdef double[::1] pv = phi
    cdef Py_ssize_t i, n = qv.shape[0]
    cdef double a, vn, nx, ny, nz, w, nn
    with nogil:
        for i in range(n):
            a = qv[i, 0]
            if a > 1.0:
                a = 1.0
            elif a < -1.0:
                a = -1.0
            vn = sqrt(qv[i, 1] * qv[i, 1] + qv[i, 2] * qv[i, 2] + qv[i, 3] * qv[i, 3])
            if a <= -1.0 + 0.5 * DEGENERATE_TOL:
                pv[i] = M_PI
            else:
                pv[i] = acos(a)
            if vn > 1e-300:
                nx = qv[i, 1] / vn
                ny = qv[i, 2] / vn
                nz = qv[i, 3] / vn
            else:
                nx = 1.0
                ny = 0.0
                nz = 0.0
            if fabs(qv[i, 0]) >= 1.0 - 1e-15 and vn < 1e-14:
                ev[i, 0] = 1.0
                ev[i, 1] = 0.0
                ev[i, 2] = 0.0
                ev[i, 3] = 0.0
                continue
            w = 1.0 + nx
            nn = sqrt(w * w + nz * nz + ny * ny)
            if nn < 1e-12:
                ev[i, 0] = 0.0
                ev[i, 1] = 0.0
                ev[i, 2] = 1.0
                ev[i, 3] = 0.0
            else:
                ev[i, 0] = w / nn
                ev[i, 1] = 0.0
                ev[i, 2] = -nz / nn
                ev[i, 3] = ny / nn
    return eta.reshape(shape), phi.reshape(shape[:-1])
