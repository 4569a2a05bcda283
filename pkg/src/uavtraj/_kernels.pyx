# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: dense-layer forward/backward, fused adaptive-moment
updates, and segment-vs-building blockage tests.

Mirrors the signatures of uavtraj._kernels_pure.
"""

cimport cython
from libc.math cimport fabs, sqrt, tanh

import numpy as np

cimport numpy as cnp

from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

LINEAR = 0
RELU = 1
TANH = 2

cdef double _CHORD_TOL = 1e-12
cdef double _PARALLEL_TOL = 1e-15


cdef void _gemm_abt(const double[:, ::1] a, const double[:, ::1] b,
                    double[:, ::1] out) noexcept nogil:
    # out (m, n) = a (m, k) @ b (n, k)^T, all row-major
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[0]
    cdef double alpha = 1.0, beta = 0.0
    if m == 0 or n == 0 or k == 0:
        return
    dgemm("T", "N", &n, &m, &k, &alpha, <double*><void*>&b[0, 0], &k,
          <double*><void*>&a[0, 0], &k, &beta, &out[0, 0], &n)


cdef void _gemm_atb(const double[:, ::1] a, const double[:, ::1] b,
                    double[:, ::1] out) noexcept nogil:
    # out (m, n) = a (k, m)^T @ b (k, n), all row-major
    cdef int k = a.shape[0], m = a.shape[1], n = b.shape[1]
    cdef double alpha = 1.0, beta = 0.0
    if m == 0 or n == 0 or k == 0:
        return
    dgemm("N", "T", &n, &m, &k, &alpha, <double*><void*>&b[0, 0], &n,
          <double*><void*>&a[0, 0], &m, &beta, &out[0, 0], &n)


cdef void _gemm_ab(const double[:, ::1] a, const double[:, ::1] b,
                   double[:, ::1] out) noexcept nogil:
    # out (m, n) = a (m, k) @ b (k, n), all row-major
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    cdef double alpha = 1.0, beta = 0.0
    if m == 0 or n == 0 or k == 0:
        return
    dgemm("N", "N", &n, &m, &k, &alpha, <double*><void*>&b[0, 0], &n,
          <double*><void*>&a[0, 0], &k, &beta, &out[0, 0], &n)


def dense_act_forward(const double[:, ::1] x, const double[:, ::1] w,
                      const double[::1] b, int act):
    """act(x @ w.T + b); x is (batch, n_in), w is (n_out, n_in)."""
    cdef Py_ssize_t batch = x.shape[0], nout = w.shape[0]
    out_arr = np.empty((batch, nout), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double z
    with nogil:
        _gemm_abt(x, w, out)
        for i in range(batch):
            for j in range(nout):
                z = out[i, j] + b[j]
                if act == 1:
                    out[i, j] = z if z > 0.0 else 0.0
                elif act == 2:
                    out[i, j] = tanh(z)
                else:
                    out[i, j] = z
    return out_arr


def dense_act_backward(const double[:, ::1] delta, const double[:, ::1] a,
                       const double[:, ::1] x, const double[:, ::1] w, int act):
    """Backward pass of dense_act_forward; returns (dw, db, dx)."""
    cdef Py_ssize_t batch = delta.shape[0], nout = delta.shape[1]
    cdef Py_ssize_t nin = w.shape[1]
    dpre_arr = np.empty((batch, nout), dtype=np.float64)
    gw_arr = np.empty((nout, nin), dtype=np.float64)
    gb_arr = np.zeros(nout, dtype=np.float64)
    gx_arr = np.empty((batch, nin), dtype=np.float64)
    cdef double[:, ::1] dpre = dpre_arr
    cdef double[:, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef double[:, ::1] gx = gx_arr
    cdef Py_ssize_t i, j
    cdef double d
    with nogil:
        for i in range(batch):
            for j in range(nout):
                d = delta[i, j]
                if act == 1:
                    d = d if a[i, j] > 0.0 else 0.0
                elif act == 2:
                    d = d * (1.0 - a[i, j] * a[i, j])
                dpre[i, j] = d
                gb[j] += d
        _gemm_atb(dpre, x, gw)
        _gemm_ab(dpre, w, gx)
    return gw_arr, gb_arr, gx_arr


def adam_update(double[::1] p, const double[::1] g, double[::1] m, double[::1] v,
                long t, double lr, double beta1, double beta2, double eps):
    """In-place adaptive-moment step on flat float64 views p, m, v."""
    cdef Py_ssize_t n = p.shape[0]
    cdef double bc1 = 1.0 - beta1 ** t
    cdef double bc2 = 1.0 - beta2 ** t
    cdef double mi, vi
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            mi = beta1 * m[i] + (1.0 - beta1) * g[i]
            vi = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i])
            m[i] = mi
            v[i] = vi
            p[i] -= lr * (mi / bc1) / (sqrt(vi / bc2) + eps)


cdef bint _one_segment_blocked(double px, double py, double pz,
                               double qx, double qy, double qz,
                               const double[:, ::1] boxes) noexcept nogil:
    cdef Py_ssize_t nbox = boxes.shape[0]
    cdef Py_ssize_t i, axis
    cdef double t0, t1, lo, hi, o, d, ta, tb, tmp
    cdef bint hit
    for i in range(nbox):
        t0 = 0.0
        t1 = 1.0
        hit = True
        for axis in range(3):
            if axis == 0:
                lo = boxes[i, 0]; hi = boxes[i, 1]; o = px; d = qx - px
            elif axis == 1:
                lo = boxes[i, 2]; hi = boxes[i, 3]; o = py; d = qy - py
            else:
                lo = 0.0; hi = boxes[i, 4]; o = pz; d = qz - pz
            if fabs(d) < _PARALLEL_TOL:
                if o <= lo or o >= hi:
                    hit = False
                    break
            else:
                ta = (lo - o) / d
                tb = (hi - o) / d
                if ta > tb:
                    tmp = ta; ta = tb; tb = tmp
                if ta > t0:
                    t0 = ta
                if tb < t1:
                    t1 = tb
                if t0 >= t1:
                    hit = False
                    break
        if hit and (t1 - t0) > _CHORD_TOL:
            return True
    return False


def segment_blocked(p, q, const double[:, ::1] boxes):
    """Whether the open segment p-q crosses the interior of any box."""
    cdef double px = p[0], py = p[1], pz = p[2]
    cdef double qx = q[0], qy = q[1], qz = q[2]
    return bool(_one_segment_blocked(px, py, pz, qx, qy, qz, boxes))


def segments_blocked(const double[:, ::1] p, const double[:, ::1] q,
                     const double[:, ::1] boxes):
    """Batch variant of segment_blocked; returns a uint8 vector."""
    cdef Py_ssize_t nseg = p.shape[0]
    out_arr = np.zeros(nseg, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(nseg):
            if _one_segment_blocked(p[i, 0], p[i, 1], p[i, 2],
                                    q[i, 0], q[i, 1], q[i, 2], boxes):
                out[i] = 1
    return out_arr


def points_in_footprints(const double[:, ::1] xy, const double[:, ::1] boxes):
    """Whether each 2-D point lies strictly inside any box footprint."""
    cdef Py_ssize_t npts = xy.shape[0], nbox = boxes.shape[0]
    out_arr = np.zeros(npts, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double x, y
    with nogil:
        for i in range(npts):
            x = xy[i, 0]
            y = xy[i, 1]
            for j in range(nbox):
                if boxes[j, 0] < x < boxes[j, 1] and boxes[j, 2] < y < boxes[j, 3]:
                    out[i] = 1
                    break
    return out_arr
