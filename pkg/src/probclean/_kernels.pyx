# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementation of the network's hot kernels.

Numerically equivalent to ``probclean._backend_numpy`` (same formulas, same
parameter layout); matrix products go through BLAS dgemm and the
elementwise work (activations, softmax, JSD gradient, Adam) runs in fused C
loops.  The numpy backend remains the reference; the parity tests compare
the two.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, log, sin, sqrt
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "compiled"

DEF N_CHANNELS = 5

cdef double _FLOOR = 1e-12


# ---------------------------------------------------------------------------
# BLAS helpers (row-major wrappers around column-major dgemm)
# ---------------------------------------------------------------------------

# The memoryview type double[:, ::1] only pins the last axis stride, so a
# column-block view of a wider matrix is accepted; every helper therefore
# derives the BLAS leading dimension from the actual row stride.

cdef inline int _row_stride(double[:, ::1] a) noexcept nogil:
    return <int> (a.strides[0] / sizeof(double))


cdef void _matmul(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out) noexcept nogil:
    """out = a @ b."""
    cdef int m = <int> a.shape[0], k = <int> a.shape[1], n = <int> b.shape[1]
    cdef int lda = _row_stride(a), ldb = _row_stride(b), ldo = _row_stride(out)
    cdef double one = 1.0, zero = 0.0
    # Row-major C = A*B computed as column-major C^T = B^T * A^T.
    dgemm("N", "N", &n, &m, &k, &one, &b[0, 0], &ldb, &a[0, 0], &lda, &zero, &out[0, 0], &ldo)


cdef void _matmul_at_b(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out) noexcept nogil:
    """out = a.T @ b (a is (k, m), b is (k, n))."""
    cdef int m = <int> a.shape[1], k = <int> a.shape[0], n = <int> b.shape[1]
    cdef int lda = _row_stride(a), ldb = _row_stride(b), ldo = _row_stride(out)
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "T", &n, &m, &k, &one, &b[0, 0], &ldb, &a[0, 0], &lda, &zero, &out[0, 0], &ldo)


cdef void _matmul_a_bt(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out) noexcept nogil:
    """out = a @ b.T (a is (m, k), b is (n, k))."""
    cdef int m = <int> a.shape[0], k = <int> a.shape[1], n = <int> b.shape[0]
    cdef int lda = _row_stride(a), ldb = _row_stride(b), ldo = _row_stride(out)
    cdef double one = 1.0, zero = 0.0
    dgemm("T", "N", &n, &m, &k, &one, &b[0, 0], &ldb, &a[0, 0], &lda, &zero, &out[0, 0], &ldo)


# ---------------------------------------------------------------------------
# Fused elementwise pieces
# ---------------------------------------------------------------------------

cdef inline double _sigmoid_s(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef void _add_bias_activate(
    double[:, ::1] z, double[::1] bias, double[:, ::1] a, int act
) noexcept nogil:
    """z += bias (broadcast over rows); a = activation(z)."""
    cdef Py_ssize_t i, j
    cdef double v
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            v = z[i, j] + bias[j]
            z[i, j] = v
            if act == 0:
                a[i, j] = sin(v)
            elif act == 1:
                a[i, j] = cos(v)
            elif act == 2:
                a[i, j] = v
            elif act == 3:
                a[i, j] = v if v > 0.0 else 0.0
            else:
                a[i, j] = v * _sigmoid_s(v)


cdef void _activation_grad_inplace(double[:, ::1] dz, double[:, ::1] z, int act) noexcept nogil:
    """dz *= activation'(z)."""
    cdef Py_ssize_t i, j
    cdef double v, s
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            v = z[i, j]
            if act == 0:
                dz[i, j] *= cos(v)
            elif act == 1:
                dz[i, j] *= -sin(v)
            elif act == 2:
                pass
            elif act == 3:
                if v <= 0.0:
                    dz[i, j] = 0.0
            else:
                s = _sigmoid_s(v)
                dz[i, j] *= s * (1.0 + v * (1.0 - s))


cdef void _softmax_rows(double[:, ::1] zm, double[:, ::1] q,
                        long[::1] lo_arr, long[::1] hi_arr) noexcept nogil:
    cdef Py_ssize_t i, j, s
    cdef long lo, hi
    cdef double mx, total
    for i in range(zm.shape[0]):
        for s in range(lo_arr.shape[0]):
            lo = lo_arr[s]
            hi = hi_arr[s]
            mx = zm[i, lo]
            for j in range(lo + 1, hi):
                if zm[i, j] > mx:
                    mx = zm[i, j]
            total = 0.0
            for j in range(lo, hi):
                q[i, j] = exp(zm[i, j] - mx)
                total += q[i, j]
            for j in range(lo, hi):
                q[i, j] /= total


def _slice_bounds(slices):
    lo = np.asarray([s[0] for s in slices], dtype=np.int64)
    hi = np.asarray([s[1] for s in slices], dtype=np.int64)
    return lo, hi


cdef inline double _floored(double value) noexcept nogil:
    return value if value > _FLOOR else _FLOOR


# ---------------------------------------------------------------------------
# Entry points (same contracts as the numpy backend)
# ---------------------------------------------------------------------------

def forward(list tensors, slices, x_in, bint want_trace):
    cdef cnp.ndarray x_arr = np.ascontiguousarray(x_in)
    cdef double[:, ::1] x = x_arr
    cdef Py_ssize_t b = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef int c, act

    lo_np, hi_np = _slice_bounds(slices)
    cdef long[::1] lo = lo_np
    cdef long[::1] hi = hi_np

    h_arr = np.empty((b, N_CHANNELS * d))
    cdef double[:, ::1] h = h_arr
    trace = {"x": x_arr, "z1": [], "a1": [], "z2": [], "a2": [], "z3": []} if want_trace else None

    cdef Py_ssize_t n = (<cnp.ndarray> tensors[2]).shape[1]
    cdef double[:, ::1] w1, w2, w3, z1, a1, z2, a2, z3, a3
    cdef double[::1] b1, b2, b3

    for c in range(N_CHANNELS):
        act = c
        w1 = tensors[6 * c]
        b1 = tensors[6 * c + 1]
        w2 = tensors[6 * c + 2]
        b2 = tensors[6 * c + 3]
        w3 = tensors[6 * c + 4]
        b3 = tensors[6 * c + 5]
        z1_arr = np.empty((b, d))
        a1_arr = np.empty((b, d))
        z2_arr = np.empty((b, n))
        a2_arr = np.empty((b, n))
        z3_arr = np.empty((b, d))
        z1 = z1_arr
        a1 = a1_arr
        z2 = z2_arr
        a2 = a2_arr
        z3 = z3_arr
        a3 = h[:, c * d:(c + 1) * d]
        with nogil:
            _matmul(x, w1, z1)
            _add_bias_activate(z1, b1, a1, act)
            _matmul(a1, w2, z2)
            _add_bias_activate(z2, b2, a2, act)
            _matmul(a2, w3, z3)
            _add_bias_activate(z3, b3, a3, act)
        if want_trace:
            trace["z1"].append(z1_arr)
            trace["a1"].append(a1_arr)
            trace["z2"].append(z2_arr)
            trace["a2"].append(a2_arr)
            trace["z3"].append(z3_arr)

    zm_arr = np.empty((b, d))
    q_arr = np.empty((b, d))
    cdef double[:, ::1] zm = zm_arr
    cdef double[:, ::1] q = q_arr
    cdef double[:, ::1] wm = tensors[30]
    cdef double[::1] bm = tensors[31]
    cdef Py_ssize_t i, j
    with nogil:
        _matmul(h, wm, zm)
        for i in range(b):
            for j in range(d):
                zm[i, j] += bm[j]
        _softmax_rows(zm, q, lo, hi)
    if want_trace:
        trace["h"] = h_arr
        trace["q"] = q_arr
    return q_arr, trace


def backward(list tensors, slices, dict trace, targets_in,
             mask_in, double l2_activity, list grads):
    cdef cnp.ndarray x_arr = trace["x"]
    cdef cnp.ndarray q_arr = trace["q"]
    cdef cnp.ndarray h_arr = trace["h"]
    cdef double[:, ::1] x = x_arr
    cdef double[:, ::1] q = q_arr
    cdef double[:, ::1] h = h_arr
    cdef cnp.ndarray targets_arr = np.ascontiguousarray(targets_in)
    cdef double[:, ::1] p = targets_arr

    cdef Py_ssize_t b = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]

    lo_np, hi_np = _slice_bounds(slices)
    cdef long[::1] lo = lo_np
    cdef long[::1] hi = hi_np
    cdef Py_ssize_t n_attr = lo.shape[0]

    cdef cnp.uint8_t[:, ::1] mask_mv
    cdef bint have_mask = mask_in is not None
    if have_mask:
        mask_mv = np.ascontiguousarray(mask_in, dtype=np.uint8)
    else:
        mask_mv = np.empty((1, 1), dtype=np.uint8)

    # JSD loss, its gradient wrt q, and the softmax chain, fused per slice.
    dzm_arr = np.empty((b, d))
    cdef double[:, ::1] dzm = dzm_arr
    cdef double data_loss = 0.0
    cdef Py_ssize_t i, j, s
    cdef double r, pv, qv, g, dot
    with nogil:
        for i in range(b):
            for s in range(n_attr):
                if have_mask and mask_mv[i, s]:
                    for j in range(lo[s], hi[s]):
                        dzm[i, j] = 0.0
                    continue
                dot = 0.0
                for j in range(lo[s], hi[s]):
                    pv = p[i, j]
                    qv = q[i, j]
                    r = 0.5 * (pv + qv)
                    if pv > 0.0:
                        data_loss += 0.5 * pv * log(_floored(pv) / _floored(r))
                    if qv > 0.0:
                        data_loss += 0.5 * qv * log(_floored(qv) / _floored(r))
                    g = 0.5 * log(_floored(qv) / _floored(r))
                    dzm[i, j] = g
                    dot += qv * g
                for j in range(lo[s], hi[s]):
                    dzm[i, j] = q[i, j] * (dzm[i, j] - dot)

    cdef double[:, ::1] gwm = grads[30]
    cdef double[::1] gbm = grads[31]
    dh_arr = np.empty((b, N_CHANNELS * d))
    cdef double[:, ::1] dh = dh_arr
    cdef double[:, ::1] wm = tensors[30]
    with nogil:
        _matmul_at_b(h, dzm, gwm)
        for j in range(d):
            gbm[j] = 0.0
        for i in range(b):
            for j in range(d):
                gbm[j] += dzm[i, j]
        _matmul_a_bt(dzm, wm, dh)

    cdef double penalty = 0.0
    cdef int c, act
    cdef Py_ssize_t n
    cdef double[:, ::1] w2, w3, z1, a1, z2, a2, z3
    cdef double[:, ::1] gw1, gw2, gw3
    cdef double[::1] gb1, gb2, gb3
    cdef double[:, ::1] dz3, da2, da1
    cdef double acc

    for c in range(N_CHANNELS):
        act = c
        w2 = tensors[6 * c + 2]
        w3 = tensors[6 * c + 4]
        z1 = trace["z1"][c]
        a1 = trace["a1"][c]
        z2 = trace["z2"][c]
        a2 = trace["a2"][c]
        z3 = trace["z3"][c]
        gw1 = grads[6 * c]
        gb1 = grads[6 * c + 1]
        gw2 = grads[6 * c + 2]
        gb2 = grads[6 * c + 3]
        gw3 = grads[6 * c + 4]
        gb3 = grads[6 * c + 5]

        n = z2.shape[1]
        dz3 = dh[:, c * d:(c + 1) * d]
        da2_arr = np.empty((b, n))
        da2 = da2_arr
        da1_arr = np.empty((b, d))
        da1 = da1_arr
        with nogil:
            _activation_grad_inplace(dz3, z3, act)
            _matmul_at_b(a2, dz3, gw3)
            for j in range(d):
                gb3[j] = 0.0
            for i in range(b):
                for j in range(d):
                    gb3[j] += dz3[i, j]

            _matmul_a_bt(dz3, w3, da2)
            for i in range(b):
                for j in range(n):
                    acc = a2[i, j]
                    penalty += l2_activity * acc * acc
                    da2[i, j] += 2.0 * l2_activity * acc
            _activation_grad_inplace(da2, z2, act)  # da2 becomes dz2
            _matmul_at_b(a1, da2, gw2)
            for j in range(n):
                gb2[j] = 0.0
            for i in range(b):
                for j in range(n):
                    gb2[j] += da2[i, j]

            _matmul_a_bt(da2, w2, da1)
            _activation_grad_inplace(da1, z1, act)  # da1 becomes dz1
            _matmul_at_b(x, da1, gw1)
            for j in range(d):
                gb1[j] = 0.0
            for i in range(b):
                for j in range(d):
                    gb1[j] += da1[i, j]

    return data_loss, penalty


def adam_step(flat_params, flat_grads, flat_m, flat_v, int t,
              double lr, double beta1, double beta2, double eps, scratch):
    """Fused single-pass Adam update.

    ``scratch`` is accepted for interface parity with the numpy backend but
    is not needed here.
    """
    cdef double[::1] pbuf = flat_params
    cdef double[::1] g = flat_grads
    cdef double[::1] m = flat_m
    cdef double[::1] v = flat_v
    t += 1
    cdef double c1 = 1.0 - beta1 ** t
    cdef double c2 = 1.0 - beta2 ** t
    # Same rewrite as the numpy backend: corrections folded into the step.
    cdef double step = lr * sqrt(c2) / c1
    cdef double eps_c = eps * sqrt(c2)
    cdef double gi, mi, vi
    cdef Py_ssize_t i
    with nogil:
        for i in range(pbuf.shape[0]):
            gi = g[i]
            mi = m[i] * beta1 + gi * (1.0 - beta1)
            vi = v[i] * beta2 + (gi * gi) * (1.0 - beta2)
            m[i] = mi
            v[i] = vi
            pbuf[i] -= (mi / (sqrt(vi) + eps_c)) * step
    return t
