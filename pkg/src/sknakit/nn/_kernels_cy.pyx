# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend: direct 3x3 convolution and 2x2 max-pool loops.

Inner loops run elementwise over the contiguous width axis so the C
compiler can vectorize them; the weight-gradient reduction goes through a
per-thread row buffer for the same reason. Deterministic under any OpenMP
thread count: every output element is accumulated by exactly one thread in
a fixed order (forward and dx parallelize over the batch, dw over output
channels).
"""

import numpy as np

cimport cython
from cython.parallel cimport parallel, prange
from libc.stdlib cimport free, malloc

ctypedef fused floating:
    float
    double

NAME = "cython"


def conv2d_forward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w,
                   floating[::1] b):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t O = w.shape[0]
    dtype = np.float32 if floating is float else np.float64
    y_arr = np.empty((B, O, H, W), dtype=dtype)
    cdef floating[:, :, :, ::1] y = y_arr
    cdef Py_ssize_t bi, o, c, p, q, i, j, i0, i1, j0, j1, sh
    cdef floating wv, bv
    cdef floating *yrow
    cdef floating *xrow
    with nogil:
        for bi in prange(B, schedule="static"):
            for o in range(O):
                bv = b[o]
                for i in range(H):
                    yrow = &y[bi, o, i, 0]
                    for j in range(W):
                        yrow[j] = bv
                for c in range(C):
                    for p in range(3):
                        i0 = 0 if p >= 1 else 1
                        i1 = H if p <= 1 else H - 1
                        for q in range(3):
                            sh = q - 1
                            j0 = 0 if sh >= 0 else 1
                            j1 = W if sh <= 0 else W - 1
                            wv = w[o, c, p, q]
                            for i in range(i0, i1):
                                yrow = &y[bi, o, i, 0]
                                xrow = &x[bi, c, i + p - 1, 0]
                                for j in range(j0, j1):
                                    yrow[j] = yrow[j] + wv * xrow[j + sh]
    return y_arr


def conv2d_backward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w,
                    floating[:, :, :, ::1] dy):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t O = w.shape[0]
    dtype = np.float32 if floating is float else np.float64
    dw_arr = np.zeros((O, C, 3, 3), dtype=dtype)
    db_arr = np.zeros(O, dtype=dtype)
    cdef floating[:, :, :, ::1] dw = dw_arr
    cdef floating[::1] db = db_arr
    cdef Py_ssize_t bi, o, c, p, q, i, j, i0, i1, j0, j1, sh
    cdef floating acc
    cdef floating *buf
    cdef floating *dyrow
    cdef floating *xrow
    with nogil, parallel():
        buf = <floating *> malloc(W * sizeof(floating))
        for o in prange(O, schedule="static"):
            acc = 0
            for bi in range(B):
                for i in range(H):
                    dyrow = &dy[bi, o, i, 0]
                    for j in range(W):
                        acc = acc + dyrow[j]
            db[o] = acc
            for c in range(C):
                for p in range(3):
                    i0 = 0 if p >= 1 else 1
                    i1 = H if p <= 1 else H - 1
                    for q in range(3):
                        sh = q - 1
                        j0 = 0 if sh >= 0 else 1
                        j1 = W if sh <= 0 else W - 1
                        for j in range(j0, j1):
                            buf[j] = 0
                        for bi in range(B):
                            for i in range(i0, i1):
                                dyrow = &dy[bi, o, i, 0]
                                xrow = &x[bi, c, i + p - 1, 0]
                                for j in range(j0, j1):
                                    buf[j] = buf[j] + dyrow[j] * xrow[j + sh]
                        acc = 0
                        for j in range(j0, j1):
                            acc = acc + buf[j]
                        dw[o, c, p, q] = acc
        free(buf)
    # dx is a same-pad convolution of dy with the flipped, transposed kernel;
    # reuse the vectorized forward loop for it.
    wt = np.ascontiguousarray(
        np.asarray(w)[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    )
    zero_bias = np.zeros(C, dtype=dtype)
    dx_arr = conv2d_forward(dy, wt, zero_bias)
    return dx_arr, dw_arr, db_arr


def maxpool2x2_forward(floating[:, :, :, ::1] x):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t H2 = H // 2, W2 = W // 2
    dtype = np.float32 if floating is float else np.float64
    y_arr = np.empty((B, C, H2, W2), dtype=dtype)
    s_arr = np.empty((B, C, H2, W2), dtype=np.uint8)
    cdef floating[:, :, :, ::1] y = y_arr
    cdef unsigned char[:, :, :, ::1] s = s_arr
    cdef Py_ssize_t bi, c, i, j
    cdef floating best, v
    cdef unsigned char arg
    with nogil:
        for bi in prange(B, schedule="static"):
            for c in range(C):
                for i in range(H2):
                    for j in range(W2):
                        best = x[bi, c, 2 * i, 2 * j]
                        arg = 0
                        v = x[bi, c, 2 * i, 2 * j + 1]
                        if v > best:
                            best = v
                            arg = 1
                        v = x[bi, c, 2 * i + 1, 2 * j]
                        if v > best:
                            best = v
                            arg = 2
                        v = x[bi, c, 2 * i + 1, 2 * j + 1]
                        if v > best:
                            best = v
                            arg = 3
                        y[bi, c, i, j] = best
                        s[bi, c, i, j] = arg
    return y_arr, s_arr


def maxpool2x2_backward(unsigned char[:, :, :, ::1] switches,
                        floating[:, :, :, ::1] dy,
                        Py_ssize_t in_h, Py_ssize_t in_w):
    cdef Py_ssize_t B = dy.shape[0], C = dy.shape[1], H2 = dy.shape[2], W2 = dy.shape[3]
    dtype = np.float32 if floating is float else np.float64
    dx_arr = np.zeros((B, C, in_h, in_w), dtype=dtype)
    cdef floating[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t bi, c, i, j
    cdef unsigned char arg
    with nogil:
        for bi in prange(B, schedule="static"):
            for c in range(C):
                for i in range(H2):
                    for j in range(W2):
                        arg = switches[bi, c, i, j]
                        dx[bi, c, 2 * i + (arg >> 1), 2 * j + (arg & 1)] = dy[bi, c, i, j]
    return dx_arr
