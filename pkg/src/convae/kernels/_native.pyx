# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled direct-convolution kernels.

Structured per tap: the inner loops sweep contiguous output rows so the C
compiler can vectorize them, while each output element still receives its
taps in the same order as the numpy fallback (conv: (c, p, q); input
gradients: (o, p, q)), one rounding per tap. The build disables FP
contraction, so both backends produce bit-identical results.
"""

import numpy as np

name = "native"


def conv_fwd(const double[:, :, :, ::1] x, const double[:, :, :, ::1] w, const double[::1] b):
    cdef Py_ssize_t n = x.shape[0], c_in = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t c_out = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = h - kh + 1, ow = wd - kw + 1
    out_arr = np.empty((n, c_out, oh, ow), dtype=np.float64)
    cdef double[:, :, :, ::1] y = out_arr
    cdef Py_ssize_t ni, o, i, j, c, p, q
    cdef double wv, bv
    for o in range(c_out):
        bv = b[o]
        for ni in range(n):
            for i in range(oh):
                for j in range(ow):
                    y[ni, o, i, j] = bv
    for c in range(c_in):
        for p in range(kh):
            for q in range(kw):
                for ni in range(n):
                    for o in range(c_out):
                        wv = w[o, c, p, q]
                        for i in range(oh):
                            for j in range(ow):
                                y[ni, o, i, j] += wv * x[ni, c, i + p, j + q]
    return out_arr


def conv_dx(const double[:, :, :, ::1] w, const double[:, :, :, ::1] dy,
            Py_ssize_t h_in, Py_ssize_t w_in):
    cdef Py_ssize_t n = dy.shape[0], c_out = dy.shape[1], oh = dy.shape[2], ow = dy.shape[3]
    cdef Py_ssize_t c_in = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    out_arr = np.zeros((n, c_in, h_in, w_in), dtype=np.float64)
    cdef double[:, :, :, ::1] dx = out_arr
    cdef Py_ssize_t ni, c, o, p, q, i, j
    cdef double wv
    for o in range(c_out):
        for p in range(kh):
            for q in range(kw):
                for ni in range(n):
                    for c in range(c_in):
                        wv = w[o, c, p, q]
                        for i in range(oh):
                            for j in range(ow):
                                dx[ni, c, p + i, q + j] += wv * dy[ni, o, i, j]
    return out_arr


def deconv_fwd(const double[:, :, :, ::1] x, const double[:, :, :, ::1] w, const double[::1] b):
    cdef Py_ssize_t n = x.shape[0], c_in = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t c_out = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = h + kh - 1, ow = wd + kw - 1
    out_arr = np.empty((n, c_out, oh, ow), dtype=np.float64)
    cdef double[:, :, :, ::1] y = out_arr
    cdef Py_ssize_t ni, o, i, j, c, p, q
    cdef double wv, bv, xv
    for o in range(c_out):
        bv = b[o]
        for ni in range(n):
            for i in range(oh):
                for j in range(ow):
                    y[ni, o, i, j] = bv
    if h == 1 and wd == 1:
        # 1x1 input: each output pixel receives exactly one tap per channel
        for c in range(c_in):
            for ni in range(n):
                xv = x[ni, c, 0, 0]
                for o in range(c_out):
                    for p in range(kh):
                        for q in range(kw):
                            y[ni, o, p, q] += w[c, o, p, q] * xv
        return out_arr
    for c in range(c_in):
        for p in range(kh):
            for q in range(kw):
                for ni in range(n):
                    for o in range(c_out):
                        wv = w[c, o, p, q]
                        for i in range(h):
                            for j in range(wd):
                                y[ni, o, p + i, q + j] += wv * x[ni, c, i, j]
    return out_arr


def deconv_dx(const double[:, :, :, ::1] w, const double[:, :, :, ::1] dy,
              Py_ssize_t h_in, Py_ssize_t w_in):
    cdef Py_ssize_t n = dy.shape[0], c_out = dy.shape[1]
    cdef Py_ssize_t c_in = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    out_arr = np.zeros((n, c_in, h_in, w_in), dtype=np.float64)
    cdef double[:, :, :, ::1] dx = out_arr
    cdef Py_ssize_t ni, c, o, p, q, u, v
    cdef double wv
    for o in range(c_out):
        for p in range(kh):
            for q in range(kw):
                for ni in range(n):
                    for c in range(c_in):
                        wv = w[c, o, p, q]
                        for u in range(h_in):
                            for v in range(w_in):
                                dx[ni, c, u, v] += wv * dy[ni, o, u + p, v + q]
    return out_arr
