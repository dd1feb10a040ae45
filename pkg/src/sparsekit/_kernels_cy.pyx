# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same contracts as _kernels_py. All loops run nogil so
chunked evaluation threads scale."""

import numpy as np

cimport cython


def apply_threshold(values, double threshold):
    cdef float[::1] v = np.ascontiguousarray(values, dtype=np.float32)
    out = np.empty(v.shape[0], dtype=np.float32)
    cdef float[::1] o = out
    cdef Py_ssize_t i, n = v.shape[0]
    cdef float x
    cdef double mag
    with nogil:
        for i in range(n):
            x = v[i]
            mag = -x if x < 0 else x
            if mag <= threshold:
                o[i] = 0.0
            else:
                o[i] = x
    return out


def conv2d_valid(x, w, int stride):
    cdef float[:, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float32)
    cdef float[:, :, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float32)
    cdef Py_ssize_t n = xv.shape[0], c_in = xv.shape[1], h = xv.shape[2], wid = xv.shape[3]
    cdef Py_ssize_t f_out = wv.shape[0], kh = wv.shape[2], kw = wv.shape[3]
    cdef Py_ssize_t oh = (h - kh) // stride + 1, ow = (wid - kw) // stride + 1
    out = np.empty((n, f_out, oh, ow), dtype=np.float32)
    cdef float[:, :, :, ::1] ov = out
    cdef Py_ssize_t b, f, i, j, c, p, q
    cdef double acc
    with nogil:
        for b in range(n):
            for f in range(f_out):
                for i in range(oh):
                    for j in range(ow):
                        acc = 0.0
                        for c in range(c_in):
                            for p in range(kh):
                                for q in range(kw):
                                    acc += (<double> xv[b, c, i * stride + p, j * stride + q]) \
                                        * (<double> wv[f, c, p, q])
                        ov[b, f, i, j] = <float> acc
    return out


def maxpool2d(x, int window, int stride):
    cdef float[:, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float32)
    cdef Py_ssize_t n = xv.shape[0], c_in = xv.shape[1], h = xv.shape[2], wid = xv.shape[3]
    cdef Py_ssize_t oh = (h - window) // stride + 1, ow = (wid - window) // stride + 1
    out = np.empty((n, c_in, oh, ow), dtype=np.float32)
    cdef float[:, :, :, ::1] ov = out
    cdef Py_ssize_t b, c, i, j, p, q
    cdef float best, v
    with nogil:
        for b in range(n):
            for c in range(c_in):
                for i in range(oh):
                    for j in range(ow):
                        best = xv[b, c, i * stride, j * stride]
                        for p in range(window):
                            for q in range(window):
                                v = xv[b, c, i * stride + p, j * stride + q]
                                if v > best:
                                    best = v
                        ov[b, c, i, j] = best
    return out
