# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled decode kernels: window-max suppression and center extraction.

Mirrors _decode_py exactly; the survivor rule and all comparisons operate
on raw float32 values so both backends return identical results.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline bint _survives(const float[:, ::1] v, Py_ssize_t i, Py_ssize_t j, Py_ssize_t r) noexcept nogil:
    cdef Py_ssize_t h = v.shape[0]
    cdef Py_ssize_t w = v.shape[1]
    cdef float x = v[i, j]
    cdef Py_ssize_t i0 = i - r if i >= r else 0
    cdef Py_ssize_t i1 = i + r if i + r < h else h - 1
    cdef Py_ssize_t j0 = j - r if j >= r else 0
    cdef Py_ssize_t j1 = j + r if j + r < w else w - 1
    cdef Py_ssize_t ii, jj
    cdef float y
    for ii in range(i0, i1 + 1):
        for jj in range(j0, j1 + 1):
            y = v[ii, jj]
            if y > x:
                return False
            if y == x and (ii < i or (ii == i and jj < j)):
                return False
    return True


def local_max_nms(values, int window):
    cdef const float[:, ::1] v = values
    cdef Py_ssize_t h = v.shape[0]
    cdef Py_ssize_t w = v.shape[1]
    cdef Py_ssize_t r = window // 2
    out = np.zeros((h, w), dtype=np.float32)
    cdef float[:, ::1] o = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(h):
            for j in range(w):
                if _survives(v, i, j, r):
                    o[i, j] = v[i, j]
    return out


def extract_survivors(values, int window, double threshold):
    cdef const float[:, ::1] v = values
    cdef Py_ssize_t h = v.shape[0]
    cdef Py_ssize_t w = v.shape[1]
    cdef Py_ssize_t r = window // 2
    rows_buf = np.empty(h * w, dtype=np.int64)
    cols_buf = np.empty(h * w, dtype=np.int64)
    cdef cnp.int64_t[::1] rows = rows_buf
    cdef cnp.int64_t[::1] cols = cols_buf
    cdef Py_ssize_t count = 0
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(h):
            for j in range(w):
                if (<double> v[i, j]) >= threshold and _survives(v, i, j, r):
                    rows[count] = i
                    cols[count] = j
                    count += 1
    return rows_buf[:count].copy(), cols_buf[:count].copy()
