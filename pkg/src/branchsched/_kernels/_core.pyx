# cython: boundscheck=False, wraparound=False, cdivision=False
"""Compiled mirrors of the hot kernels in `_fallback`.

The arithmetic follows the fallback expression for expression so both
backends produce bit-identical results.
"""

import numpy as np

BACKEND = "compiled"


def scan_budget_argmax(double[::1] acc, double[::1] energy, double[::1] l_det,
                       double[::1] c0, double[::1] c1, double[::1] rf2,
                       long[::1] interval, double[::1] k,
                       double e0, double l0, double idle_w):
    cdef Py_ssize_t n = acc.shape[0]
    cdef Py_ssize_t idx, best = -1
    cdef long i
    cdef long feasible = 0
    cdef double lat, en, a
    cdef double best_a = 0.0, best_e = 0.0, best_l = 0.0
    cdef double min_l = float("inf"), min_e = float("inf")
    for idx in range(n):
        i = interval[idx]
        lat = l_det[idx]
        if i > 1:
            lat = (lat + (i - 1.0) * (c0[idx] + c1[idx] * rf2[idx] * k[idx])) / i
        en = energy[idx]
        if idle_w > 0.0:
            en = en - idle_w * lat / 1000.0
            if en < 0.0:
                en = 0.0
        if lat < min_l:
            min_l = lat
        if en < min_e:
            min_e = en
        if en > e0 or lat > l0:
            continue
        feasible += 1
        a = acc[idx]
        if best < 0 or a > best_a or (a == best_a and (en < best_e or (en == best_e and lat < best_l))):
            best = idx
            best_a = a
            best_e = en
            best_l = lat
    return int(best), int(feasible), float(min_l), float(min_e)


cdef inline double _pair_iou(double ax1, double ay1, double ax2, double ay2,
                             double bx1, double by1, double bx2, double by2):
    cdef double ix1 = ax1 if ax1 > bx1 else bx1
    cdef double iy1 = ay1 if ay1 > by1 else by1
    cdef double ix2 = ax2 if ax2 < bx2 else bx2
    cdef double iy2 = ay2 if ay2 < by2 else by2
    cdef double iw = ix2 - ix1
    cdef double ih = iy2 - iy1
    if iw < 0.0:
        iw = 0.0
    if ih < 0.0:
        ih = 0.0
    cdef double inter = iw * ih
    cdef double union_ = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union_ > 0.0:
        return inter / union_
    return 0.0


def iou_matrix(a, b):
    a_arr = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    b_arr = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    out = np.zeros((a_arr.shape[0], b_arr.shape[0]), dtype=np.float64)
    cdef double[:, ::1] av = a_arr
    cdef double[:, ::1] bv = b_arr
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j
    for i in range(av.shape[0]):
        for j in range(bv.shape[0]):
            ov[i, j] = _pair_iou(av[i, 0], av[i, 1], av[i, 2], av[i, 3],
                                 bv[j, 0], bv[j, 1], bv[j, 2], bv[j, 3])
    return out


def nms_keep(boxes, double iou_threshold):
    boxes_arr = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    cdef double[:, ::1] bv = boxes_arr
    cdef Py_ssize_t n = bv.shape[0]
    alive_arr = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] alive = alive_arr
    cdef Py_ssize_t i, j
    cdef double iou
    keep = []
    for i in range(n):
        if not alive[i]:
            continue
        keep.append(i)
        alive[i] = 0
        for j in range(i + 1, n):
            if not alive[j]:
                continue
            iou = _pair_iou(bv[i, 0], bv[i, 1], bv[i, 2], bv[i, 3],
                            bv[j, 0], bv[j, 1], bv[j, 2], bv[j, 3])
            if iou >= iou_threshold:
                alive[j] = 0
    return keep
