# Compiled box kernels. Must stay arithmetically identical to fallback.py:
# same expression order, plain IEEE doubles, no fast-math.

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _pair_iou(const double[:, ::1] a, Py_ssize_t i,
                             const double[:, ::1] b, Py_ssize_t j) nogil:
    cdef double ix0 = a[i, 0] if a[i, 0] > b[j, 0] else b[j, 0]
    cdef double iy0 = a[i, 1] if a[i, 1] > b[j, 1] else b[j, 1]
    cdef double ix1 = a[i, 2] if a[i, 2] < b[j, 2] else b[j, 2]
    cdef double iy1 = a[i, 3] if a[i, 3] < b[j, 3] else b[j, 3]
    cdef double iw = ix1 - ix0
    cdef double ih = iy1 - iy0
    if iw < 0.0:
        iw = 0.0
    if ih < 0.0:
        ih = 0.0
    cdef double inter = iw * ih
    cdef double area_a = (a[i, 2] - a[i, 0]) * (a[i, 3] - a[i, 1])
    cdef double area_b = (b[j, 2] - b[j, 0]) * (b[j, 3] - b[j, 1])
    cdef double union_ = area_a + area_b - inter
    if union_ > 0.0:
        return inter / union_
    return 0.0


def iou_matrix(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(m):
                out[i, j] = _pair_iou(a, i, b, j)
    return out_arr


def suppress_sorted(const double[:, ::1] boxes, const long long[::1] classes,
                    double iou_thresh, bint class_aware):
    cdef Py_ssize_t n = boxes.shape[0]
    alive_arr = np.ones(n, dtype=bool)
    cdef cnp.uint8_t[::1] alive = alive_arr.view(np.uint8)
    cdef Py_ssize_t i, j
    cdef double v
    with nogil:
        for i in range(n):
            if not alive[i]:
                continue
            for j in range(i + 1, n):
                if not alive[j]:
                    continue
                if class_aware and classes[j] != classes[i]:
                    continue
                v = _pair_iou(boxes, i, boxes, j)
                if v >= iou_thresh:
                    alive[j] = 0
    return alive_arr


def match_sorted(const double[:, ::1] det_boxes, const long long[::1] det_classes,
                 const double[:, ::1] gt_boxes, const long long[::1] gt_classes,
                 double iou_threshold):
    cdef Py_ssize_t n = det_boxes.shape[0]
    cdef Py_ssize_t m = gt_boxes.shape[0]
    out_arr = np.full(n, -1, dtype=np.int64)
    if m == 0:
        return out_arr
    cdef long long[::1] out = out_arr
    taken_arr = np.zeros(m, dtype=bool)
    cdef cnp.uint8_t[::1] taken = taken_arr.view(np.uint8)
    cdef Py_ssize_t i, j, best_j
    cdef double v, best
    with nogil:
        for i in range(n):
            best = 0.0
            best_j = -1
            for j in range(m):
                if taken[j] or gt_classes[j] != det_classes[i]:
                    continue
                v = _pair_iou(det_boxes, i, gt_boxes, j)
                if v > best:
                    best = v
                    best_j = j
            if best_j >= 0 and best >= iou_threshold:
                out[i] = best_j
                taken[best_j] = 1
    return out_arr
