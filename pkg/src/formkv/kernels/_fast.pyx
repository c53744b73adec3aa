# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pixel kernels.

Drop-in twin of ``_ref``: same signatures, bit-identical outputs
(component numbering follows first pixel in row-major order).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def fill_boxes(cnp.uint8_t[:, ::1] canvas, boxes, int value):
    """Paint half-open boxes onto ``canvas``; returns clipped-box count."""
    cdef const cnp.int64_t[:, ::1] b = np.ascontiguousarray(boxes, dtype=np.int64).reshape(-1, 4)
    cdef Py_ssize_t height = canvas.shape[0]
    cdef Py_ssize_t width = canvas.shape[1]
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i, row, col, cl, ct, cr, cb
    cdef long long left, top, right, bottom
    cdef int clamped = 0
    cdef cnp.uint8_t v = <cnp.uint8_t> value
    for i in range(n):
        left = b[i, 0]
        top = b[i, 1]
        right = b[i, 2]
        bottom = b[i, 3]
        cl = left if left > 0 else 0
        ct = top if top > 0 else 0
        cr = right if right < width else width
        cb = bottom if bottom < height else height
        if cl != left or ct != top or cr != right or cb != bottom:
            clamped += 1
        for row in range(ct, cb):
            for col in range(cl, cr):
                canvas[row, col] = v
    return clamped


cdef inline cnp.int32_t _find(cnp.int32_t[::1] parent, cnp.int32_t x):
    cdef cnp.int32_t root = x
    cdef cnp.int32_t nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


cdef inline void _union(cnp.int32_t[::1] parent, cnp.int32_t a, cnp.int32_t b):
    cdef cnp.int32_t ra = _find(parent, a)
    cdef cnp.int32_t rb = _find(parent, b)
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


def label_components(mask):
    """8-connected component labeling; returns ``(labels, count)``."""
    cdef const cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t height = m.shape[0]
    cdef Py_ssize_t width = m.shape[1]
    labels_arr = np.zeros((height, width), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] labels = labels_arr
    if height == 0 or width == 0:
        return labels_arr, 0

    # new provisional label only when W, NW, N, NE are all background,
    # so at most one per two columns per row
    cdef Py_ssize_t cap = height * ((width + 1) // 2) + 2
    parent_arr = np.zeros(cap, dtype=np.int32)
    cdef cnp.int32_t[::1] parent = parent_arr
    cdef cnp.int32_t next_label = 1
    cdef cnp.int32_t best, nb
    cdef Py_ssize_t row, col

    for row in range(height):
        for col in range(width):
            if m[row, col] == 0:
                continue
            best = 0
            if col > 0 and labels[row, col - 1] != 0:
                best = labels[row, col - 1]
            if row > 0:
                if col > 0 and labels[row - 1, col - 1] != 0:
                    nb = labels[row - 1, col - 1]
                    if best == 0:
                        best = nb
                    else:
                        _union(parent, best, nb)
                if labels[row - 1, col] != 0:
                    nb = labels[row - 1, col]
                    if best == 0:
                        best = nb
                    else:
                        _union(parent, best, nb)
                if col + 1 < width and labels[row - 1, col + 1] != 0:
                    nb = labels[row - 1, col + 1]
                    if best == 0:
                        best = nb
                    else:
                        _union(parent, best, nb)
            if best == 0:
                parent[next_label] = next_label
                best = next_label
                next_label += 1
            labels[row, col] = best

    remap_arr = np.zeros(next_label, dtype=np.int32)
    cdef cnp.int32_t[::1] remap = remap_arr
    cdef cnp.int32_t count = 0
    cdef cnp.int32_t root
    for row in range(height):
        for col in range(width):
            if labels[row, col] == 0:
                continue
            root = _find(parent, labels[row, col])
            if remap[root] == 0:
                count += 1
                remap[root] = count
            labels[row, col] = remap[root]
    return labels_arr, int(count)


def confusion_matrix(a, b, int num_classes):
    """Joint counts: out[i, j] = number of pixels with a == i and b == j."""
    cdef const cnp.uint8_t[:, ::1] av = np.ascontiguousarray(a, dtype=np.uint8)
    cdef const cnp.uint8_t[:, ::1] bv = np.ascontiguousarray(b, dtype=np.uint8)
    if av.shape[0] != bv.shape[0] or av.shape[1] != bv.shape[1]:
        raise ValueError(
            f"shape mismatch: {(av.shape[0], av.shape[1])} vs {(bv.shape[0], bv.shape[1])}"
        )
    out_arr = np.zeros((num_classes, num_classes), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef Py_ssize_t height = av.shape[0]
    cdef Py_ssize_t width = av.shape[1]
    cdef Py_ssize_t row, col
    for row in range(height):
        for col in range(width):
            out[av[row, col], bv[row, col]] += 1
    return out_arr
