"""Numpy reference implementations of the pixel kernels.

Semantics are the contract for ``_fast``; the two backends must produce
bit-identical outputs (component labels included, thanks to the
first-pixel canonical numbering).
"""

from __future__ import annotations

import numpy as np


def fill_boxes(canvas: np.ndarray, boxes: np.ndarray, value: int) -> int:
    """Paint half-open boxes [left,right) x [top,bottom) onto ``canvas``.

    Boxes are clipped to the canvas; the return value counts boxes that
    needed clipping. Boxes are painted in order, so later boxes win.
    """
    height, width = canvas.shape
    boxes = np.asarray(boxes, dtype=np.int64).reshape(-1, 4)
    clamped = 0
    for left, top, right, bottom in boxes:
        cl = max(int(left), 0)
        ct = max(int(top), 0)
        cr = min(int(right), width)
        cb = min(int(bottom), height)
        if (left, top, right, bottom) != (cl, ct, cr, cb):
            clamped += 1
        if cl < cr and ct < cb:
            canvas[ct:cb, cl:cr] = value
    return clamped


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labeling of a binary mask.

    Returns ``(labels, count)`` where labels are int32, 0 for background
    and 1..count for components numbered by first pixel in row-major
    order. Implemented with per-row runs and union-find so the python
    loop runs over runs, not pixels.
    """
    mask = np.ascontiguousarray(mask)
    height, width = mask.shape
    labels = np.zeros((height, width), dtype=np.int32)
    if height == 0 or width == 0:
        return labels, 0

    parent: list[int] = []

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    rows_runs: list[list[tuple[int, int, int]]] = []
    prev_runs: list[tuple[int, int, int]] = []
    fg = mask != 0
    for row in range(height):
        line = fg[row].astype(np.int8)
        diff = np.diff(line, prepend=np.int8(0), append=np.int8(0))
        starts = np.flatnonzero(diff == 1)
        ends = np.flatnonzero(diff == -1)
        runs = []
        for start, end in zip(starts.tolist(), ends.tolist()):
            run_id = len(parent)
            parent.append(run_id)
            runs.append((start, end, run_id))
        # 8-connectivity: runs [s,e) and [ps,pe) touch iff s <= pe and ps <= e
        i = j = 0
        while i < len(runs) and j < len(prev_runs):
            start, end, run_id = runs[i]
            pstart, pend, pid = prev_runs[j]
            if start <= pend and pstart <= end:
                union(run_id, pid)
            if end < pend:
                i += 1
            elif pend < end:
                j += 1
            else:
                i += 1
                j += 1
        rows_runs.append(runs)
        prev_runs = runs

    remap: dict[int, int] = {}
    lut = np.zeros(len(parent) + 1, dtype=np.int32)
    for runs in rows_runs:
        for _, _, run_id in runs:
            root = find(run_id)
            if root not in remap:
                remap[root] = len(remap) + 1
            lut[run_id + 1] = remap[root]
    for row, runs in enumerate(rows_runs):
        for start, end, run_id in runs:
            labels[row, start:end] = lut[run_id + 1]
    return labels, len(remap)


def confusion_matrix(a: np.ndarray, b: np.ndarray, num_classes: int) -> np.ndarray:
    """Joint counts: out[i, j] = number of pixels with a == i and b == j."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    flat = a.astype(np.int64).ravel() * num_classes + b.astype(np.int64).ravel()
    counts = np.bincount(flat, minlength=num_classes * num_classes)
    return counts.reshape(num_classes, num_classes)
