"""Naive reference implementations the tests compare the package against.

Everything here chooses obviousness over speed: per-pixel Python loops,
breadth-first flood fill, exhaustive search, exact rationals. Nothing
imports the code under test, so a bug in the package cannot hide in its
own oracle.
"""

from __future__ import annotations

import math
from collections import deque
from fractions import Fraction

BACKGROUND = 3


def flood_components(mask) -> list[list[tuple[int, int]]]:
    """8-connected components of truthy pixels via BFS.

    Components are returned in order of their first pixel in row-major
    scan; each component's pixel list is sorted.
    """
    height = len(mask)
    width = len(mask[0]) if height else 0
    seen = [[False] * width for _ in range(height)]
    components = []
    for row in range(height):
        for col in range(width):
            if not mask[row][col] or seen[row][col]:
                continue
            pixels = []
            queue = deque([(row, col)])
            seen[row][col] = True
            while queue:
                r, c = queue.popleft()
                pixels.append((r, c))
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr, cc = r + dr, c + dc
                        if (0 <= rr < height and 0 <= cc < width
                                and mask[rr][cc] and not seen[rr][cc]):
                            seen[rr][cc] = True
                            queue.append((rr, cc))
            components.append(sorted(pixels))
    return components


def paint_classes(height: int, width: int, boxes) -> list[list[int]]:
    """Paint (left, top, right, bottom, value) boxes in order, half-open,
    clamped to the page; later boxes win. Background starts at 3."""
    grid = [[BACKGROUND] * width for _ in range(height)]
    for left, top, right, bottom, value in boxes:
        for row in range(max(top, 0), min(bottom, height)):
            for col in range(max(left, 0), min(right, width)):
                grid[row][col] = value
    return grid


def class_priority_paint(height: int, width: int, entities) -> list[list[int]]:
    """Target-mask oracle: entities as (left, top, right, bottom, cls);
    paint other (2) first, then value (1), then key (0)."""
    ordered = [e for e in entities if e[4] == 2] \
        + [e for e in entities if e[4] == 1] \
        + [e for e in entities if e[4] == 0]
    return paint_classes(height, width, ordered)


def iou_exact(pred, target, num_classes: int = 4) -> list[Fraction]:
    """Per-class IoU as exact fractions; absent classes score 1."""
    out = []
    for cls in range(num_classes):
        inter = union = 0
        for prow, trow in zip(pred, target):
            for p, t in zip(prow, trow):
                hit_p = p == cls
                hit_t = t == cls
                if hit_p and hit_t:
                    inter += 1
                if hit_p or hit_t:
                    union += 1
        out.append(Fraction(inter, union) if union else Fraction(1))
    return out


def dice_naive(prob, target, channels=(0, 1, 2), eps: float = 1.0) -> float:
    """Soft dice with explicit summation loops."""
    total = 0.0
    for channel in channels:
        overlap = psum = tsum = 0.0
        for prow, trow in zip(prob, target):
            for p, t in zip(prow, trow):
                overlap += p[channel] * t[channel]
                psum += p[channel]
                tsum += t[channel]
        total += 1.0 - (2.0 * overlap + eps) / (psum + tsum + eps)
    return total / len(channels)


def wce_naive(prob, target, raw_weights=(1.0, 1.0, 1.0, 0.3),
              floor: float = 1e-7) -> float:
    """Weighted cross-entropy with explicit loops; one-hot targets."""
    scale = sum(raw_weights)
    weights = [w / scale for w in raw_weights]
    total = 0.0
    count = 0
    for prow, trow in zip(prob, target):
        for p, t in zip(prow, trow):
            count += 1
            true_class = max(range(len(t)), key=lambda c: t[c])
            clipped = min(max(p[true_class], floor), 1.0)
            total += -weights[true_class] * math.log(clipped)
    return total / count


def pair_matrix(key_centroids, value_centroids) -> list[tuple[int, int]]:
    """Exhaustive nearest-key search with exact rationals.

    Centroids are (x, y) Fraction pairs. Returns (value_index,
    key_index); ties resolve to the smallest key index.
    """
    matches = []
    for v_index, (vx, vy) in enumerate(value_centroids):
        best_index = None
        best = None
        for k_index, (kx, ky) in enumerate(key_centroids):
            sq = (vx - kx) ** 2 + (vy - ky) ** 2
            if best is None or sq < best:
                best, best_index = sq, k_index
        if best_index is not None:
            matches.append((v_index, best_index))
    return matches


def centroid_exact(pixels) -> tuple[Fraction, Fraction]:
    """(x, y) mean of pixel (row, col) indices."""
    n = len(pixels)
    return (Fraction(sum(c for _, c in pixels), n),
            Fraction(sum(r for r, _ in pixels), n))


def gray_601(r: int, g: int, b: int) -> int:
    """ITU-R 601 luma, rounded half-up like the package claims to."""
    return int(math.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5))


def segment_samples(x0: int, y0: int, x1: int, y1: int,
                    step: float = 0.25) -> set[tuple[int, int]]:
    """Integer pixels near the ideal segment, sampled densely.

    Any reasonable rasterized line must hit pixels within 1 of these.
    """
    length = math.hypot(x1 - x0, y1 - y0)
    samples = max(2, int(length / step))
    points = set()
    for i in range(samples + 1):
        t = i / samples
        points.add((round(x0 + t * (x1 - x0)), round(y0 + t * (y1 - y0))))
    return points
