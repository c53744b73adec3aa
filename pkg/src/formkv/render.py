"""Annotation overlays for human review.

Draws entity boxes in per-label colors and relation edges as lines from
source to target box center, optionally tipped with an arrowhead. The
diff view outlines relabeled entities twice, old color inside the new
one, so a revision pass can be eyeballed quickly.

All drawing is integer-pixel with no anti-aliasing: every primitive is
a set of array writes, so output for a fixed form, image, and style is
reproducible byte for byte. PIL's draw module was rejected for this job
because its width and endpoint conventions shift between versions,
which would break golden-image comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .model import BBox, Form
from .revise import build_graph

DEFAULT_COLORS: Mapping[str, tuple[int, int, int]] = {
    "question": (0, 0, 255),
    "answer": (0, 160, 0),
    "header": (128, 0, 160),
    "other": (128, 128, 128),
}
DEFAULT_LINK_COLOR = (220, 0, 0)


@dataclass(frozen=True)
class RenderStyle:
    """Colors and stroke geometry of the overlay."""

    colors: Mapping[str, tuple[int, int, int]] = field(
        default_factory=lambda: dict(DEFAULT_COLORS))
    link_color: tuple[int, int, int] = DEFAULT_LINK_COLOR
    line_width: int = 2
    arrowheads: bool = True
    arrow_size: int = 6

    def __post_init__(self):
        if self.line_width < 1:
            raise ValueError(f"line_width must be >= 1, got {self.line_width}")
        if len(set(self.colors.values())) != len(self.colors):
            raise ValueError("class colors must be distinct")
        for label in ("question", "answer", "header", "other"):
            if label not in self.colors:
                raise ValueError(f"style is missing a color for {label!r}")


DEFAULT_STYLE = RenderStyle()


def _as_rgb(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise ValueError(f"page image must be uint8, got {image.dtype}")
    if image.ndim == 2:
        return np.repeat(image[:, :, None], 3, axis=2)
    if image.ndim == 3 and image.shape[2] == 3:
        return image.copy()
    raise ValueError(f"page image must be (H, W) or (H, W, 3), got {image.shape}")


def _fill(canvas: np.ndarray, left: int, top: int, right: int, bottom: int,
          color: tuple[int, int, int]) -> None:
    height, width = canvas.shape[:2]
    left, top = max(left, 0), max(top, 0)
    right, bottom = min(right, width), min(bottom, height)
    if left < right and top < bottom:
        canvas[top:bottom, left:right] = color


def draw_box_outline(canvas: np.ndarray, box: BBox,
                     color: tuple[int, int, int], width: int) -> None:
    """Outline drawn inward from the half-open box border."""
    _fill(canvas, box.left, box.top, box.right, min(box.top + width, box.bottom), color)
    _fill(canvas, box.left, max(box.bottom - width, box.top), box.right, box.bottom, color)
    _fill(canvas, box.left, box.top, min(box.left + width, box.right), box.bottom, color)
    _fill(canvas, max(box.right - width, box.left), box.top, box.right, box.bottom, color)


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer line path from (x0, y0) to (x1, y1), endpoints included."""
    points = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            return points
        doubled = 2 * err
        if doubled >= dy:
            err += dy
            x += sx
        if doubled <= dx:
            err += dx
            y += sy


def draw_line(canvas: np.ndarray, start: tuple[int, int], end: tuple[int, int],
              color: tuple[int, int, int], width: int) -> None:
    offset = (width - 1) // 2
    for x, y in bresenham(start[0], start[1], end[0], end[1]):
        _fill(canvas, x - offset, y - offset, x - offset + width, y - offset + width, color)


def _draw_arrowhead(canvas: np.ndarray, path: list[tuple[int, int]],
                    color: tuple[int, int, int], width: int, size: int) -> None:
    if len(path) < 2:
        return
    tip = path[-1]
    base = path[max(0, len(path) - 1 - size)]
    # barbs sit half the tail vector to either side, all integer arithmetic
    vx, vy = base[0] - tip[0], base[1] - tip[1]
    for sign in (1, -1):
        barb = (base[0] + sign * (-vy) // 2, base[1] + sign * vx // 2)
        draw_line(canvas, tip, barb, color, width)


def _draw_edges(canvas: np.ndarray, form: Form, style: RenderStyle) -> None:
    graph = build_graph(form, skip_dangling=True)
    for source, target in graph.edges:
        start = form.entity(source).box.center()
        end = form.entity(target).box.center()
        draw_line(canvas, start, end, style.link_color, style.line_width)
        if style.arrowheads:
            path = bresenham(start[0], start[1], end[0], end[1])
            _draw_arrowhead(canvas, path, style.link_color, style.line_width,
                            style.arrow_size)


def _check_dims(form: Form, canvas: np.ndarray) -> None:
    if canvas.shape[:2] != (form.height, form.width):
        raise ValueError(
            f"page image is {canvas.shape[1]}x{canvas.shape[0]} but form "
            f"{form.source_id} declares {form.width}x{form.height}")


def _render(canvas: np.ndarray, form: Form, style: RenderStyle,
            inner_colors: Mapping[int, tuple[int, int, int]]) -> np.ndarray:
    _draw_edges(canvas, form, style)
    for entity in sorted(form.entities, key=lambda e: e.id):
        color = style.colors[entity.label]
        draw_box_outline(canvas, entity.box, color, style.line_width)
        inner = inner_colors.get(entity.id)
        if inner is not None:
            draw_box_outline(canvas, _shrunk(entity.box, style.line_width),
                             inner, style.line_width)
    return canvas


def _shrunk(box: BBox, margin: int) -> BBox:
    """Box pulled in by ``margin``; collapses to its midline when too small."""
    left, right = box.left + margin, box.right - margin
    if left > right:
        left = right = (box.left + box.right) // 2
    top, bottom = box.top + margin, box.bottom - margin
    if top > bottom:
        top = bottom = (box.top + box.bottom) // 2
    return BBox(left, top, right, bottom)


def render_overlay(form: Form, image: np.ndarray,
                   style: RenderStyle = DEFAULT_STYLE) -> np.ndarray:
    """RGB copy of the page with boxes and relation edges drawn on."""
    canvas = _as_rgb(image)
    _check_dims(form, canvas)
    return _render(canvas, form, style, {})


def render_diff(before: Form, after: Form, image: np.ndarray,
                style: RenderStyle = DEFAULT_STYLE) -> np.ndarray:
    """Overlay of ``after`` with old-label inner outlines where labels moved."""
    if before.entity_ids != after.entity_ids:
        raise ValueError(
            f"forms disagree on entity ids: {sorted(before.entity_ids)} "
            f"vs {sorted(after.entity_ids)}")
    canvas = _as_rgb(image)
    _check_dims(after, canvas)
    inner = {}
    for entity in after.entities:
        old_label = before.entity(entity.id).label
        if old_label != entity.label:
            inner[entity.id] = style.colors[old_label]
    return _render(canvas, after, style, inner)


def save_png(array: np.ndarray, path) -> None:
    """Write an (H, W, 3) uint8 canvas as an RGB PNG."""
    from PIL import Image

    Image.fromarray(np.ascontiguousarray(array, dtype=np.uint8), mode="RGB").save(path)
