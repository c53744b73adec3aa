"""Overlay and diff rendering: deterministic integer-pixel drawing."""

import random

import numpy as np
import pytest

from formkv.model import BBox
from formkv.render import (
    DEFAULT_COLORS,
    DEFAULT_LINK_COLOR,
    RenderStyle,
    bresenham,
    render_diff,
    render_overlay,
    save_png,
)
from formkv.revise import revise_form

from builders import make_entity, make_form
from oracles import segment_samples


def white_page(form):
    return np.full((form.height, form.width, 3), 255, dtype=np.uint8)


def color_at(canvas, x, y):
    return tuple(int(v) for v in canvas[y, x])


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def test_bresenham_endpoints_connectivity_and_closeness():
    rng = random.Random(3)
    for _ in range(60):
        x0, y0 = rng.randint(-20, 20), rng.randint(-20, 20)
        x1, y1 = rng.randint(-20, 20), rng.randint(-20, 20)
        path = bresenham(x0, y0, x1, y1)
        assert path[0] == (x0, y0) and path[-1] == (x1, y1)
        for (ax, ay), (bx, by) in zip(path, path[1:]):
            assert max(abs(ax - bx), abs(ay - by)) == 1  # 8-connected steps
        samples = segment_samples(x0, y0, x1, y1)
        for x, y in path:
            assert any(max(abs(x - sx), abs(y - sy)) <= 1 for sx, sy in samples)


def test_bresenham_degenerate_point():
    assert bresenham(4, 7, 4, 7) == [(4, 7)]


# ---------------------------------------------------------------------------
# overlay
# ---------------------------------------------------------------------------

def test_zero_entities_leaves_image_untouched():
    form = make_form([], width=12, height=9)
    image = np.arange(12 * 9 * 3, dtype=np.uint8).reshape(9, 12, 3)
    out = render_overlay(form, image)
    assert np.array_equal(out, image)
    assert out is not image  # a copy, the input stays pristine

    gray = np.arange(12 * 9, dtype=np.uint8).reshape(9, 12)
    out_gray = render_overlay(form, gray)
    assert np.array_equal(out_gray, np.repeat(gray[:, :, None], 3, axis=2))


def test_question_box_perimeter_in_question_color():
    form = make_form([make_entity(0, "question", (4, 5, 20, 15))],
                     width=30, height=20)
    out = render_overlay(form, white_page(form))
    blue = DEFAULT_COLORS["question"]
    # all four corners of the band, outer and inner edge of width 2
    for x, y in [(4, 5), (19, 5), (4, 14), (19, 14), (5, 6), (18, 13)]:
        assert color_at(out, x, y) == blue
    assert color_at(out, 10, 10) == (255, 255, 255)  # interior untouched


def test_changed_pixels_are_exactly_the_outline_band():
    box = BBox(4, 5, 20, 15)
    width = 2
    form = make_form([make_entity(0, "question", tuple(box.as_list()))],
                     width=30, height=20)
    out = render_overlay(form, white_page(form))
    changed = {(x, y) for y, x in zip(*np.nonzero((out != 255).any(axis=2)))}

    def in_band(x, y):
        inside = box.left <= x < box.right and box.top <= y < box.bottom
        interior = (box.left + width <= x < box.right - width
                    and box.top + width <= y < box.bottom - width)
        return inside and not interior

    expected = {(x, y) for x in range(30) for y in range(20) if in_band(x, y)}
    assert changed == expected


def test_edge_draws_link_colored_line_between_centers():
    form = make_form([
        make_entity(0, "question", (2, 2, 12, 12), links=((0, 1),)),
        make_entity(1, "answer", (40, 22, 50, 32), links=((0, 1),)),
    ], width=60, height=40)
    out = render_overlay(form, white_page(form))
    start = form.entity(0).box.center()
    end = form.entity(1).box.center()
    boxes = [form.entity(i).box.dilated(2) for i in (0, 1)]

    def in_box(box, x, y):
        return box.left <= x < box.right and box.top <= y < box.bottom

    off_box_path = [(x, y) for x, y in bresenham(*start, *end)
                    if not any(in_box(b, x, y) for b in boxes)]
    assert off_box_path, "test geometry should leave the line exposed"
    for x, y in off_box_path:
        assert color_at(out, x, y) == DEFAULT_LINK_COLOR


def test_arrowheads_add_pixels_near_the_target():
    form = make_form([
        make_entity(0, "question", (2, 12, 12, 22), links=((0, 1),)),
        make_entity(1, "answer", (44, 12, 54, 22), links=((0, 1),)),
    ], width=60, height=34)
    with_arrows = render_overlay(form, white_page(form))
    plain = render_overlay(form, white_page(form),
                           RenderStyle(arrowheads=False))
    link = np.array(DEFAULT_LINK_COLOR, dtype=np.uint8)
    count_with = int((with_arrows == link).all(axis=2).sum())
    count_plain = int((plain == link).all(axis=2).sum())
    assert count_with > count_plain
    # barbs flare perpendicular to a horizontal edge: same x, off-center y
    extra = (with_arrows == link).all(axis=2) & ~(plain == link).all(axis=2)
    ys = np.nonzero(extra)[0]
    assert (ys < 16).any() and (ys > 17).any()


def test_dangling_links_are_skipped_not_fatal():
    form = make_form([make_entity(0, "question", (2, 2, 12, 12),
                                  links=((0, 7),))], width=20, height=20)
    out = render_overlay(form, white_page(form))
    link = np.array(DEFAULT_LINK_COLOR, dtype=np.uint8)
    assert int((out == link).all(axis=2).sum()) == 0


def test_rendering_is_deterministic():
    form = make_form([
        make_entity(0, "header", (2, 2, 20, 10)),
        make_entity(1, "question", (2, 14, 20, 22), links=((1, 2),)),
        make_entity(2, "answer", (30, 14, 48, 22), links=((1, 2),)),
    ], width=50, height=26)
    image = np.full((26, 50), 200, dtype=np.uint8)
    assert render_overlay(form, image).tobytes() == \
        render_overlay(form, image).tobytes()


def test_overlay_rejects_bad_inputs():
    form = make_form([], width=10, height=10)
    with pytest.raises(ValueError, match="10x10"):
        render_overlay(form, np.zeros((9, 10, 3), dtype=np.uint8))
    with pytest.raises(ValueError, match="uint8"):
        render_overlay(form, np.zeros((10, 10, 3), dtype=np.float32))
    with pytest.raises(ValueError, match="\\(H, W\\)"):
        render_overlay(form, np.zeros((10, 10, 4), dtype=np.uint8))


def test_style_validation():
    with pytest.raises(ValueError, match="distinct"):
        RenderStyle(colors={"question": (1, 2, 3), "answer": (1, 2, 3),
                            "header": (0, 0, 0), "other": (9, 9, 9)})
    with pytest.raises(ValueError, match="missing a color"):
        RenderStyle(colors={"question": (1, 2, 3)})
    with pytest.raises(ValueError, match="line_width"):
        RenderStyle(line_width=0)


# ---------------------------------------------------------------------------
# diff rendering
# ---------------------------------------------------------------------------

def relabel_form():
    return make_form([
        make_entity(0, "header", (4, 4, 24, 14), links=((0, 1),)),
        make_entity(1, "answer", (34, 4, 54, 14), links=((0, 1),)),
        make_entity(2, "other", (4, 20, 54, 30)),
    ], width=60, height=34)


def test_unchanged_diff_equals_overlay_byte_for_byte():
    form = relabel_form()
    image = white_page(form)
    assert render_diff(form, form, image).tobytes() == \
        render_overlay(form, image).tobytes()


def test_relabeled_entity_gets_old_color_inner_outline():
    before = relabel_form()
    after, diff = revise_form(before)
    changed = {entity_id for entity_id, _, _ in diff.label_changes}
    assert changed == {0}  # header -> question; others keep their labels
    out = render_diff(before, after, white_page(before))
    # outer band in the new label's color, inner band in the old one
    assert color_at(out, 4, 4) == DEFAULT_COLORS["question"]
    assert color_at(out, 6, 6) == DEFAULT_COLORS["header"]
    # the untouched entity has no second band
    assert color_at(out, 4, 20) == DEFAULT_COLORS["other"]
    assert color_at(out, 6, 22) == (255, 255, 255)


def test_every_relabeled_box_is_double_outlined():
    before = relabel_form()
    after, _ = revise_form(before)
    out = render_diff(before, after, white_page(before))
    double = 0
    for entity in after.entities:
        box = entity.box
        outer = color_at(out, box.left, box.top)
        inner = color_at(out, box.left + 2, box.top + 2)
        if inner in DEFAULT_COLORS.values() and inner != outer:
            double += 1
    assert double == 1

    flipped = make_form([
        make_entity(0, "question", (4, 4, 24, 14)),
        make_entity(1, "answer", (34, 4, 54, 14)),
    ], width=60, height=18)
    swapped = make_form([
        make_entity(0, "answer", (4, 4, 24, 14)),
        make_entity(1, "question", (34, 4, 54, 14)),
    ], width=60, height=18)
    out = render_diff(flipped, swapped, white_page(flipped))
    assert color_at(out, 6, 6) == DEFAULT_COLORS["question"]
    assert color_at(out, 36, 6) == DEFAULT_COLORS["answer"]


def test_diff_requires_matching_entity_ids():
    a = make_form([make_entity(0, "other", (1, 1, 8, 8))], width=10, height=10)
    b = make_form([make_entity(1, "other", (1, 1, 8, 8))], width=10, height=10)
    with pytest.raises(ValueError, match="entity ids"):
        render_diff(a, b, np.zeros((10, 10, 3), dtype=np.uint8))


def test_tiny_box_inner_outline_collapses_safely():
    before = make_form([make_entity(0, "question", (4, 4, 7, 7))],
                       width=10, height=10)
    after = make_form([make_entity(0, "answer", (4, 4, 7, 7))],
                      width=10, height=10)
    out = render_diff(before, after, white_page(before))
    assert color_at(out, 4, 4) == DEFAULT_COLORS["answer"]


# ---------------------------------------------------------------------------
# file output
# ---------------------------------------------------------------------------

def test_save_png_round_trips(tmp_path):
    from PIL import Image

    form = relabel_form()
    out = render_overlay(form, white_page(form))
    path = tmp_path / "page_overlay.png"
    save_png(out, path)
    with Image.open(path) as image:
        assert image.mode == "RGB"
        assert np.array_equal(np.asarray(image), out)
