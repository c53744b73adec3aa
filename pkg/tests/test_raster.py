"""Target/text rasterization, input stacking, and the PNG export cycle."""

import logging
import random

import numpy as np
import pytest

from formkv.raster import (
    LABEL_TO_CLASS,
    NUM_CLASSES,
    ClassMask,
    SegClass,
    build_input,
    export_pair,
    load_input,
    load_target,
    rasterize_target,
    rasterize_text_mask,
    read_manifest,
    to_grayscale,
    write_manifest,
)

from builders import make_entity, make_form, random_boxes_form
from oracles import class_priority_paint, gray_601


def form_4x4_single_question():
    return make_form([make_entity(0, "question", (0, 0, 2, 2))], width=4, height=4)


# ---------------------------------------------------------------------------
# target rasterization
# ---------------------------------------------------------------------------

def test_single_question_box_paints_key_half_open():
    mask = rasterize_target(form_4x4_single_question())
    expected = np.array([
        [0, 0, 3, 3],
        [0, 0, 3, 3],
        [3, 3, 3, 3],
        [3, 3, 3, 3],
    ], dtype=np.uint8)
    assert np.array_equal(mask.classes, expected)
    assert list(mask.class_counts()) == [4, 0, 0, 12]


def test_empty_form_is_all_background():
    mask = rasterize_target(make_form([], width=5, height=3))
    assert np.array_equal(mask.classes, np.full((3, 5), 3, dtype=np.uint8))


def test_label_to_class_mapping():
    assert LABEL_TO_CLASS["question"] is SegClass.KEY
    assert LABEL_TO_CLASS["answer"] is SegClass.VALUE
    assert LABEL_TO_CLASS["other"] is SegClass.OTHER
    assert LABEL_TO_CLASS["header"] is SegClass.OTHER


def test_overlap_priority_key_beats_value_beats_other():
    form = make_form([
        make_entity(0, "other", (0, 0, 6, 6)),
        make_entity(1, "answer", (1, 1, 5, 5)),
        make_entity(2, "question", (2, 2, 4, 4)),
    ], width=6, height=6)
    mask = rasterize_target(form).classes
    assert mask[0, 0] == SegClass.OTHER
    assert mask[1, 1] == SegClass.VALUE
    assert mask[2, 2] == SegClass.KEY
    assert mask[3, 3] == SegClass.KEY
    # priority holds regardless of entity order
    reordered = make_form([
        make_entity(0, "question", (2, 2, 4, 4)),
        make_entity(1, "other", (0, 0, 6, 6)),
        make_entity(2, "answer", (1, 1, 5, 5)),
    ], width=6, height=6)
    assert np.array_equal(rasterize_target(reordered).classes, mask)


def test_out_of_page_box_is_clamped_and_counted(caplog):
    form = make_form([make_entity(0, "answer", (3, 1, 10, 9))], width=5, height=4)
    with caplog.at_level(logging.WARNING, logger="formkv.raster"):
        mask = rasterize_target(form)
    assert mask.clamped_boxes == 1
    assert mask.class_counts()[SegClass.VALUE] == 2 * 3  # cols 3..4, rows 1..3
    assert any("clipped" in record.message for record in caplog.records)


def test_target_matches_priority_paint_oracle():
    rng = random.Random(3)
    for _ in range(50):
        form = random_boxes_form(rng)
        expected = class_priority_paint(
            form.height, form.width,
            [(e.box.left, e.box.top, e.box.right, e.box.bottom,
              int(LABEL_TO_CLASS[e.label])) for e in form.entities])
        assert np.array_equal(rasterize_target(form).classes,
                              np.array(expected, dtype=np.uint8))


# ---------------------------------------------------------------------------
# ClassMask container
# ---------------------------------------------------------------------------

def test_class_mask_rejects_bad_values_and_shapes():
    with pytest.raises(ValueError):
        ClassMask(np.full((2, 2), 4, dtype=np.uint8))
    with pytest.raises(ValueError):
        ClassMask(np.zeros((2, 2, 2), dtype=np.uint8))


def test_one_hot_inverts_to_classes():
    mask = rasterize_target(form_4x4_single_question())
    hot = mask.one_hot()
    assert hot.shape == (4, 4, NUM_CLASSES)
    assert hot.dtype == np.float32
    assert np.array_equal(hot.sum(axis=-1), np.ones((4, 4), dtype=np.float32))
    assert np.array_equal(hot.argmax(axis=-1).astype(np.uint8), mask.classes)


def test_class_counts_match_histogram():
    rng = random.Random(9)
    for _ in range(20):
        mask = rasterize_target(random_boxes_form(rng))
        expected = [int((mask.classes == c).sum()) for c in range(NUM_CLASSES)]
        assert list(mask.class_counts()) == expected


def test_padding_to_next_multiple_of_16():
    mask = ClassMask(np.zeros((100, 100), dtype=np.uint8))
    padded, pad_right, pad_bottom = mask.padded()
    assert (pad_right, pad_bottom) == (12, 12)
    assert padded.classes.shape == (112, 112)
    assert np.array_equal(padded.classes[:100, :100], mask.classes)
    assert (padded.classes[100:, :] == SegClass.BACKGROUND).all()
    assert (padded.classes[:, 100:] == SegClass.BACKGROUND).all()
    # already aligned: same object, no pads
    aligned = ClassMask(np.zeros((32, 16), dtype=np.uint8))
    same, r, b = aligned.padded()
    assert same is aligned and (r, b) == (0, 0)


# ---------------------------------------------------------------------------
# text mask and grayscale
# ---------------------------------------------------------------------------

def test_text_mask_unions_word_boxes_only():
    form = make_form([
        make_entity(0, "question", (0, 0, 8, 8),
                    words=((1, 1, 3, 2), (2, 1, 5, 3))),
        make_entity(1, "other", (0, 0, 8, 8)),  # no words, paints nothing
    ], width=8, height=8)
    mask = rasterize_text_mask(form)
    assert mask.dtype == np.uint8
    on = {(r, c) for r, c in zip(*np.nonzero(mask))}
    assert on == {(1, 1), (1, 2), (1, 3), (1, 4), (2, 2), (2, 3), (2, 4)}


def test_text_mask_empty_without_words():
    assert rasterize_text_mask(make_form([], width=3, height=3)).sum() == 0


def test_grayscale_matches_rec601_rounding():
    rng = random.Random(17)
    samples = [(0, 0, 0), (255, 255, 255), (255, 0, 0), (0, 255, 0), (0, 0, 255)]
    samples += [(rng.randrange(256), rng.randrange(256), rng.randrange(256))
                for _ in range(100)]
    image = np.array([samples], dtype=np.uint8)
    gray = to_grayscale(image)
    assert list(gray[0]) == [gray_601(r, g, b) for r, g, b in samples]


def test_grayscale_passthrough_and_rejects():
    flat = np.arange(6, dtype=np.uint8).reshape(2, 3)
    assert np.array_equal(to_grayscale(flat), flat)
    with pytest.raises(ValueError):
        to_grayscale(np.zeros((2, 3, 2), dtype=np.uint8))


# ---------------------------------------------------------------------------
# input tensor
# ---------------------------------------------------------------------------

def test_build_input_channels_and_padding():
    form = make_form([make_entity(0, "question", (0, 0, 2, 2),
                                  words=((0, 0, 2, 1),))],
                     width=20, height=10)
    image = np.full((10, 20), 255, dtype=np.uint8)
    tensor = build_input(form, image)
    assert tensor.data.shape == (16, 32, 2)
    assert tensor.data.dtype == np.float32
    assert (tensor.pad_right, tensor.pad_bottom) == (12, 6)
    assert tensor.text_mask[0, 0] == 1.0 and tensor.text_mask[1, 0] == 0.0
    assert tensor.gray[0, 0] == 1.0
    # padded band is zero in both channels
    assert tensor.data[10:, :, :].sum() == 0
    assert tensor.data[:, 20:, :].sum() == 0

    unpadded = build_input(form, image, pad16=False)
    assert unpadded.data.shape == (10, 20, 2)
    assert np.array_equal(unpadded.data, tensor.data[:10, :20])


def test_build_input_black_page_is_zero_intensity():
    form = make_form([], width=16, height=16)
    tensor = build_input(form, np.zeros((16, 16), dtype=np.uint8))
    assert tensor.gray.max() == 0.0


def test_build_input_rejects_mismatched_image():
    form = make_form([], width=8, height=8)
    with pytest.raises(ValueError, match="8x8"):
        build_input(form, np.zeros((9, 8), dtype=np.uint8))


# ---------------------------------------------------------------------------
# export / import round trip
# ---------------------------------------------------------------------------

def test_export_pair_round_trips_bit_identical(tmp_path):
    rng = random.Random(23)
    records = []
    for i in range(8):
        form = random_boxes_form(rng, source_id=f"doc{i}")
        image = np.asarray(
            [[rng.randrange(256) for _ in range(form.width)]
             for _ in range(form.height)], dtype=np.uint8).reshape(form.height,
                                                                   form.width)
        record = export_pair(form, image, tmp_path)
        records.append(record)

        target, pr, pb = rasterize_target(form).padded()
        assert (record.pad_right, record.pad_bottom) == (pr, pb)
        assert load_target(tmp_path / record.target) == target
        tensor = build_input(form, image)
        assert np.array_equal(load_input(tmp_path / record.text,
                                         tmp_path / record.gray), tensor.data)

    write_manifest(records, tmp_path / "manifest.json")
    loaded = read_manifest(tmp_path / "manifest.json")
    assert loaded == sorted(records, key=lambda r: r.source_id)


def test_export_pair_no_padding_mode(tmp_path):
    form = make_form([make_entity(0, "answer", (0, 0, 3, 3))], width=5, height=5)
    image = np.full((5, 5), 128, dtype=np.uint8)
    record = export_pair(form, image, tmp_path, pad16=False)
    assert (record.pad_right, record.pad_bottom) == (0, 0)
    assert load_target(tmp_path / record.target).classes.shape == (5, 5)


def test_load_target_rejects_non_mask(tmp_path):
    from PIL import Image

    path = tmp_path / "notamask.png"
    Image.fromarray(np.full((4, 4), 200, dtype=np.uint8), mode="L").save(path)
    with pytest.raises(ValueError, match="values above 3"):
        load_target(path)


def test_load_input_rejects_non_binary_text(tmp_path):
    from PIL import Image

    text = tmp_path / "t.png"
    gray = tmp_path / "g.png"
    Image.fromarray(np.full((4, 4), 7, dtype=np.uint8), mode="L").save(text)
    Image.fromarray(np.zeros((4, 4), dtype=np.uint8), mode="L").save(gray)
    with pytest.raises(ValueError, match="binary"):
        load_input(text, gray)
