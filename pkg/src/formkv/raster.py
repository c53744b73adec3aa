"""Rasterization of revised forms into segmentation inputs and targets.

Targets paint entity boxes into a 4-class per-pixel map (key, value,
other, background) with a fixed overlap priority key > value > other.
Inputs are 2-channel: a binary text mask built from word boxes (stand-in
for a text detector's output) and the grayscale page scaled to [0, 1].
All boxes use half-open pixel coverage.

On-disk formats (one triple per form, plus a manifest):

* ``<id>_target.png`` single-channel 8-bit, pixel values 0..3
* ``<id>_text.png``   single-channel 8-bit, values {0, 255}
* ``<id>_gray.png``   single-channel 8-bit page intensity
* ``manifest.json``   list of {source_id, width, height, pad_right,
  pad_bottom, target, text, gray}
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .kernels import fill_boxes
from .model import Form

log = logging.getLogger(__name__)

PAD_MULTIPLE = 16


class SegClass(IntEnum):
    KEY = 0
    VALUE = 1
    OTHER = 2
    BACKGROUND = 3


NUM_CLASSES = 4

# question/answer carry the key/value semantics; residual headers fall
# back to other
LABEL_TO_CLASS = {
    "question": SegClass.KEY,
    "answer": SegClass.VALUE,
    "other": SegClass.OTHER,
    "header": SegClass.OTHER,
}

# painted low priority first, so later classes win overlaps
_PAINT_ORDER = (SegClass.OTHER, SegClass.VALUE, SegClass.KEY)


@dataclass
class ClassMask:
    """Per-pixel class indices with a one-hot view.

    ``clamped_boxes`` counts source boxes that had to be clipped to the
    page during rasterization.
    """

    classes: np.ndarray  # (H, W) uint8, values 0..3
    clamped_boxes: int = 0

    def __post_init__(self):
        self.classes = np.ascontiguousarray(self.classes, dtype=np.uint8)
        if self.classes.ndim != 2:
            raise ValueError(f"class map must be 2-D, got shape {self.classes.shape}")
        if self.classes.size and self.classes.max() >= NUM_CLASSES:
            raise ValueError("class map holds values outside 0..3")

    @property
    def height(self) -> int:
        return self.classes.shape[0]

    @property
    def width(self) -> int:
        return self.classes.shape[1]

    def one_hot(self) -> np.ndarray:
        """(H, W, 4) float32; exactly one channel set per pixel."""
        return np.eye(NUM_CLASSES, dtype=np.float32)[self.classes]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.classes.ravel(), minlength=NUM_CLASSES)[:NUM_CLASSES]

    def padded(self, multiple: int = PAD_MULTIPLE) -> tuple["ClassMask", int, int]:
        """Pad bottom/right with background to the next multiple."""
        pad_bottom = -self.height % multiple
        pad_right = -self.width % multiple
        if not (pad_bottom or pad_right):
            return self, 0, 0
        padded = np.pad(self.classes, ((0, pad_bottom), (0, pad_right)),
                        constant_values=int(SegClass.BACKGROUND))
        return ClassMask(padded, self.clamped_boxes), pad_right, pad_bottom

    def __eq__(self, other):
        if not isinstance(other, ClassMask):
            return NotImplemented
        return np.array_equal(self.classes, other.classes)


def rasterize_target(form: Form) -> ClassMask:
    """Paint entity boxes into the 4-class target map.

    Expects revised labels (question/answer/other); any residual header
    is treated as other. Overlaps resolve by key > value > other. Boxes
    reaching outside the page are clipped and counted in
    ``clamped_boxes``.
    """
    canvas = np.full((form.height, form.width), int(SegClass.BACKGROUND), dtype=np.uint8)
    boxes_by_class: dict[SegClass, list[list[int]]] = {cls: [] for cls in _PAINT_ORDER}
    for entity in form.entities:
        boxes_by_class[LABEL_TO_CLASS[entity.label]].append(entity.box.as_list())
    clamped = 0
    for seg_class in _PAINT_ORDER:
        boxes = boxes_by_class[seg_class]
        if boxes:
            clamped += fill_boxes(canvas, np.asarray(boxes, dtype=np.int64),
                                  int(seg_class))
    if clamped:
        log.warning("%s: clipped %d box(es) to the %dx%d page",
                    form.source_id, clamped, form.width, form.height)
    return ClassMask(canvas, clamped_boxes=clamped)


def rasterize_text_mask(form: Form) -> np.ndarray:
    """Binary (H, W) uint8 union of all word boxes; 1 inside, 0 outside.

    Word granularity mirrors what a text detector would produce; entity
    boxes are not used.
    """
    canvas = np.zeros((form.height, form.width), dtype=np.uint8)
    boxes = [word.box.as_list() for entity in form.entities for word in entity.words]
    if boxes:
        clamped = fill_boxes(canvas, np.asarray(boxes, dtype=np.int64), 1)
        if clamped:
            log.warning("%s: clipped %d word box(es) to the page", form.source_id, clamped)
    return canvas


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """8-bit grayscale page; RGB collapses with the 0.299/0.587/0.114 weights."""
    image = np.asarray(image)
    if image.ndim == 2:
        return image.astype(np.uint8)
    if image.ndim == 3 and image.shape[2] >= 3:
        rgb = image[:, :, :3].astype(np.float64)
        luma = rgb[:, :, 0] * 0.299 + rgb[:, :, 1] * 0.587 + rgb[:, :, 2] * 0.114
        return np.floor(luma + 0.5).clip(0, 255).astype(np.uint8)
    raise ValueError(f"expected (H, W) or (H, W, 3) image, got shape {image.shape}")


@dataclass
class InputTensor:
    """2-channel model input: text mask and [0, 1] page intensity.

    ``data`` is (H, W, 2) float32 with channel 0 in {0, 1} and channel 1
    in [0, 1]; padding (bottom/right, zeros) is recorded so targets can
    be aligned.
    """

    data: np.ndarray
    source_id: str = ""
    pad_right: int = 0
    pad_bottom: int = 0

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def text_mask(self) -> np.ndarray:
        return self.data[:, :, 0]

    @property
    def gray(self) -> np.ndarray:
        return self.data[:, :, 1]


def build_input(form: Form, image: np.ndarray, *, pad16: bool = True) -> InputTensor:
    """Stack text mask and grayscale page; optionally pad to multiples of 16.

    The image must match the form's page dimensions exactly.
    """
    gray8 = to_grayscale(image)
    if gray8.shape != (form.height, form.width):
        raise ValueError(
            f"{form.source_id}: image is {gray8.shape[1]}x{gray8.shape[0]} but the "
            f"form says {form.width}x{form.height}")
    text = rasterize_text_mask(form).astype(np.float32)
    gray = gray8.astype(np.float32) / 255.0
    data = np.stack([text, gray], axis=-1)
    pad_right = pad_bottom = 0
    if pad16:
        pad_bottom = -form.height % PAD_MULTIPLE
        pad_right = -form.width % PAD_MULTIPLE
        if pad_bottom or pad_right:
            data = np.pad(data, ((0, pad_bottom), (0, pad_right), (0, 0)))
    return InputTensor(data=data, source_id=form.source_id,
                       pad_right=pad_right, pad_bottom=pad_bottom)


# ---------------------------------------------------------------------------
# export / import
# ---------------------------------------------------------------------------

@dataclass
class ExportRecord:
    source_id: str
    width: int
    height: int
    pad_right: int
    pad_bottom: int
    target: str
    text: str
    gray: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExportRecord":
        return cls(**{key: raw[key] for key in
                      ("source_id", "width", "height", "pad_right", "pad_bottom",
                       "target", "text", "gray")})


def _save_png(array: np.ndarray, path: Path) -> None:
    from PIL import Image

    Image.fromarray(np.ascontiguousarray(array, dtype=np.uint8), mode="L").save(path)


def _load_png(path: Path | str) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as image:
        return np.asarray(image.convert("L"), dtype=np.uint8)


def export_pair(form: Form, image: np.ndarray, out_dir: Path | str, *,
                pad16: bool = True) -> ExportRecord:
    """Write one form's input channels and target mask; returns its record."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tensor = build_input(form, image, pad16=pad16)
    target, pad_right, pad_bottom = rasterize_target(form).padded() if pad16 else \
        (rasterize_target(form), 0, 0)
    if (pad_right, pad_bottom) != (tensor.pad_right, tensor.pad_bottom):
        raise RuntimeError("input/target padding disagree")  # same page dims, same pads

    names = {kind: f"{form.source_id}_{kind}.png" for kind in ("target", "text", "gray")}
    _save_png(target.classes, out_dir / names["target"])
    _save_png((tensor.text_mask * 255.0).astype(np.uint8), out_dir / names["text"])
    _save_png(np.floor(tensor.gray * 255.0 + 0.5).astype(np.uint8), out_dir / names["gray"])
    return ExportRecord(source_id=form.source_id, width=form.width, height=form.height,
                        pad_right=pad_right, pad_bottom=pad_bottom,
                        target=names["target"], text=names["text"], gray=names["gray"])


def write_manifest(records, path: Path | str) -> None:
    payload = [record.to_dict() for record in
               sorted(records, key=lambda r: r.source_id)]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", "utf-8")


def read_manifest(path: Path | str) -> list[ExportRecord]:
    return [ExportRecord.from_dict(raw)
            for raw in json.loads(Path(path).read_text("utf-8"))]


def load_target(path: Path | str) -> ClassMask:
    array = _load_png(path)
    if array.size and array.max() >= NUM_CLASSES:
        raise ValueError(f"{path}: not a target mask (values above 3)")
    return ClassMask(array)


def load_input(text_path: Path | str, gray_path: Path | str) -> np.ndarray:
    """(H, W, 2) float32 rebuilt from the exported channel files."""
    text = _load_png(text_path)
    if not np.isin(text, (0, 255)).all():
        raise ValueError(f"{text_path}: not a binary text mask")
    gray = _load_png(gray_path)
    if text.shape != gray.shape:
        raise ValueError("text/gray channel shapes disagree")
    return np.stack([text.astype(np.float32) / 255.0,
                     gray.astype(np.float32) / 255.0], axis=-1)
