"""Key/value component extraction and nearest-neighbour pairing.

Components are 8-connected blobs of KEY or VALUE pixels in a class map,
speckle below ``min_area`` dropped. Every VALUE component is matched to
the KEY component with the nearest centroid; several values may share a
key, and values stay unmatched only when the mask has no key component
at all.

Centroid comparisons run on exact rationals so that the winner of a tie
is reproducible: equal distances resolve to the key that comes first in
(top, left) order. The reported distance itself is the ordinary
Euclidean float.

When a ground-truth form is available, each pair gets a hit flag: the
key bbox must overlap a question entity with IoU >= 0.5 and the value
bbox must overlap, again at IoU >= 0.5, an answer linked from that same
question. The threshold test is done in integers (2 * intersection >=
union), so boxes exactly at 0.5 count as hits on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .kernels import label_components
from .model import BBox, Form
from .raster import ClassMask, SegClass
from .revise import build_graph

DEFAULT_MIN_AREA = 4


@dataclass(frozen=True)
class Component:
    """One connected blob of a single foreground class."""

    cls: SegClass
    area: int
    bbox: BBox
    # centroid of the pixel index grid, (x, y) = (mean column, mean row)
    centroid: tuple[float, float]
    centroid_exact: tuple[Fraction, Fraction]

    def to_record(self) -> dict:
        return {
            "class": self.cls.name.lower(),
            "area": self.area,
            "box": self.bbox.as_list(),
            "centroid": [self.centroid[0], self.centroid[1]],
        }


@dataclass(frozen=True)
class KVPair:
    """A value component with its nearest key and their centroid distance."""

    key: Component
    value: Component
    distance: float


def _squared_distance(a: Component, b: Component) -> Fraction:
    dx = a.centroid_exact[0] - b.centroid_exact[0]
    dy = a.centroid_exact[1] - b.centroid_exact[1]
    return dx * dx + dy * dy


def _components_of_class(classes: np.ndarray, cls: SegClass,
                         min_area: int) -> list[Component]:
    labels, count = label_components(classes == int(cls))
    if count == 0:
        return []
    rows, cols = np.nonzero(labels)
    ids = labels[rows, cols]
    areas = np.bincount(ids, minlength=count + 1)
    sum_r = np.zeros(count + 1, dtype=np.int64)
    sum_c = np.zeros(count + 1, dtype=np.int64)
    np.add.at(sum_r, ids, rows)
    np.add.at(sum_c, ids, cols)
    min_r = np.full(count + 1, classes.shape[0], dtype=np.int64)
    min_c = np.full(count + 1, classes.shape[1], dtype=np.int64)
    max_r = np.full(count + 1, -1, dtype=np.int64)
    max_c = np.full(count + 1, -1, dtype=np.int64)
    np.minimum.at(min_r, ids, rows)
    np.minimum.at(min_c, ids, cols)
    np.maximum.at(max_r, ids, rows)
    np.maximum.at(max_c, ids, cols)

    out = []
    for i in range(1, count + 1):
        area = int(areas[i])
        if area < min_area:
            continue
        cx = Fraction(int(sum_c[i]), area)
        cy = Fraction(int(sum_r[i]), area)
        out.append(Component(
            cls=cls,
            area=area,
            bbox=BBox(int(min_c[i]), int(min_r[i]), int(max_c[i]) + 1, int(max_r[i]) + 1),
            centroid=(float(cx), float(cy)),
            centroid_exact=(cx, cy),
        ))
    out.sort(key=lambda c: (c.bbox.top, c.bbox.left))
    return out


def extract_components(mask, min_area: int = DEFAULT_MIN_AREA) -> list[Component]:
    """KEY then VALUE components, each class ordered by (top, left)."""
    classes = mask.classes if isinstance(mask, ClassMask) else np.asarray(mask)
    if classes.ndim != 2:
        raise ValueError(f"class map must be 2-D, got shape {classes.shape}")
    if min_area < 1:
        raise ValueError(f"min_area must be >= 1, got {min_area}")
    return (_components_of_class(classes, SegClass.KEY, min_area)
            + _components_of_class(classes, SegClass.VALUE, min_area))


def pair_nearest(components: list[Component]) -> list[KVPair]:
    """Match every value to its nearest key; ties go to the earlier key."""
    keys = [c for c in components if c.cls is SegClass.KEY]
    values = [c for c in components if c.cls is SegClass.VALUE]
    pairs = []
    for value in values:
        if not keys:
            break
        best = 0
        best_sq = _squared_distance(keys[0], value)
        for index in range(1, len(keys)):
            sq = _squared_distance(keys[index], value)
            if sq < best_sq:
                best, best_sq = index, sq
        pairs.append(KVPair(key=keys[best], value=value,
                            distance=math.sqrt(float(best_sq))))
    return pairs


def unmatched_values(components: list[Component]) -> list[Component]:
    """Value components left unpaired (the no-keys-at-all case)."""
    if any(c.cls is SegClass.KEY for c in components):
        return []
    return [c for c in components if c.cls is SegClass.VALUE]


def find_pairs(mask, min_area: int = DEFAULT_MIN_AREA) -> tuple[list[KVPair], list[Component]]:
    """Extract and pair in one call; returns (pairs, unmatched values)."""
    components = extract_components(mask, min_area)
    return pair_nearest(components), unmatched_values(components)


def _intersection_area(a: BBox, b: BBox) -> int:
    width = min(a.right, b.right) - max(a.left, b.left)
    height = min(a.bottom, b.bottom) - max(a.top, b.top)
    return width * height if width > 0 and height > 0 else 0


def box_iou_at_least_half(a: BBox, b: BBox) -> bool:
    """IoU(a, b) >= 0.5, decided in exact integer arithmetic."""
    inter = _intersection_area(a, b)
    union = a.area + b.area - inter
    return union > 0 and 2 * inter >= union


def _hit_entities(pair: KVPair, form: Form, graph) -> tuple[int, int] | None:
    """(question id, answer id) backing the pair, or None when no hit."""
    for question in sorted(form.entities, key=lambda e: e.id):
        if question.label != "question":
            continue
        if not box_iou_at_least_half(pair.key.bbox, question.box):
            continue
        for successor in graph.successors(question.id):
            answer = form.entity(successor)
            if answer.label != "answer":
                continue
            if box_iou_at_least_half(pair.value.bbox, answer.box):
                return question.id, answer.id
    return None


def pairs_to_report(pairs: list[KVPair], form: Form | None = None) -> list[dict]:
    """One record per pair; hit flags only when ground truth is given."""
    graph = build_graph(form, skip_dangling=True) if form is not None else None
    records = []
    for pair in pairs:
        record = {
            "key_box": pair.key.bbox.as_list(),
            "value_box": pair.value.bbox.as_list(),
            "distance": pair.distance,
        }
        if form is not None:
            hit = _hit_entities(pair, form, graph)
            record["hit"] = hit is not None
            if hit is not None:
                record["question_id"], record["answer_id"] = hit
        records.append(record)
    return records
