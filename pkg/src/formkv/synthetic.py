"""Seeded synthetic form datasets for demos and end-to-end tests.

Generates small FUNSD-layout datasets (annotations plus page images)
without any external data. Forms are structurally valid: ids unique,
words inside their entity boxes, links recorded in both endpoints, no
dangling references, no cycles.

The generator deliberately reproduces the label defects the reviser
exists for: linked headers, chains whose interior nodes carry the raw
"answer" label, and isolated entities. Running the reviser over a
synthetic split therefore changes labels on the first pass and nothing
on the second.
"""

from __future__ import annotations

import random
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import annotations_dir, images_dir, write_annotations
from .model import BBox, Entity, Form, Word

PAGE_WIDTH = 400
PAGE_HEIGHT = 300


def _words_for(box: BBox, rng: random.Random, text: str) -> list[Word]:
    """Cut the box into 1-3 word boxes with small gaps, all inside it."""
    count = rng.randint(1, min(3, max(1, box.width // 24)))
    slot = box.width // count
    words = []
    for i in range(count):
        left = box.left + i * slot
        right = box.right if i == count - 1 else left + slot - 2
        words.append(Word(text=f"{text}{i}", box=BBox(left, box.top, right, box.bottom)))
    return words


def _link(a: Entity, b: Entity) -> tuple[Entity, Entity]:
    """Record the directed pair (a, b) in both endpoints, FUNSD style."""
    pair = (a.id, b.id)
    return (Entity(a.id, a.label, a.box, a.words, a.links + (pair,)),
            Entity(b.id, b.label, b.box, b.words, b.links + (pair,)))


def make_form(source_id: str, rng: random.Random, *,
              width: int = PAGE_WIDTH, height: int = PAGE_HEIGHT) -> Form:
    """One synthetic form: header, q/a rows, a 3-chain, an isolated box."""
    entities: list[Entity] = []
    next_id = 0

    def add(label: str, box: BBox, text: str) -> Entity:
        nonlocal next_id
        entity = Entity(next_id, label, box, tuple(_words_for(box, rng, text)), ())
        next_id += 1
        entities.append(entity)
        return entity

    # one shared width and left edge for header and questions keeps every
    # potential key centroid on the same x, so the nearest key of each
    # answer is the one in its own row, before and after revision
    question_width = 90
    header = add("header", BBox(16, 8, 16 + question_width, 26), "hdr")

    row_height = 20
    y = 36
    rows = rng.randint(2, 4)
    first_question = None
    for row in range(rows):
        question = add("question", BBox(16, y, 16 + question_width, y + row_height),
                       f"q{row}_")
        left = question.box.right + 12
        # clipping the answer width at 90 bounds its centroid's distance to
        # the row key by 102px, under the 120px gap to the chain-row key
        answer = add("answer", BBox(left, y, left + rng.randint(60, 90),
                                    y + row_height), f"a{row}_")
        question, answer = _link(question, answer)
        entities[question.id], entities[answer.id] = question, answer
        if first_question is None:
            first_question = question
        y += row_height + 8

    # chain q -> mid -> tail; the middle node carries the raw "answer"
    # label half the time, which is exactly what revision straightens out.
    # The chain sits near the page bottom so its mid node, once a key,
    # stays farther from the q/a rows above than their own-row keys.
    chain_y = height - 60
    mid_label = "answer" if rng.random() < 0.5 else "question"
    head = add("question", BBox(16, chain_y, 16 + question_width,
                                chain_y + row_height), "ch_")
    mid = add(mid_label, BBox(130, chain_y, 230, chain_y + row_height), "cm_")
    tail = add("answer", BBox(250, chain_y, min(350, width - 8),
                              chain_y + row_height), "ct_")
    head, mid = _link(head, mid)
    entities[head.id], entities[mid.id] = head, mid
    mid, tail = _link(mid, tail)
    entities[mid.id], entities[tail.id] = mid, tail

    # linked header (revises to question) or free-standing (revises to other)
    if rng.random() < 0.5:
        linked_header, target = _link(entities[header.id], entities[first_question.id])
        entities[header.id], entities[target.id] = linked_header, target

    if rng.random() < 0.7:
        add("other", BBox(16, height - 30, 140, height - 12), "note")

    return Form(source_id=source_id, split="train", width=width, height=height,
                entities=tuple(entities))


# per label: field wash shade, stroke column step, stroke shade range.
# Keys print dense and dark, answers light on a pale wash, like bold
# labels next to handwriting; the page image alone is informative about
# the label, which the text mask never is.
_INK = {
    "header": (90, 1, 20, 50),
    "question": (120, 2, 20, 60),
    "answer": (200, 3, 60, 110),
    "other": (235, 4, 120, 160),
}


def make_page_image(form: Form, rng: random.Random) -> np.ndarray:
    """White page; each word box gets a label-styled wash plus strokes."""
    page = np.full((form.height, form.width), 255, dtype=np.uint8)
    for entity in form.entities:
        wash, step, lo, hi = _INK[entity.label]
        for word in entity.words:
            box = word.box
            page[box.top:box.bottom, box.left:box.right] = wash
            shade = rng.randint(lo, hi)
            for x in range(box.left + 1, box.right - 1, step):
                page[box.top + 2:box.bottom - 2, x] = shade
    return page


def make_dataset(root, *, train_forms: int = 8, test_forms: int = 3,
                 seed: int = 0, width: int = PAGE_WIDTH,
                 height: int = PAGE_HEIGHT) -> dict[str, list[str]]:
    """Write a full two-split dataset under ``root``; returns ids per split."""
    root = Path(root)
    rng = random.Random(seed)
    written: dict[str, list[str]] = {}
    for split, count, base in (("training", train_forms, 10_000_000),
                               ("testing", test_forms, 20_000_000)):
        forms = []
        for index in range(count):
            form = make_form(str(base + index), rng, width=width, height=height)
            forms.append(form)
        write_annotations(forms, root, split)
        image_dir = images_dir(root, split)
        image_dir.mkdir(parents=True, exist_ok=True)
        for form in forms:
            page = make_page_image(form, rng)
            Image.fromarray(page, mode="L").save(image_dir / f"{form.source_id}.png")
        written[split] = [form.source_id for form in forms]
    # directories exist even when a split is empty, so loaders see the layout
    for split in ("training", "testing"):
        annotations_dir(root, split).mkdir(parents=True, exist_ok=True)
        images_dir(root, split).mkdir(parents=True, exist_ok=True)
    return written


def random_class_map(rng: np.random.Generator, height: int, width: int,
                     max_blobs: int = 6) -> np.ndarray:
    """Random rectangle soup over BACKGROUND; handy mask-shaped test input."""
    from .raster import SegClass

    classes = np.full((height, width), int(SegClass.BACKGROUND), dtype=np.uint8)
    for _ in range(int(rng.integers(0, max_blobs + 1))):
        top = int(rng.integers(0, height))
        left = int(rng.integers(0, width))
        bottom = int(rng.integers(top + 1, height + 1))
        right = int(rng.integers(left + 1, width + 1))
        value = int(rng.integers(0, 3))
        classes[top:bottom, left:right] = value
    return classes
