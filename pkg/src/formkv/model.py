"""Typed model of FUNSD-style form annotations with lossless parse/serialize.

An annotation file is UTF-8 JSON: a top-level object whose ``"form"`` key
holds a list of entities. Each entity carries an integer ``id`` unique
within the form, a ``label`` out of {header, question, answer, other}, a
``box`` ``[left, top, right, bottom]`` in pixels, ``words`` (text + box),
and ``linking`` pairs ``[from_id, to_id]``. Page dimensions are not part
of the annotation; they come from the paired page image.

Parsing keeps every schema field verbatim (including empty word text and
duplicate link records) and ignores unknown extra keys. Asymmetric or
dangling links are accepted here and reported by the linter; only
structurally invalid boxes and unknown labels are rejected.
"""

from __future__ import annotations

import json
import operator
from dataclasses import dataclass, field
from typing import Iterable, Iterator

ENTITY_LABELS = ("header", "question", "answer", "other")
SPLITS = ("train", "test")


class AnnotationError(Exception):
    """Base class for annotation ingestion failures."""


class ParseError(AnnotationError):
    """Syntactically malformed annotation text.

    ``offset`` is the byte offset of the failure within the raw input.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class SchemaError(AnnotationError):
    """Well-formed JSON that violates the annotation schema."""

    def __init__(self, message: str, source_id: str | None = None,
                 entity_id: int | None = None):
        super().__init__(message)
        self.source_id = source_id
        self.entity_id = entity_id


@dataclass(frozen=True, order=True)
class BBox:
    """Axis-aligned pixel box ``[left, top, right, bottom]``.

    Coordinates are non-negative integers with ``left <= right`` and
    ``top <= bottom``. Pixel coverage is half-open throughout the
    toolkit: columns ``[left, right)``, rows ``[top, bottom)``.
    """

    left: int
    top: int
    right: int
    bottom: int

    def __post_init__(self):
        for name in ("left", "top", "right", "bottom"):
            value = getattr(self, name)
            if isinstance(value, bool):
                raise ValueError(f"box {name} must be an integer, got {value!r}")
            try:
                coerced = operator.index(value)
            except TypeError:
                raise ValueError(f"box {name} must be an integer, got {value!r}") from None
            object.__setattr__(self, name, coerced)
        if self.left < 0 or self.top < 0:
            raise ValueError(f"box coordinates must be non-negative: {self.as_list()}")
        if self.right < self.left or self.bottom < self.top:
            raise ValueError(f"inverted box: {self.as_list()}")

    @property
    def width(self) -> int:
        return self.right - self.left

    @property
    def height(self) -> int:
        return self.bottom - self.top

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_list(self) -> list[int]:
        return [self.left, self.top, self.right, self.bottom]

    @classmethod
    def from_list(cls, raw) -> "BBox":
        if not isinstance(raw, (list, tuple)) or len(raw) != 4:
            raise ValueError(f"box must be a 4-element [l, t, r, b] list, got {raw!r}")
        return cls(*raw)

    def dilated(self, margin: int) -> "BBox":
        """Box grown by ``margin`` pixels on every side, clipped at zero."""
        return BBox(max(self.left - margin, 0), max(self.top - margin, 0),
                    self.right + margin, self.bottom + margin)

    def contains(self, other: "BBox") -> bool:
        return (self.left <= other.left and self.top <= other.top
                and other.right <= self.right and other.bottom <= self.bottom)

    def center(self) -> tuple[int, int]:
        return (self.left + self.right) // 2, (self.top + self.bottom) // 2


@dataclass(frozen=True)
class Word:
    """One word: verbatim text (may be empty) and its box."""

    text: str
    box: BBox


@dataclass(frozen=True)
class Entity:
    """A semantic entity: label, box, ordered words, and link records.

    ``links`` holds the stored ``(from_id, to_id)`` pairs exactly as they
    appear in the file. The annotation convention is that the entity lists
    itself first, but real data also mirrors the same ordered pair into the
    other endpoint's list; both are kept verbatim.
    """

    id: int
    label: str
    box: BBox
    words: tuple[Word, ...] = ()
    links: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.label not in ENTITY_LABELS:
            raise ValueError(
                f"entity {self.id}: unknown label {self.label!r} "
                f"(expected one of {ENTITY_LABELS})")
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "links", tuple((int(a), int(b)) for a, b in self.links))


@dataclass(frozen=True)
class Form:
    """One document's annotation plus its page geometry."""

    source_id: str
    width: int
    height: int
    entities: tuple[Entity, ...] = ()
    split: str = "train"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(
                f"{self.source_id}: page dimensions must be positive, "
                f"got {self.width}x{self.height}")
        if self.split not in SPLITS:
            raise ValueError(f"{self.source_id}: split must be one of {SPLITS}")
        object.__setattr__(self, "entities", tuple(self.entities))
        seen = set()
        for entity in self.entities:
            if entity.id in seen:
                raise ValueError(f"{self.source_id}: duplicate entity id {entity.id}")
            seen.add(entity.id)

    @property
    def entity_ids(self) -> frozenset[int]:
        return frozenset(entity.id for entity in self.entities)

    def entity(self, entity_id: int) -> Entity:
        for entity in self.entities:
            if entity.id == entity_id:
                return entity
        raise KeyError(f"{self.source_id}: no entity with id {entity_id}")

    def iter_link_records(self) -> Iterator[tuple[int, int, int]]:
        """Yield ``(from_id, to_id, stored_by)`` for every stored pair."""
        for entity in self.entities:
            for from_id, to_id in entity.links:
                yield from_id, to_id, entity.id


# ---------------------------------------------------------------------------
# parse / serialize
# ---------------------------------------------------------------------------

def _require_int(value, what: str, source_id: str, entity_id=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{source_id}: {what} must be an integer, got {value!r}",
                          source_id=source_id, entity_id=entity_id)
    return value


def _parse_box(raw, what: str, source_id: str, entity_id) -> BBox:
    try:
        return BBox.from_list(raw)
    except ValueError as exc:
        raise SchemaError(f"{source_id}: entity {entity_id}: {what}: {exc}",
                          source_id=source_id, entity_id=entity_id) from exc


def parse_form(raw: bytes | str, source_id: str, page_dims: tuple[int, int],
               split: str = "train") -> Form:
    """Parse one annotation file into a :class:`Form`.

    ``page_dims`` is ``(width, height)`` of the page image. Raises
    :class:`ParseError` for malformed JSON (with the byte offset) and
    :class:`SchemaError` for schema violations (unknown label, bad box,
    missing field), naming the offending entity where possible.
    """
    text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise ParseError(f"{source_id}: malformed annotation at byte {offset}: {exc.msg}",
                         offset=offset) from exc

    if not isinstance(doc, dict) or not isinstance(doc.get("form"), list):
        raise SchemaError(f"{source_id}: top level must be an object with a 'form' list",
                          source_id=source_id)

    entities = []
    seen_ids = set()
    for index, raw_entity in enumerate(doc["form"]):
        if not isinstance(raw_entity, dict):
            raise SchemaError(f"{source_id}: entity #{index} is not an object",
                              source_id=source_id)
        if "id" not in raw_entity:
            raise SchemaError(f"{source_id}: entity #{index} has no 'id'",
                              source_id=source_id)
        entity_id = _require_int(raw_entity["id"], f"entity #{index} id", source_id)
        if entity_id in seen_ids:
            raise SchemaError(f"{source_id}: duplicate entity id {entity_id}",
                              source_id=source_id, entity_id=entity_id)
        seen_ids.add(entity_id)

        label = raw_entity.get("label")
        if label not in ENTITY_LABELS:
            raise SchemaError(
                f"{source_id}: entity {entity_id}: unknown label {label!r} "
                f"(expected one of {ENTITY_LABELS})",
                source_id=source_id, entity_id=entity_id)

        box = _parse_box(raw_entity.get("box"), "box", source_id, entity_id)

        words = []
        raw_words = raw_entity.get("words", [])
        if not isinstance(raw_words, list):
            raise SchemaError(f"{source_id}: entity {entity_id}: 'words' must be a list",
                              source_id=source_id, entity_id=entity_id)
        for word_index, raw_word in enumerate(raw_words):
            if not isinstance(raw_word, dict) or not isinstance(raw_word.get("text"), str):
                raise SchemaError(
                    f"{source_id}: entity {entity_id}: word #{word_index} needs "
                    "string 'text' and a 'box'",
                    source_id=source_id, entity_id=entity_id)
            word_box = _parse_box(raw_word.get("box"), f"word #{word_index} box",
                                  source_id, entity_id)
            words.append(Word(text=raw_word["text"], box=word_box))

        links = []
        raw_links = raw_entity.get("linking", [])
        if not isinstance(raw_links, list):
            raise SchemaError(f"{source_id}: entity {entity_id}: 'linking' must be a list",
                              source_id=source_id, entity_id=entity_id)
        for pair in raw_links:
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise SchemaError(
                    f"{source_id}: entity {entity_id}: link {pair!r} is not an id pair",
                    source_id=source_id, entity_id=entity_id)
            links.append((_require_int(pair[0], "link id", source_id, entity_id),
                          _require_int(pair[1], "link id", source_id, entity_id)))

        try:
            entities.append(Entity(id=entity_id, label=label, box=box,
                                   words=tuple(words), links=tuple(links)))
        except ValueError as exc:
            raise SchemaError(f"{source_id}: {exc}", source_id=source_id,
                              entity_id=entity_id) from exc

    width, height = page_dims
    try:
        return Form(source_id=source_id, width=int(width), height=int(height),
                    entities=tuple(entities), split=split)
    except ValueError as exc:
        raise SchemaError(f"{source_id}: {exc}", source_id=source_id) from exc


def form_to_dict(form: Form) -> dict:
    """FUNSD-schema dict for ``form`` (the inverse of :func:`parse_form`)."""
    return {
        "form": [
            {
                "id": entity.id,
                "label": entity.label,
                "box": entity.box.as_list(),
                "text": " ".join(word.text for word in entity.words),
                "words": [{"text": word.text, "box": word.box.as_list()}
                          for word in entity.words],
                "linking": [[a, b] for a, b in entity.links],
            }
            for entity in form.entities
        ]
    }


def serialize_form(form: Form) -> bytes:
    """Serialize to annotation-file bytes.

    Round-trip law: ``parse_form(serialize_form(f), f.source_id,
    (f.width, f.height), f.split) == f``. Key order and whitespace are
    not significant; the derived per-entity ``"text"`` field is emitted
    for compatibility and ignored on parse.
    """
    return (json.dumps(form_to_dict(form), ensure_ascii=False, indent=1) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# dataset statistics
# ---------------------------------------------------------------------------

@dataclass
class SplitStats:
    """Counts for one split: forms, words, entities, relations, per-label."""

    forms: int = 0
    words: int = 0
    entities: int = 0
    relations: int = 0
    by_label: dict[str, int] = field(
        default_factory=lambda: {label: 0 for label in ENTITY_LABELS})


@dataclass
class DatasetStats:
    train: SplitStats = field(default_factory=SplitStats)
    test: SplitStats = field(default_factory=SplitStats)

    def split(self, name: str) -> SplitStats:
        if name not in SPLITS:
            raise KeyError(name)
        return self.train if name == "train" else self.test

    def to_dict(self) -> dict:
        return {
            name: {
                "forms": stats.forms,
                "words": stats.words,
                "entities": stats.entities,
                "relations": stats.relations,
                "by_label": dict(stats.by_label),
            }
            for name, stats in (("train", self.train), ("test", self.test))
        }

    def table(self) -> str:
        lines = [f"{'Subset':<10}{'Forms':>8}{'Words':>10}{'Entities':>10}{'Relations':>11}"]
        for name, stats in (("train", self.train), ("test", self.test)):
            lines.append(f"{name:<10}{stats.forms:>8,}{stats.words:>10,}"
                         f"{stats.entities:>10,}{stats.relations:>11,}")
        lines.append("")
        header = f"{'Subset':<10}" + "".join(f"{label:>10}" for label in ENTITY_LABELS)
        lines.append(header + f"{'total':>10}")
        for name, stats in (("train", self.train), ("test", self.test)):
            row = f"{name:<10}" + "".join(
                f"{stats.by_label[label]:>10,}" for label in ENTITY_LABELS)
            lines.append(row + f"{stats.entities:>10,}")
        return "\n".join(lines)


def count_relations(form: Form) -> int:
    """Distinct unordered entity pairs connected by at least one link record.

    A pair recorded in both endpoints (or in both orientations) counts once.
    """
    return len({frozenset((a, b)) for a, b, _ in form.iter_link_records()})


def compute_stats(forms: Iterable[Form]) -> DatasetStats:
    """Aggregate counts per split. Permutation-invariant over ``forms``."""
    stats = DatasetStats()
    for form in forms:
        split = stats.split(form.split)
        split.forms += 1
        split.entities += len(form.entities)
        split.relations += count_relations(form)
        for entity in form.entities:
            split.words += len(entity.words)
            split.by_label[entity.label] += 1
    return stats
