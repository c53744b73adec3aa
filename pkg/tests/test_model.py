import json
import random

import pytest

from formkv.model import (
    BBox,
    Entity,
    Form,
    ParseError,
    SchemaError,
    Word,
    compute_stats,
    count_relations,
    form_to_dict,
    parse_form,
    serialize_form,
)
from builders import chain_form, make_entity, make_form, random_dag_form


# ---------------------------------------------------------------------------
# BBox
# ---------------------------------------------------------------------------

def test_bbox_geometry():
    box = BBox(2, 3, 10, 7)
    assert (box.width, box.height, box.area) == (8, 4, 32)
    assert box.as_list() == [2, 3, 10, 7]
    assert BBox.from_list([2, 3, 10, 7]) == box


def test_bbox_degenerate_allowed():
    assert BBox(5, 5, 5, 5).area == 0


@pytest.mark.parametrize("bad", [
    (-1, 0, 2, 2),   # negative
    (4, 0, 2, 2),    # left > right
    (0, 9, 2, 2),    # top > bottom
])
def test_bbox_rejects(bad):
    with pytest.raises(ValueError):
        BBox(*bad)


def test_bbox_rejects_non_integers():
    with pytest.raises((TypeError, ValueError)):
        BBox(0.5, 0, 2, 2)
    with pytest.raises((TypeError, ValueError)):
        BBox(True, 0, 2, 2)


def test_bbox_dilated_clips_at_zero():
    assert BBox(1, 2, 5, 6).dilated(3) == BBox(0, 0, 8, 9)


def test_bbox_contains_is_inclusive():
    outer = BBox(0, 0, 10, 10)
    assert outer.contains(BBox(0, 0, 10, 10))
    assert outer.contains(BBox(3, 3, 4, 4))
    assert not outer.contains(BBox(3, 3, 11, 4))


# ---------------------------------------------------------------------------
# Entity / Form
# ---------------------------------------------------------------------------

def test_entity_rejects_unknown_label():
    with pytest.raises(ValueError):
        make_entity(0, "title", (0, 0, 4, 4))


def test_form_rejects_duplicate_ids():
    a = make_entity(1, "other", (0, 0, 4, 4))
    b = make_entity(1, "other", (5, 0, 9, 4))
    with pytest.raises(ValueError):
        make_form([a, b])


def test_form_rejects_bad_dims_and_split():
    with pytest.raises(ValueError):
        make_form([], width=0)
    with pytest.raises(ValueError):
        Form(source_id="x", width=10, height=10, entities=(), split="validation")


def test_form_entity_lookup():
    form = chain_form()
    assert form.entity(1).label == "question"
    with pytest.raises(KeyError):
        form.entity(42)


def test_iter_link_records_reports_holder():
    form = chain_form(("question", "answer"), record_in="both")
    records = sorted(form.iter_link_records())
    assert records == [(0, 1, 0), (0, 1, 1)]


# ---------------------------------------------------------------------------
# parsing and serialization
# ---------------------------------------------------------------------------

FUNSD_SNIPPET = {
    "form": [
        {
            "id": 0,
            "label": "question",
            "box": [10, 10, 60, 30],
            "text": "Name:",
            "words": [{"text": "Name:", "box": [12, 12, 58, 28]}],
            "linking": [[0, 1]],
        },
        {
            "id": 1,
            "label": "answer",
            "box": [70, 10, 120, 30],
            "words": [{"text": "Alice", "box": [72, 12, 110, 28]}],
            "linking": [[0, 1]],
        },
    ]
}


def test_parse_funsd_shape():
    form = parse_form(json.dumps(FUNSD_SNIPPET), "doc0", (200, 100))
    assert form.width == 200 and form.height == 100
    assert [e.label for e in form.entities] == ["question", "answer"]
    assert form.entities[0].words[0].text == "Name:"
    assert form.entities[0].links == ((0, 1),)


def test_parse_ignores_unknown_keys():
    doc = json.loads(json.dumps(FUNSD_SNIPPET))
    doc["form"][0]["custom"] = {"anything": 1}
    form = parse_form(json.dumps(doc), "doc0", (200, 100))
    assert form.entities[0].id == 0


def test_parse_error_reports_byte_offset():
    raw = '{"note": "café", "form": [}]}'.encode("utf-8")
    with pytest.raises(ParseError) as err:
        parse_form(raw, "doc0", (10, 10))
    # the bad token sits one multibyte char after the ASCII prefix
    assert err.value.offset == raw.index(b"[}") + 1
    assert "byte" in str(err.value)


@pytest.mark.parametrize("mutate, fragment", [
    (lambda d: d.pop("form"), "'form'"),
    (lambda d: d["form"][0].pop("id"), "no 'id'"),
    (lambda d: d["form"][0].__setitem__("label", "title"), "unknown label"),
    (lambda d: d["form"][0].__setitem__("box", [1, 2, 3]), "box"),
    (lambda d: d["form"][1].__setitem__("linking", [[0]]), "not an id pair"),
    (lambda d: d["form"][1].__setitem__("id", 0), "duplicate"),
])
def test_schema_errors(mutate, fragment):
    doc = json.loads(json.dumps(FUNSD_SNIPPET))
    mutate(doc)
    with pytest.raises(SchemaError) as err:
        parse_form(json.dumps(doc), "doc9", (200, 100))
    assert fragment in str(err.value)
    assert "doc9" in str(err.value)


def test_schema_error_names_entity():
    doc = json.loads(json.dumps(FUNSD_SNIPPET))
    doc["form"][1]["box"] = [9, 9, 1, 9]
    with pytest.raises(SchemaError) as err:
        parse_form(json.dumps(doc), "doc9", (200, 100))
    assert err.value.entity_id == 1


def test_round_trip_hand_form():
    form = parse_form(json.dumps(FUNSD_SNIPPET), "doc0", (200, 100))
    again = parse_form(serialize_form(form), "doc0", (200, 100))
    assert again == form


def test_round_trip_random_forms():
    rng = random.Random(5)
    for trial in range(25):
        form = random_dag_form(rng, source_id=f"r{trial}")
        again = parse_form(serialize_form(form), form.source_id,
                           (form.width, form.height), form.split)
        assert again == form


def test_serialized_shape():
    form = chain_form(("question", "answer"))
    raw = serialize_form(form)
    assert raw.endswith(b"\n")
    doc = json.loads(raw)
    assert set(doc) == {"form"}
    entity = doc["form"][0]
    assert entity["text"] == "w0"
    assert entity["linking"] == [[0, 1]]


def test_form_to_dict_joins_word_texts():
    entity = make_entity(0, "other", (0, 0, 40, 10),
                         words=((0, 0, 10, 10), (12, 0, 22, 10)))
    doc = form_to_dict(make_form([entity]))
    assert doc["form"][0]["text"] == "w0 w1"


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

def test_count_relations_deduplicates():
    # recorded in both endpoints: one relation
    assert count_relations(chain_form(("question", "answer"))) == 1
    # recorded in both orientations: still one relation
    a = make_entity(0, "question", (0, 0, 4, 4), links=[(0, 1)])
    b = make_entity(1, "answer", (6, 0, 9, 4), links=[(1, 0)])
    assert count_relations(make_form([a, b])) == 1


def test_count_relations_distinct_pairs():
    hub = make_entity(0, "question", (0, 0, 4, 4), links=[(0, 1), (0, 2)])
    s1 = make_entity(1, "answer", (6, 0, 9, 4), links=[(0, 1)])
    s2 = make_entity(2, "answer", (6, 6, 9, 9), links=[(0, 2)])
    assert count_relations(make_form([hub, s1, s2])) == 2


def test_compute_stats_counts():
    train_a = chain_form(("header", "question", "answer"))
    train_b = make_form(
        [make_entity(0, "other", (0, 0, 9, 9), words=((1, 1, 5, 5),))],
        source_id="f1")
    test_a = make_form(
        [make_entity(0, "question", (0, 0, 9, 9), links=[(0, 1)]),
         make_entity(1, "answer", (10, 0, 19, 9), links=[(0, 1)])],
        source_id="t0", split="test")
    stats = compute_stats([train_a, train_b, test_a])
    assert stats.train.forms == 2
    assert stats.train.entities == 4
    assert stats.train.words == 4
    assert stats.train.relations == 2
    assert stats.train.by_label == {"header": 1, "question": 1,
                                    "answer": 1, "other": 1}
    assert stats.test.forms == 1
    assert stats.test.relations == 1
    assert stats.test.by_label["question"] == 1


def test_stats_table_formats_thousands():
    form = make_form(
        [make_entity(i, "other", (0, 10 * i, 5, 10 * i + 5),
                     words=tuple((j * 2, 10 * i, j * 2 + 1, 10 * i + 5)
                                 for j in range(2)))
         for i in range(4)],
        height=1000)
    stats = compute_stats([form] * 300)  # 1,200 entities, 2,400 words
    table = stats.table()
    assert "1,200" in table and "2,400" in table
    assert "Relations" in table and "question" in table


def test_stats_permutation_invariant():
    rng = random.Random(9)
    forms = [random_dag_form(rng, source_id=f"p{i}") for i in range(6)]
    shuffled = list(forms)
    rng.shuffle(shuffled)
    assert compute_stats(forms) == compute_stats(shuffled)
