import random

from formkv.lint import RULES, lint_dataset, lint_form
from builders import chain_form, make_entity, make_form, random_dag_form


def codes(report):
    return [finding.rule for finding in report.findings]


def find(report, rule):
    return [f for f in report.findings if f.rule == rule]


def test_rule_table_is_complete():
    assert [rule.code for rule in RULES] == [f"L{i}" for i in range(1, 11)]
    severities = {rule.code: rule.severity for rule in RULES}
    assert {code for code, sev in severities.items() if sev == "error"} \
        == {"L1", "L3", "L6"}


def test_clean_form_has_no_findings():
    report = lint_form(chain_form(("question", "answer")))
    assert report.findings == []
    assert report.to_text() == "no findings"


def test_l1_dangling_link():
    entity = make_entity(0, "question", (0, 0, 20, 10),
                         words=((1, 1, 18, 9),), links=[(0, 7)])
    report = lint_form(make_form([entity]))
    (finding,) = find(report, "L1")
    assert finding.severity == "error"
    assert "7" in finding.message
    # a dangling link is not also reported as asymmetric
    assert not find(report, "L2")


def test_l2_asymmetric_link():
    report = lint_form(chain_form(("question", "answer"), record_in="source"))
    (finding,) = find(report, "L2")
    assert finding.entity_ids == (0, 1)
    assert finding.severity == "warning"
    # recording in both endpoints silences it
    assert not find(lint_form(chain_form(("question", "answer"))), "L2")


def test_l3_self_link():
    entity = make_entity(2, "question", (0, 0, 20, 10),
                         words=((1, 1, 18, 9),), links=[(2, 2)])
    report = lint_form(make_form([entity]))
    (finding,) = find(report, "L3")
    assert finding.entity_ids == (2,)
    # the self link is L3's finding alone, not L2's or L6's
    assert not find(report, "L2") and not find(report, "L6")


def test_l4_box_out_of_page():
    inside = make_entity(0, "other", (0, 0, 50, 50), words=((1, 1, 20, 20),))
    spill = make_entity(1, "other", (80, 80, 120, 90), words=((81, 81, 119, 89),))
    report = lint_form(make_form([inside, spill], width=100, height=100))
    findings = find(report, "L4")
    # entity box and word box each get a line
    assert [f.entity_ids for f in findings] == [(1,), (1,)]
    assert all(f.severity == "warning" for f in findings)


def test_l4_exact_fit_is_clean():
    snug = make_entity(0, "other", (0, 0, 100, 100), words=((0, 0, 100, 100),))
    assert not find(lint_form(make_form([snug], width=100, height=100)), "L4")


def test_l5_word_outside_entity_with_tolerance():
    jitter = make_entity(0, "other", (10, 10, 30, 30), words=((7, 10, 30, 30),))
    escaped = make_entity(1, "other", (50, 50, 70, 70), words=((46, 50, 70, 70),))
    report = lint_form(make_form([jitter, escaped]))
    (finding,) = find(report, "L5")
    assert finding.entity_ids == (1,)
    # a wider tolerance absorbs it, a zero tolerance flags both
    assert not find(lint_form(make_form([jitter, escaped]), box_tolerance=4), "L5")
    assert len(find(lint_form(make_form([jitter, escaped]), box_tolerance=0), "L5")) == 2


def test_l6_cycle_reported_once():
    entities = [
        make_entity(0, "question", (0, 0, 10, 10), words=((1, 1, 9, 9),), links=[(0, 1)]),
        make_entity(1, "question", (20, 0, 30, 10), words=((21, 1, 29, 9),), links=[(1, 2)]),
        make_entity(2, "question", (40, 0, 50, 10), words=((41, 1, 49, 9),), links=[(2, 0)]),
    ]
    report = lint_form(make_form(entities))
    (finding,) = find(report, "L6")
    assert finding.severity == "error"
    assert finding.entity_ids == (0, 1, 2)


def test_l6_two_cycle_from_opposed_records():
    # both entities insist on being the source: a real 2-cycle
    a = make_entity(0, "question", (0, 0, 10, 10), words=((1, 1, 9, 9),), links=[(0, 1)])
    b = make_entity(1, "question", (20, 0, 30, 10), words=((21, 1, 29, 9),), links=[(1, 0)])
    report = lint_form(make_form([a, b]))
    (finding,) = find(report, "L6")
    assert finding.entity_ids == (0, 1)


def test_l7_header_with_incoming():
    form = chain_form(("question", "header"))
    (finding,) = find(lint_form(form), "L7")
    assert finding.entity_ids == (1,)
    # header as chain start is not L7's business
    assert not find(lint_form(chain_form(("header", "answer"))), "L7")


def test_l8_answer_with_outgoing():
    chained = chain_form(("question", "answer", "answer"))
    (finding,) = find(lint_form(chained), "L8")
    assert finding.entity_ids == (1,)
    # answer pointing at an "other" entity is not a chain continuation
    harmless = chain_form(("question", "answer", "other"))
    assert not find(lint_form(harmless), "L8")


def test_l9_isolated_key_or_value():
    lonely_q = make_entity(0, "question", (0, 0, 10, 10), words=((1, 1, 9, 9),))
    lonely_o = make_entity(1, "other", (20, 0, 30, 10), words=((21, 1, 29, 9),))
    report = lint_form(make_form([lonely_q, lonely_o]))
    (finding,) = find(report, "L9")
    assert finding.entity_ids == (0,)
    # an entity holding any link record, even a one-sided one, is not isolated
    assert not find(lint_form(chain_form(("question", "answer"),
                                         record_in="source")), "L9")


def test_l10_empty_entity():
    empty = make_entity(0, "other", (0, 0, 10, 10))
    (finding,) = find(lint_form(make_form([empty])), "L10")
    assert finding.entity_ids == (0,)


def test_findings_sorted_by_rule_then_ids():
    entities = [
        make_entity(0, "answer", (0, 0, 10, 10), links=[(0, 9)]),
        make_entity(1, "question", (20, 0, 30, 10)),
    ]
    report = lint_form(make_form(entities))
    # entity 0 holds a link record, so only entity 1 counts as isolated
    assert codes(report) == ["L1", "L9", "L10", "L10"]
    assert [f.entity_ids for f in find(report, "L10")] == [(0,), (1,)]


def test_lint_dataset_orders_by_source_id():
    dirty = make_form([make_entity(0, "question", (0, 0, 10, 10),
                                   words=((1, 1, 9, 9),))], source_id="zzz")
    also_dirty = make_form([make_entity(0, "answer", (0, 0, 10, 10),
                                        words=((1, 1, 9, 9),))], source_id="aaa")
    report = lint_dataset([dirty, also_dirty])
    assert [f.source_id for f in report.findings] == ["aaa", "zzz"]
    assert report.error_count == 0 and report.warning_count == 2
    assert report.counts["L9"] == 2


def test_to_text_table_mentions_rule_and_count():
    report = lint_form(make_form([make_entity(0, "other", (0, 0, 10, 10))]))
    text = report.to_text()
    assert "L10" in text and "1 finding(s)" in text


def test_lint_is_deterministic_on_random_forms():
    rng = random.Random(13)
    for trial in range(20):
        form = random_dag_form(rng, source_id=f"d{trial}")
        first = lint_form(form)
        second = lint_form(form)
        assert first.findings == second.findings
