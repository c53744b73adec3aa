"""Machine-checkable consistency rules for form annotations.

Each rule captures one recurring annotation defect: broken or one-sided
link records, self links, boxes outside the page, words escaping their
entity box, relation cycles, headers used as chain markers, answers that
keep chaining onward, isolated key/value entities, and word-less
entities. Linting never fails; it reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .model import BBox, Form
from .revise import build_graph


@dataclass(frozen=True)
class LintRule:
    code: str
    severity: str  # "error" | "warning"
    description: str


RULES: tuple[LintRule, ...] = (
    LintRule("L1", "error", "link references an id absent from the form"),
    LintRule("L2", "warning", "link recorded in one endpoint's list but not the other's"),
    LintRule("L3", "error", "entity links to itself"),
    LintRule("L4", "warning", "entity or word box exceeds the page"),
    LintRule("L5", "warning", "word box not inside its entity box (after tolerance)"),
    LintRule("L6", "error", "relation graph contains a cycle"),
    LintRule("L7", "warning", "header entity has an incoming link (chain marker)"),
    LintRule("L8", "warning", "answer entity links onward to an answer/question"),
    LintRule("L9", "warning", "question/answer entity with no links at all"),
    LintRule("L10", "warning", "entity with zero words"),
)
RULES_BY_CODE = {rule.code: rule for rule in RULES}


@dataclass(frozen=True)
class LintFinding:
    rule: str
    severity: str
    source_id: str
    entity_ids: tuple[int, ...]
    message: str
    box: BBox | None = None

    def to_record(self) -> dict:
        record = {
            "source_id": self.source_id,
            "rule": self.rule,
            "severity": self.severity,
            "entity_ids": list(self.entity_ids),
            "message": self.message,
        }
        if self.box is not None:
            record["box"] = self.box.as_list()
        return record


@dataclass
class LintReport:
    findings: list[LintFinding] = field(default_factory=list)

    @property
    def counts(self) -> dict[str, int]:
        counts = {rule.code: 0 for rule in RULES}
        for finding in self.findings:
            counts[finding.rule] += 1
        return counts

    @property
    def error_count(self) -> int:
        return sum(1 for finding in self.findings if finding.severity == "error")

    @property
    def warning_count(self) -> int:
        return sum(1 for finding in self.findings if finding.severity == "warning")

    def to_records(self) -> list[dict]:
        return [finding.to_record() for finding in self.findings]

    def to_text(self) -> str:
        if not self.findings:
            return "no findings"
        lines = [f"{'source':<16}{'rule':<6}{'severity':<10}{'entities':<14}message"]
        for finding in self.findings:
            ids = ",".join(map(str, finding.entity_ids))
            lines.append(f"{finding.source_id:<16}{finding.rule:<6}"
                         f"{finding.severity:<10}{ids:<14}{finding.message}")
        lines.append("")
        summary = "  ".join(f"{code}={count}" for code, count in self.counts.items() if count)
        lines.append(f"{len(self.findings)} finding(s): {summary}")
        return "\n".join(lines)


def _rule_order(code: str) -> int:
    return int(code[1:])


def lint_form(form: Form, *, box_tolerance: int = 3) -> LintReport:
    """Apply every rule to one form.

    Deterministic and pure; findings are ordered by (rule, entity ids).
    ``box_tolerance`` dilates the entity box before the word-containment
    check to absorb annotation jitter.
    """
    findings: list[LintFinding] = []
    ids = form.entity_ids
    add = findings.append

    # L1 / L2 / L3: link record hygiene
    links_by_id = {entity.id: set(entity.links) for entity in form.entities}
    for entity in form.entities:
        for pair in entity.links:
            a, b = pair
            missing = [x for x in (a, b) if x not in ids]
            if missing:
                add(LintFinding("L1", "error", form.source_id, (entity.id,),
                                f"link ({a}, {b}) references missing id "
                                f"{', '.join(map(str, dict.fromkeys(missing)))}"))
                continue
            if a == b:
                add(LintFinding("L3", "error", form.source_id, (a,),
                                f"entity {a} links to itself"))
                continue
            other = b if entity.id == a else a if entity.id == b else None
            if other is not None and pair not in links_by_id[other]:
                add(LintFinding("L2", "warning", form.source_id, (entity.id, other),
                                f"link ({a}, {b}) recorded in entity {entity.id}'s "
                                f"list but not in entity {other}'s"))

    # L4 / L5 / L10: geometry and content
    for entity in form.entities:
        if entity.box.right > form.width or entity.box.bottom > form.height:
            add(LintFinding("L4", "warning", form.source_id, (entity.id,),
                            f"entity box {entity.box.as_list()} exceeds page "
                            f"{form.width}x{form.height}", box=entity.box))
        dilated = entity.box.dilated(box_tolerance)
        for index, word in enumerate(entity.words):
            if word.box.right > form.width or word.box.bottom > form.height:
                add(LintFinding("L4", "warning", form.source_id, (entity.id,),
                                f"word #{index} box {word.box.as_list()} exceeds page "
                                f"{form.width}x{form.height}", box=word.box))
            if not dilated.contains(word.box):
                add(LintFinding("L5", "warning", form.source_id, (entity.id,),
                                f"word #{index} {word.text!r} box {word.box.as_list()} "
                                f"outside entity box {entity.box.as_list()} "
                                f"(+{box_tolerance}px)", box=word.box))
        if not entity.words:
            add(LintFinding("L10", "warning", form.source_id, (entity.id,),
                            f"entity {entity.id} ({entity.label}) has no words"))

    # L6 / L7 / L8 / L9: relation structure
    graph = build_graph(form, skip_dangling=True)
    labels = {entity.id: entity.label for entity in form.entities}
    for cycle in (cycle for cycle in graph.cycles() if len(cycle) >= 2):
        add(LintFinding("L6", "error", form.source_id, cycle,
                        "relation cycle through entities "
                        "{" + ", ".join(map(str, cycle)) + "}"))
    incoming = {node: graph.in_degree(node) for node in graph.nodes}
    for entity in form.entities:
        if entity.label == "header" and incoming.get(entity.id, 0) > 0:
            add(LintFinding("L7", "warning", form.source_id, (entity.id,),
                            f"header entity {entity.id} has an incoming link "
                            "(header used as a chain marker)"))
        if entity.label == "answer":
            chained = sorted(target for target in graph.successors(entity.id)
                             if labels[target] in ("answer", "question"))
            if chained:
                add(LintFinding("L8", "warning", form.source_id, (entity.id,),
                                f"answer entity {entity.id} links onward to "
                                f"{', '.join(str(t) for t in chained)}"))
    linked_ids = {x for a, b, _ in form.iter_link_records() for x in (a, b)}
    for entity in form.entities:
        if entity.label in ("question", "answer") and entity.id not in linked_ids:
            add(LintFinding("L9", "warning", form.source_id, (entity.id,),
                            f"{entity.label} entity {entity.id} has no links"))

    findings.sort(key=lambda f: (_rule_order(f.rule), f.entity_ids))
    return LintReport(findings=findings)


def lint_dataset(forms: Iterable[Form], *, box_tolerance: int = 3) -> LintReport:
    """Concatenate per-form reports, ordered by source id."""
    report = LintReport()
    for form in sorted(forms, key=lambda f: f.source_id):
        report.findings.extend(lint_form(form, box_tolerance=box_tolerance).findings)
    return report
