"""Relation-graph construction and label normalization.

The cleanup rule collapses linked chains into plain key/value structure:
an entity with outgoing links becomes ``question``, a chain-terminal
entity (incoming links only) becomes ``answer``, and an entity with no
links at all becomes ``other``. Headers follow the same degree rule, so
chain-marker "headers" turn into questions and decorative ones into
other; the original labels stay visible in the revision diff.

Cycles are never broken automatically. They must be resolved first with a
reviewer-supplied :class:`Patch` (label overrides plus edge additions and
removals), applied before normalization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .model import ENTITY_LABELS, Entity, Form

Edge = tuple[int, int]


class RevisionError(Exception):
    """Base class for revision failures."""


class DanglingLinkError(RevisionError):
    def __init__(self, source_id: str, entity_id: int):
        super().__init__(f"{source_id}: link references unknown entity id {entity_id}")
        self.source_id = source_id
        self.entity_id = entity_id


class CycleError(RevisionError):
    """The relation graph contains cycles; a patch must break them."""

    def __init__(self, source_id: str, cycles: Sequence[Sequence[int]]):
        described = "; ".join("{" + ", ".join(map(str, cycle)) + "}" for cycle in cycles)
        super().__init__(f"{source_id}: relation cycles: {described}")
        self.source_id = source_id
        self.cycles = tuple(tuple(cycle) for cycle in cycles)


class PatchError(RevisionError):
    pass


@dataclass(frozen=True)
class RelationGraph:
    """Directed relation graph over entity ids with degree queries."""

    nodes: tuple[int, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        node_set = set(self.nodes)
        for a, b in self.edges:
            if a not in node_set or b not in node_set:
                raise ValueError(f"edge ({a}, {b}) references unknown node")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("duplicate edges")

    def out_degree(self, node: int) -> int:
        return sum(1 for a, _ in self.edges if a == node)

    def in_degree(self, node: int) -> int:
        return sum(1 for _, b in self.edges if b == node)

    def successors(self, node: int) -> tuple[int, ...]:
        return tuple(b for a, b in self.edges if a == node)

    def predecessors(self, node: int) -> tuple[int, ...]:
        return tuple(a for a, b in self.edges if b == node)

    def cycles(self, include_self_loops: bool = True) -> list[tuple[int, ...]]:
        """Cycles as sorted id tuples: SCCs of size >= 2, plus self loops."""
        found = [tuple(sorted(scc)) for scc in _strongly_connected(self.nodes, self.edges)
                 if len(scc) >= 2]
        if include_self_loops:
            in_larger = {node for scc in found for node in scc}
            for a, b in self.edges:
                if a == b and a not in in_larger:
                    found.append((a,))
        return sorted(found)


def _strongly_connected(nodes: Sequence[int], edges: Sequence[Edge]) -> list[list[int]]:
    """Iterative Tarjan over sorted nodes/successors for determinism."""
    succ: dict[int, list[int]] = {node: [] for node in nodes}
    for a, b in edges:
        succ[a].append(b)
    for targets in succ.values():
        targets.sort()

    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    components: list[list[int]] = []
    counter = 0

    for start in sorted(nodes):
        if start in index:
            continue
        work = [(start, iter(succ[start]))]
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack.add(start)
        while work:
            node, successors = work[-1]
            advanced = False
            for target in successors:
                if target not in index:
                    index[target] = low[target] = counter
                    counter += 1
                    stack.append(target)
                    on_stack.add(target)
                    work.append((target, iter(succ[target])))
                    advanced = True
                    break
                if target in on_stack:
                    low[node] = min(low[node], index[target])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                components.append(component)
    return components


def build_graph(form: Form, *, skip_dangling: bool = False) -> RelationGraph:
    """Directed edge set from the stored link records.

    Stored order is the direction signal: a record ``(a, b)`` means the
    edge ``a -> b`` no matter which entity's list holds it. Identical
    ordered pairs are deduplicated. When both orientations of a pair
    exist, the orientation whose record was stored by its own source
    entity wins; if both (or neither) qualify, both edges are kept and
    surface as a cycle.
    """
    ids = form.entity_ids
    stored_by_source: set[Edge] = set()
    edges: dict[Edge, None] = {}
    for a, b, holder in form.iter_link_records():
        if a not in ids or b not in ids:
            if skip_dangling:
                continue
            raise DanglingLinkError(form.source_id, a if a not in ids else b)
        edges.setdefault((a, b))
        if holder == a:
            stored_by_source.add((a, b))

    drop: set[Edge] = set()
    for a, b in edges:
        if a >= b or (b, a) not in edges:
            continue
        forward_ok = (a, b) in stored_by_source
        backward_ok = (b, a) in stored_by_source
        if forward_ok and not backward_ok:
            drop.add((b, a))
        elif backward_ok and not forward_ok:
            drop.add((a, b))
    kept = tuple(edge for edge in edges if edge not in drop)
    return RelationGraph(nodes=tuple(sorted(ids)), edges=kept)


# ---------------------------------------------------------------------------
# label normalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RevisionDiff:
    """Exact delta between a form and its revised version.

    ``label_changes`` holds ``(entity_id, old_label, new_label)``.
    ``duplicate_links_removed`` lists one entry per dropped duplicate
    link record, ``(holder_entity_id, (from_id, to_id))``. Applying the
    diff to the input form reproduces the output form exactly.
    """

    source_id: str
    label_changes: tuple[tuple[int, str, str], ...] = ()
    edges_added: tuple[Edge, ...] = ()
    edges_removed: tuple[Edge, ...] = ()
    duplicate_links_removed: tuple[tuple[int, Edge], ...] = ()

    @property
    def is_empty(self) -> bool:
        return not (self.label_changes or self.edges_added or self.edges_removed
                    or self.duplicate_links_removed)

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "label_changes": [
                {"id": entity_id, "old": old, "new": new}
                for entity_id, old, new in self.label_changes
            ],
            "edges_added": [list(edge) for edge in self.edges_added],
            "edges_removed": [list(edge) for edge in self.edges_removed],
            "duplicate_links_removed": [
                {"holder": holder, "link": list(edge)}
                for holder, edge in self.duplicate_links_removed
            ],
        }


def _dedup_entity_links(entity: Entity) -> tuple[Entity, list[tuple[int, Edge]]]:
    seen: set[Edge] = set()
    kept = []
    dropped = []
    for pair in entity.links:
        if pair in seen:
            dropped.append((entity.id, pair))
        else:
            seen.add(pair)
            kept.append(pair)
    if not dropped:
        return entity, []
    return replace(entity, links=tuple(kept)), dropped


def _degree_label(in_degree: int, out_degree: int) -> str:
    if out_degree > 0:
        return "question"
    if in_degree > 0:
        return "answer"
    return "other"


def normalize_labels(form: Form) -> tuple[Form, RevisionDiff]:
    """Relabel every entity from its link degrees.

    Outgoing links make a question, incoming-only makes an answer, no
    links at all makes other; original labels (headers included) do not
    influence the result. Geometry, words, and the edge set are
    untouched; the only structural change is dropping exact duplicate
    link records within an entity's list. Idempotent.

    Raises :class:`CycleError` when the relation graph has cycles and
    :class:`DanglingLinkError` for links to unknown ids.
    """
    graph = build_graph(form)
    cycles = graph.cycles()
    if cycles:
        raise CycleError(form.source_id, cycles)

    in_degree = {node: 0 for node in graph.nodes}
    out_degree = {node: 0 for node in graph.nodes}
    for a, b in graph.edges:
        out_degree[a] += 1
        in_degree[b] += 1

    new_entities = []
    label_changes = []
    duplicates: list[tuple[int, Edge]] = []
    for entity in form.entities:
        deduped, dropped = _dedup_entity_links(entity)
        duplicates.extend(dropped)
        new_label = _degree_label(in_degree[entity.id], out_degree[entity.id])
        if new_label != entity.label:
            label_changes.append((entity.id, entity.label, new_label))
            deduped = replace(deduped, label=new_label)
        new_entities.append(deduped)

    revised = replace(form, entities=tuple(new_entities))
    diff = RevisionDiff(source_id=form.source_id,
                        label_changes=tuple(label_changes),
                        duplicate_links_removed=tuple(duplicates))
    return revised, diff


# ---------------------------------------------------------------------------
# patches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Patch:
    """Reviewer-supplied corrections applied before normalization.

    Edge edits run first, then label overrides. ``add_edges`` follows the
    annotation convention of recording the ordered pair in both
    endpoints' lists; ``remove_edges`` strips every record of the ordered
    pair wherever it is stored.
    """

    source_id: str = ""
    labels: tuple[tuple[int, str], ...] = ()
    add_edges: tuple[Edge, ...] = ()
    remove_edges: tuple[Edge, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not (self.labels or self.add_edges or self.remove_edges)

    @classmethod
    def from_dict(cls, raw: dict, source_id: str = "") -> "Patch":
        labels = tuple((int(item["id"]), str(item["label"]))
                       for item in raw.get("labels", []))
        for _, label in labels:
            if label not in ENTITY_LABELS:
                raise PatchError(f"{source_id}: patch label {label!r} unknown")
        return cls(
            source_id=source_id,
            labels=labels,
            add_edges=tuple((int(a), int(b)) for a, b in raw.get("add_edges", [])),
            remove_edges=tuple((int(a), int(b)) for a, b in raw.get("remove_edges", [])),
        )

    @classmethod
    def load(cls, path: Path | str) -> "Patch":
        path = Path(path)
        source_id = path.name.removesuffix(".patch.json").removesuffix(".json")
        return cls.from_dict(json.loads(path.read_text("utf-8")), source_id=source_id)


def load_patches(patches_dir: Path | str | None) -> dict[str, Patch]:
    """All ``<source_id>.patch.json`` files in a directory, keyed by id."""
    if patches_dir is None:
        return {}
    patches = {}
    for path in sorted(Path(patches_dir).glob("*.patch.json")):
        patch = Patch.load(path)
        patches[patch.source_id] = patch
    return patches


def _apply_patch(form: Form, patch: Patch) -> tuple[Form, tuple[Edge, ...], tuple[Edge, ...]]:
    ids = form.entity_ids
    for entity_id, _ in patch.labels:
        if entity_id not in ids:
            raise PatchError(f"{form.source_id}: patch targets unknown entity id {entity_id}")
    for a, b in patch.add_edges + patch.remove_edges:
        for endpoint in (a, b):
            if endpoint not in ids:
                raise PatchError(
                    f"{form.source_id}: patch edge references unknown entity id {endpoint}")

    remove = set(patch.remove_edges)
    removed: set[Edge] = set()
    entities = []
    for entity in form.entities:
        links = []
        for pair in entity.links:
            if pair in remove:
                removed.add(pair)
            else:
                links.append(pair)
        entities.append(replace(entity, links=tuple(links)))

    added = []
    by_id = {entity.id: index for index, entity in enumerate(entities)}
    for edge in patch.add_edges:
        a, b = edge
        wrote = False
        for endpoint in dict.fromkeys((a, b)):
            entity = entities[by_id[endpoint]]
            if edge not in entity.links:
                entities[by_id[endpoint]] = replace(entity, links=entity.links + (edge,))
                wrote = True
        if wrote:
            added.append(edge)

    overrides = dict(patch.labels)
    entities = [replace(entity, label=overrides[entity.id])
                if entity.id in overrides and entity.label != overrides[entity.id]
                else entity
                for entity in entities]
    ordered_removed = tuple(edge for edge in patch.remove_edges if edge in removed)
    return replace(form, entities=tuple(entities)), ordered_removed, tuple(added)


def apply_patch(form: Form, patch: Patch) -> Form:
    """Apply edge edits then label overrides; unknown ids raise PatchError."""
    patched, _, _ = _apply_patch(form, patch)
    return patched


def apply_diff(form: Form, diff: RevisionDiff) -> Form:
    """Mechanically replay a :class:`RevisionDiff` (the diff-law inverse)."""
    remove = set(diff.edges_removed)
    entities = []
    for entity in form.entities:
        links = tuple(pair for pair in entity.links if pair not in remove)
        entities.append(replace(entity, links=links))
    by_id = {entity.id: index for index, entity in enumerate(entities)}
    for edge in diff.edges_added:
        for endpoint in dict.fromkeys(edge):
            entity = entities[by_id[endpoint]]
            if edge not in entity.links:
                entities[by_id[endpoint]] = replace(entity, links=entity.links + (edge,))
    for holder, pair in diff.duplicate_links_removed:
        entity = entities[by_id[holder]]
        links = list(entity.links)
        for index in range(len(links) - 1, -1, -1):
            if links[index] == pair:
                del links[index]
                break
        entities[by_id[holder]] = replace(entity, links=tuple(links))
    labels = {entity_id: new for entity_id, _, new in diff.label_changes}
    entities = [replace(entity, label=labels[entity.id]) if entity.id in labels else entity
                for entity in entities]
    return replace(form, entities=tuple(entities))


# ---------------------------------------------------------------------------
# dataset-level pipeline
# ---------------------------------------------------------------------------

@dataclass
class ReviseOutcome:
    """Results of revising a set of forms: outputs, diffs, failures."""

    forms: list[Form] = field(default_factory=list)
    diffs: list[RevisionDiff] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def labels_changed(self) -> int:
        return sum(len(diff.label_changes) for diff in self.diffs)


def revise_form(form: Form, patch: Patch | None = None) -> tuple[Form, RevisionDiff]:
    """Patch (optional) then normalize; diff is relative to the input form."""
    if patch is None or patch.is_empty:
        patched, edges_removed, edges_added = form, (), ()
    else:
        patched, edges_removed, edges_added = _apply_patch(form, patch)
    revised, norm_diff = normalize_labels(patched)
    label_changes = tuple(
        (entity.id, form.entity(entity.id).label, entity.label)
        for entity in revised.entities
        if entity.label != form.entity(entity.id).label)
    diff = RevisionDiff(source_id=form.source_id,
                        label_changes=label_changes,
                        edges_added=edges_added,
                        edges_removed=edges_removed,
                        duplicate_links_removed=norm_diff.duplicate_links_removed)
    return revised, diff


def revise_dataset(forms: Iterable[Form],
                   patches: Mapping[str, Patch] | None = None) -> ReviseOutcome:
    """Run the per-form pipeline over a dataset, ordered by source id.

    Per-form failures (unresolved cycles, bad patches) are collected and
    do not abort the remaining forms.
    """
    patches = patches or {}
    outcome = ReviseOutcome()
    for form in sorted(forms, key=lambda f: f.source_id):
        try:
            revised, diff = revise_form(form, patches.get(form.source_id))
        except RevisionError as exc:
            outcome.failures.append((form.source_id, str(exc)))
            continue
        outcome.forms.append(revised)
        outcome.diffs.append(diff)
    return outcome
