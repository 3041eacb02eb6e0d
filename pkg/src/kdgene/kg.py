"""Typed triple store: TSV ingestion, vocabulary indexing, reciprocal
augmentation, cross-validation folds, and filtered candidate pools."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

RECIPROCAL_SUFFIX = "_reciprocal"


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


class KGFormatError(ValueError):
    """Malformed input line (reported with source and line number)."""


@dataclass
class TripleStore:
    """Immutable indexed set of (head, relation, tail) identifier triples.

    Identifiers are dense and contiguous, assigned in first-appearance
    order. `triples` is duplicate-free and preserves input order.
    Treat instances as read-only after construction; derived stores
    (reciprocal augmentation, variant filtering) are new objects.
    """

    triples: np.ndarray                      # (n, 3) int64
    entity_names: list[str]
    relation_names: list[str]
    entity_ids: dict[str, int]
    relation_ids: dict[str, int]
    entity_types: dict[int, str] = field(default_factory=dict)
    triple_scores: dict[Triple, float] = field(default_factory=dict)
    by_head_relation: dict[tuple[int, int], frozenset[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.by_head_relation:
            index: dict[tuple[int, int], set[int]] = {}
            for h, r, t in self.triples:
                index.setdefault((int(h), int(r)), set()).add(int(t))
            self.by_head_relation = {k: frozenset(v) for k, v in index.items()}

    @property
    def n_entities(self) -> int:
        return len(self.entity_names)

    @property
    def n_relations(self) -> int:
        return len(self.relation_names)

    @property
    def n_triples(self) -> int:
        return len(self.triples)

    def tails(self, head: int, relation: int) -> frozenset[int]:
        return self.by_head_relation.get((head, relation), frozenset())

    def has_triple(self, head: int, relation: int, tail: int) -> bool:
        return tail in self.tails(head, relation)

    def iter_triples(self) -> Iterable[Triple]:
        for h, r, t in self.triples:
            yield Triple(int(h), int(r), int(t))

    def has_reciprocals(self) -> bool:
        return any(name.endswith(RECIPROCAL_SUFFIX) for name in self.relation_names)

    def entities_of_type(self, *type_tags: str) -> frozenset[int]:
        tags = set(type_tags)
        return frozenset(e for e, tag in self.entity_types.items() if tag in tags)

    def triples_of_relation(self, relation: int) -> np.ndarray:
        return self.triples[self.triples[:, 1] == relation]


def build_store(
    rows: Iterable[tuple[str, str, str, float | None]],
    entity_types_by_name: dict[str, str] | None = None,
) -> TripleStore:
    """Build a store from (head, relation, tail, optional score) name rows.

    Vocabulary order is first appearance; duplicate rows collapse to the
    first occurrence (including its score).
    """
    entity_ids: dict[str, int] = {}
    relation_ids: dict[str, int] = {}
    entity_names: list[str] = []
    relation_names: list[str] = []
    triples: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int, int]] = set()
    scores: dict[Triple, float] = {}

    for head, rel, tail, score in rows:
        for name in (head, tail):
            if name not in entity_ids:
                entity_ids[name] = len(entity_names)
                entity_names.append(name)
        if rel not in relation_ids:
            relation_ids[rel] = len(relation_names)
            relation_names.append(rel)
        triple = (entity_ids[head], relation_ids[rel], entity_ids[tail])
        if triple in seen:
            continue
        seen.add(triple)
        triples.append(triple)
        if score is not None:
            scores[Triple(*triple)] = score

    entity_types: dict[int, str] = {}
    if entity_types_by_name:
        for name, tag in entity_types_by_name.items():
            if name in entity_ids:
                entity_types[entity_ids[name]] = tag

    array = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    return TripleStore(
        triples=array,
        entity_names=entity_names,
        relation_names=relation_names,
        entity_ids=entity_ids,
        relation_ids=relation_ids,
        entity_types=entity_types,
        triple_scores=scores,
    )


def _parse_lines(
    lines: Iterable[str], source: str, columns: str
) -> Iterable[tuple[str, str, str, float | None]]:
    if sorted(columns) != ["h", "r", "t"]:
        raise ValueError(f"columns must be a permutation of 'hrt', got {columns!r}")
    order = {c: i for i, c in enumerate(columns)}
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n").rstrip("\r")
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) < 3:
            raise KGFormatError(
                f"{source}:{lineno}: expected >=3 tab-separated fields, got {len(fields)}"
            )
        head = fields[order["h"]]
        rel = fields[order["r"]]
        tail = fields[order["t"]]
        score: float | None = None
        if len(fields) > 3 and fields[3]:
            try:
                score = float(fields[3])
            except ValueError:
                score = None  # non-numeric annotation column, ignored
        yield head, rel, tail, score


def load_triples(
    *sources: str | Path | io.TextIOBase,
    columns: str = "hrt",
    entity_types_by_name: dict[str, str] | None = None,
) -> TripleStore:
    """Load tab-separated (head, relation, tail[, score]) triples.

    UTF-8, LF lines; '#' starts a comment line; blank lines are skipped.
    Several sources concatenate into one vocabulary. Empty input yields
    an empty store.
    """
    def rows() -> Iterable[tuple[str, str, str, float | None]]:
        for src in sources:
            if isinstance(src, (str, Path)):
                with open(src, encoding="utf-8") as fh:
                    yield from _parse_lines(fh, str(src), columns)
            else:
                yield from _parse_lines(src, "<stream>", columns)

    return build_store(rows(), entity_types_by_name)


def load_entity_types(path: str | Path) -> dict[str, str]:
    """Read a two-column (entity, type) TSV into a name -> type map."""
    types: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                raise KGFormatError(f"{path}:{lineno}: expected 2 tab-separated fields")
            types[fields[0]] = fields[1]
    return types


def save_triples(store: TripleStore, path: str | Path) -> None:
    """Write triples as name TSV; a reload reproduces vocabulary and order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for triple in store.iter_triples():
            h = store.entity_names[triple.head]
            r = store.relation_names[triple.relation]
            t = store.entity_names[triple.tail]
            score = store.triple_scores.get(triple)
            if score is None:
                fh.write(f"{h}\t{r}\t{t}\n")
            else:
                fh.write(f"{h}\t{r}\t{t}\t{score:g}\n")


def save_entity_types(store: TripleStore, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for eid in sorted(store.entity_types):
            fh.write(f"{store.entity_names[eid]}\t{store.entity_types[eid]}\n")


def add_reciprocals(store: TripleStore) -> TripleStore:
    """Return a store with an inverse relation and flipped triple per fact.

    Doubles the relation vocabulary and (for duplicate-free input) the
    triple count. Augmenting an already-augmented store is an error.
    """
    if store.has_reciprocals():
        raise ValueError("store already contains reciprocal relations")
    n_rel = store.n_relations
    relation_names = store.relation_names + [
        name + RECIPROCAL_SUFFIX for name in store.relation_names
    ]
    relation_ids = {name: i for i, name in enumerate(relation_names)}
    if store.n_triples:
        flipped = store.triples[:, [2, 1, 0]].copy()
        flipped[:, 1] += n_rel
        triples = np.concatenate([store.triples, flipped])
    else:
        triples = store.triples.copy()
    scores = dict(store.triple_scores)
    for triple, score in store.triple_scores.items():
        scores[Triple(triple.tail, triple.relation + n_rel, triple.head)] = score
    return TripleStore(
        triples=triples,
        entity_names=list(store.entity_names),
        relation_names=relation_names,
        entity_ids=dict(store.entity_ids),
        relation_ids=relation_ids,
        entity_types=dict(store.entity_types),
        triple_scores=scores,
    )


@dataclass
class FoldSplit:
    """Partition of one relation's triples into cross-validation folds."""

    fold_count: int
    assignments: dict[Triple, int]

    def triples_in_fold(self, fold: int) -> list[Triple]:
        return [t for t, f in self.assignments.items() if f == fold]

    def triples_outside_fold(self, fold: int) -> list[Triple]:
        return [t for t, f in self.assignments.items() if f != fold]


def make_folds(
    store: TripleStore, target_relation: int, fold_count: int, seed: int
) -> FoldSplit:
    """Split the target relation's triples round-robin after a seeded shuffle.

    Fold sizes differ by at most one. Non-target relations are untouched
    (they always stay in training data).
    """
    if fold_count < 2:
        raise ValueError(f"fold_count must be >= 2, got {fold_count}")
    if not 0 <= target_relation < store.n_relations:
        raise ValueError(f"unknown relation id {target_relation}")
    target = store.triples_of_relation(target_relation)
    if len(target) < fold_count:
        raise ValueError(
            f"cannot split {len(target)} target triples into {fold_count} folds"
        )
    perm = np.random.default_rng(seed).permutation(len(target))
    assignments = {
        Triple(*map(int, target[row])): position % fold_count
        for position, row in enumerate(perm)
    }
    return FoldSplit(fold_count=fold_count, assignments=assignments)


def save_folds(store: TripleStore, split: FoldSplit, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for triple, fold in split.assignments.items():
            h = store.entity_names[triple.head]
            r = store.relation_names[triple.relation]
            t = store.entity_names[triple.tail]
            fh.write(f"{h}\t{r}\t{t}\t{fold}\n")


def load_folds(path: str | Path, store: TripleStore) -> tuple[FoldSplit, list[str]]:
    """Read a folds TSV against a store's vocabulary.

    Rows naming entities or relations absent from the store are returned
    separately (cold-start bookkeeping when evaluating KG variants).
    """
    assignments: dict[Triple, int] = {}
    skipped: list[str] = []
    max_fold = -1
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 4:
                raise KGFormatError(f"{path}:{lineno}: expected 4 tab-separated fields")
            h, r, t, fold_s = fields[0], fields[1], fields[2], fields[3]
            fold = int(fold_s)
            max_fold = max(max_fold, fold)
            if (
                h not in store.entity_ids
                or t not in store.entity_ids
                or r not in store.relation_ids
            ):
                skipped.append(line)
                continue
            triple = Triple(store.entity_ids[h], store.relation_ids[r], store.entity_ids[t])
            assignments[triple] = fold
    return FoldSplit(fold_count=max_fold + 1, assignments=assignments), skipped


def filtered_candidates(
    store: TripleStore, query_head: int, query_relation: int, candidate_pool: Iterable[int]
) -> list[int]:
    """Candidates minus tails already linked to (head, relation), ascending id."""
    known = store.tails(query_head, query_relation)
    return sorted(c for c in set(candidate_pool) if c not in known)


def training_store(store: TripleStore, split: FoldSplit, test_fold: int) -> TripleStore:
    """Drop one fold's target triples; everything else stays in training.

    The vocabulary is preserved unchanged (held-out entities keep their
    identifiers), so fold assignments and candidate pools remain valid.
    """
    held_out = {t for t, f in split.assignments.items() if f == test_fold}
    mask = np.array(
        [Triple(int(h), int(r), int(t)) not in held_out for h, r, t in store.triples],
        dtype=bool,
    )
    return TripleStore(
        triples=store.triples[mask].copy(),
        entity_names=list(store.entity_names),
        relation_names=list(store.relation_names),
        entity_ids=dict(store.entity_ids),
        relation_ids=dict(store.relation_ids),
        entity_types=dict(store.entity_types),
        triple_scores={
            t: s for t, s in store.triple_scores.items() if t not in held_out
        },
    )


def default_candidate_pool(store: TripleStore, target_relation: int) -> frozenset[int]:
    """Gene/protein-typed entities, else everything except query-side heads."""
    if store.entity_types:
        pool = store.entities_of_type("protein", "gene")
        if pool:
            return pool
    heads = {int(h) for h in store.triples_of_relation(target_relation)[:, 0]}
    return frozenset(range(store.n_entities)) - heads


def scale_summary(store: TripleStore) -> dict:
    """Entity counts by type and triple counts by relation, with totals."""
    by_type: dict[str, int] = {}
    for eid in range(store.n_entities):
        tag = store.entity_types.get(eid, "untyped")
        by_type[tag] = by_type.get(tag, 0) + 1
    by_relation: dict[str, int] = {}
    for rid, name in enumerate(store.relation_names):
        by_relation[name] = int((store.triples[:, 1] == rid).sum())
    return {
        "entities": store.n_entities,
        "relations": store.n_relations,
        "triples": store.n_triples,
        "entities_by_type": by_type,
        "triples_by_relation": by_relation,
    }
