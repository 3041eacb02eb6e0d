"""Relation-subset KG variants, PPI confidence filtering, and comparative
training runs over them."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .config import TrainConfig
from .evaluator import DEFAULT_CUTOFFS, MetricReport, evaluate_fold
from .kg import (
    FoldSplit,
    Triple,
    TripleStore,
    add_reciprocals,
    build_store,
    default_candidate_pool,
    training_store,
)
from .trainer import train

RELATION_TYPES = (
    "disease_gene",
    "disease_symptom",
    "ppi",
    "go_protein",
    "pathway_protein",
)
TARGET_RELATION = "disease_gene"


@dataclass(frozen=True)
class KGVariantSpec:
    """A named subset of relation types, optionally PPI-confidence filtered."""

    name: str
    included: frozenset[str]
    ppi_min_score: float | None = None

    def validate(self) -> None:
        if TARGET_RELATION not in self.included:
            raise ValueError(f"variant {self.name!r} must include {TARGET_RELATION}")
        unknown = self.included - set(RELATION_TYPES)
        if unknown:
            raise ValueError(
                f"variant {self.name!r} names unknown relation types {sorted(unknown)}"
            )
        if self.ppi_min_score is not None and not 0 <= self.ppi_min_score <= 1000:
            raise ValueError(f"ppi_min_score must lie in [0, 1000], got {self.ppi_min_score}")


def variant_presets() -> dict[str, KGVariantSpec]:
    """The six standard relation combinations, kg1 through kg6."""
    combos = {
        "kg1": ("disease_gene",),
        "kg2": ("disease_gene", "disease_symptom"),
        "kg3": ("disease_gene", "ppi"),
        "kg4": ("disease_gene", "disease_symptom", "ppi"),
        "kg5": ("disease_gene", "ppi", "go_protein", "pathway_protein"),
        "kg6": RELATION_TYPES,
    }
    return {name: KGVariantSpec(name, frozenset(rels)) for name, rels in combos.items()}


def build_variant(full_store: TripleStore, spec: KGVariantSpec) -> TripleStore:
    """Keep only the spec's relation types (and confident-enough PPI edges);
    rebuild the vocabulary over the surviving triples."""
    spec.validate()
    if full_store.has_reciprocals():
        raise ValueError("build variants before reciprocal augmentation")

    def keep() -> list[tuple[str, str, str, float | None]]:
        rows = []
        for triple in full_store.iter_triples():
            rel_name = full_store.relation_names[triple.relation]
            if rel_name not in spec.included:
                continue
            score = full_store.triple_scores.get(triple)
            if spec.ppi_min_score is not None and rel_name == "ppi":
                if score is None:
                    h = full_store.entity_names[triple.head]
                    t = full_store.entity_names[triple.tail]
                    raise ValueError(
                        f"ppi triple ({h}, {t}) has no confidence score but "
                        f"variant {spec.name!r} sets ppi_min_score"
                    )
                if score < spec.ppi_min_score:
                    continue
            rows.append(
                (
                    full_store.entity_names[triple.head],
                    rel_name,
                    full_store.entity_names[triple.tail],
                    score,
                )
            )
        return rows

    types_by_name = {
        full_store.entity_names[e]: tag for e, tag in full_store.entity_types.items()
    }
    return build_store(keep(), types_by_name)


def _remap_folds(
    full_store: TripleStore, split: FoldSplit, variant: TripleStore
) -> tuple[FoldSplit, int]:
    """Carry fold assignments across a vocabulary rebuild, by surface name."""
    assignments: dict[Triple, int] = {}
    skipped = 0
    for triple, fold in split.assignments.items():
        h = full_store.entity_names[triple.head]
        r = full_store.relation_names[triple.relation]
        t = full_store.entity_names[triple.tail]
        if h in variant.entity_ids and t in variant.entity_ids and r in variant.relation_ids:
            assignments[
                Triple(variant.entity_ids[h], variant.relation_ids[r], variant.entity_ids[t])
            ] = fold
        else:
            skipped += 1
    return FoldSplit(fold_count=split.fold_count, assignments=assignments), skipped


def run_ablation(
    full_store: TripleStore,
    specs: Sequence[KGVariantSpec],
    config: TrainConfig,
    split: FoldSplit,
    fold_id: int,
    cells: Sequence[str] | None = None,
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
) -> list[tuple[str, str, int, float]]:
    """Train and evaluate each variant (optionally crossed with cell kinds)
    under one shared config and seed; returns "variant,metric,N,value" rows.

    Deterministic: identical specs produce identical rows.
    """
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate variant names: {names}")
    cell_kinds = list(cells) if cells else [config.cell]
    if len(set(cell_kinds)) != len(cell_kinds):
        raise ValueError(f"duplicate cell kinds: {cell_kinds}")

    rows: list[tuple[str, str, int, float]] = []
    for spec in specs:
        variant = build_variant(full_store, spec)
        variant_split, skipped = _remap_folds(full_store, split, variant)
        trainable = training_store(variant, variant_split, fold_id)
        target = trainable.relation_ids[TARGET_RELATION]
        pool = default_candidate_pool(trainable, target)
        for cell_kind in cell_kinds:
            cfg = TrainConfig(**{**config.as_dict(), "cell": cell_kind})
            cfg.validate()
            result = train(add_reciprocals(trainable), cfg)
            report, _ = evaluate_fold(
                result.params,
                trainable,
                variant_split,
                fold_id,
                pool,
                cutoffs=cutoffs,
                skipped_cold_start=skipped,
            )
            label = spec.name if len(cell_kinds) == 1 else f"{spec.name}+{cell_kind}"
            rows.extend(_report_rows(label, report))
    return rows


def _report_rows(label: str, report: MetricReport) -> list[tuple[str, str, int, float]]:
    rows = []
    for _, metric, n, value in report.metric_rows():
        rows.append((label, metric, n, value))
    return rows


def write_ablation_csv(path: str | Path, rows: Sequence[tuple[str, str, int, float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("variant,metric,N,value\n")
        for variant, metric, n, value in rows:
            fh.write(f"{variant},{metric},{n},{value}\n")
