"""Filtered ranking of candidate tails and HR@N / MAP@N aggregation.

Metric conventions (fixed here, declared in reports): HR@N counts
(query, positive) pairs whose positive lands in the query's top N, over all
test pairs; AP@N is truncated average precision normalized by
min(|positives|, N), averaged over queries with at least one positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .kg import FoldSplit, TripleStore, filtered_candidates
from .models import ModelParams, score_all_tails

DEFAULT_CUTOFFS = (1, 3, 10, 50)


@dataclass
class RankingResult:
    """One query's filtered candidate ranking, best first.

    Scores are nonincreasing; ties are broken by ascending entity id.
    Training positives never appear among the candidates.
    """

    head: int
    relation: int
    ranked_ids: np.ndarray
    ranked_scores: np.ndarray
    positives: frozenset[int] = frozenset()


def rank_candidates(
    candidate_ids: Sequence[int],
    scores: np.ndarray,
    head: int,
    relation: int,
    positives: frozenset[int] = frozenset(),
) -> RankingResult:
    """Sort candidates by descending score, ties by ascending id."""
    ids = np.asarray(candidate_ids, dtype=np.int64)
    ascending = np.argsort(ids, kind="stable")
    ids = ids[ascending]
    scores = np.asarray(scores, dtype=np.float64)[ascending]
    order = np.argsort(-scores, kind="stable")
    return RankingResult(
        head=head,
        relation=relation,
        ranked_ids=ids[order],
        ranked_scores=scores[order],
        positives=positives,
    )


def rank_query(
    params: ModelParams,
    store: TripleStore,
    head: int,
    relation: int,
    pool: Iterable[int],
    positives: frozenset[int] = frozenset(),
) -> RankingResult:
    """Score the filtered candidate pool for (head, relation) and sort."""
    candidates = filtered_candidates(store, head, relation, pool)
    if not candidates:
        return RankingResult(
            head=head,
            relation=relation,
            ranked_ids=np.empty(0, dtype=np.int64),
            ranked_scores=np.empty(0, dtype=np.float64),
            positives=positives,
        )
    scores = score_all_tails(params, head, relation)[candidates]
    return rank_candidates(candidates, scores, head, relation, positives)


def hit_ratio(results: Sequence[RankingResult], n: int) -> float | None:
    """Fraction of test pairs whose positive ranks in the top n.

    None (absent, not zero) when there are no test pairs.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    hits = 0
    pairs = 0
    for result in results:
        pairs += len(result.positives)
        if len(result.positives) == 0:
            continue
        top = result.ranked_ids[:n]
        hits += int(np.isin(top, list(result.positives)).sum())
    if pairs == 0:
        return None
    return hits / pairs


def average_precision(result: RankingResult, n: int) -> float | None:
    """Truncated AP normalized by min(|positives|, n); None without positives."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if len(result.positives) == 0:
        return None
    top = result.ranked_ids[:n]
    relevant = np.isin(top, list(result.positives))
    if not relevant.any():
        return 0.0
    precision_at = np.cumsum(relevant) / np.arange(1, len(top) + 1)
    return float(precision_at[relevant].sum() / min(len(result.positives), n))


def mean_average_precision(results: Sequence[RankingResult], n: int) -> float | None:
    """Mean AP@n over queries that have at least one positive."""
    values = [ap for r in results if (ap := average_precision(r, n)) is not None]
    if not values:
        return None
    return float(np.mean(values))


@dataclass
class MetricReport:
    """Per-fold metrics with the query-level breakdown and skip accounting."""

    fold: int
    hr: dict[int, float | None] = field(default_factory=dict)
    map_: dict[int, float | None] = field(default_factory=dict)
    n_queries: int = 0
    n_pairs: int = 0
    skipped_empty_pool: int = 0
    skipped_cold_start: int = 0
    per_query: dict[int, dict] = field(default_factory=dict)

    def metric_rows(self) -> list[tuple[str, str, int, float]]:
        rows = []
        for n, value in sorted(self.hr.items()):
            if value is not None:
                rows.append((str(self.fold), "hr", n, value))
        for n, value in sorted(self.map_.items()):
            if value is not None:
                rows.append((str(self.fold), "map", n, value))
        return rows


def evaluate_queries(
    params: ModelParams,
    store: TripleStore,
    queries: dict[int, frozenset[int]],
    relation: int,
    pool: Iterable[int],
    fold: int = 0,
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
    skipped_cold_start: int = 0,
) -> tuple[MetricReport, list[RankingResult]]:
    """Rank once per query head and aggregate metrics at each cutoff."""
    pool = frozenset(pool)
    results: list[RankingResult] = []
    report = MetricReport(fold=fold, skipped_cold_start=skipped_cold_start)
    for head in sorted(queries):
        positives = queries[head]
        ranking = rank_query(params, store, head, relation, pool, positives)
        if len(ranking.ranked_ids) == 0:
            report.skipped_empty_pool += 1
            continue
        results.append(ranking)
        report.n_queries += 1
        report.n_pairs += len(positives)
        report.per_query[head] = {
            "n_positives": len(positives),
            "pool_size": len(ranking.ranked_ids),
            "ap": {n: average_precision(ranking, n) for n in cutoffs},
        }
    for n in cutoffs:
        report.hr[n] = hit_ratio(results, n)
        report.map_[n] = mean_average_precision(results, n)
    return report, results


def evaluate_fold(
    params: ModelParams,
    store: TripleStore,
    split: FoldSplit,
    fold_id: int,
    pool: Iterable[int],
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
    skipped_cold_start: int = 0,
) -> tuple[MetricReport, list[RankingResult]]:
    """Group one fold's held-out triples by head and evaluate against store.

    The store must be the training complement of fold_id so that filtering
    removes exactly the training positives.
    """
    queries: dict[int, set[int]] = {}
    relation = None
    for triple, fold in split.assignments.items():
        if fold != fold_id:
            continue
        relation = triple.relation if relation is None else relation
        queries.setdefault(triple.head, set()).add(triple.tail)
    if relation is None:
        raise ValueError(f"fold {fold_id} has no held-out triples")
    frozen = {h: frozenset(tails) for h, tails in queries.items()}
    return evaluate_queries(
        params, store, frozen, relation, pool,
        fold=fold_id, cutoffs=cutoffs, skipped_cold_start=skipped_cold_start,
    )


def aggregate_reports(reports: Sequence[MetricReport]) -> dict[str, dict[int, float]]:
    """Unweighted mean of per-fold metric values (macro aggregation)."""
    out: dict[str, dict[int, float]] = {"hr": {}, "map": {}}
    for metric in out:
        cutoffs = sorted({n for r in reports for n in (r.hr if metric == "hr" else r.map_)})
        for n in cutoffs:
            values = [
                v
                for r in reports
                if (v := (r.hr if metric == "hr" else r.map_).get(n)) is not None
            ]
            if values:
                out[metric][n] = float(np.mean(values))
    return out


def write_metrics_csv(
    path: str | Path,
    reports: Sequence[MetricReport],
    include_mean: bool = True,
) -> None:
    """Rows of "fold,metric,N,value"; a "mean" pseudo-fold when aggregating."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("fold,metric,N,value\n")
        for report in reports:
            for fold, metric, n, value in report.metric_rows():
                fh.write(f"{fold},{metric},{n},{value}\n")
        if include_mean and len(reports) > 1:
            for metric, per_n in aggregate_reports(reports).items():
                for n, value in sorted(per_n.items()):
                    fh.write(f"mean,{metric},{n},{value}\n")


def write_rankings(
    path: str | Path, results: Sequence[RankingResult], store: TripleStore
) -> None:
    """Dump of "disease\trank\tgene\tscore" rows, best candidates first."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for result in results:
            head = store.entity_names[result.head]
            for rank, (gene, score) in enumerate(
                zip(result.ranked_ids, result.ranked_scores), start=1
            ):
                fh.write(f"{head}\t{rank}\t{store.entity_names[int(gene)]}\t{score}\n")
