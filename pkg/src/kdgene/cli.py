"""Command-line entry point: prepare, train, predict, evaluate, ablate,
gradcheck. Every run emits a JSON manifest (command, resolved config, input
digests, seed, code version, wall time); diagnostics go to stderr, data to
files or stdout."""

from __future__ import annotations

import argparse
import difflib
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .ablation import (
    KGVariantSpec,
    RELATION_TYPES,
    TARGET_RELATION,
    run_ablation,
    variant_presets,
    write_ablation_csv,
)
from .config import TrainConfig, apply_overrides, grid_warnings, load_config
from .evaluator import (
    DEFAULT_CUTOFFS,
    evaluate_fold,
    rank_query,
    write_metrics_csv,
    write_rankings,
)
from .kg import (
    KGFormatError,
    TripleStore,
    add_reciprocals,
    default_candidate_pool,
    load_entity_types,
    load_folds,
    load_triples,
    make_folds,
    save_entity_types,
    save_folds,
    save_triples,
    scale_summary,
    training_store,
)
from .models import load_checkpoint, load_vocab, save_checkpoint
from .trainer import gradient_check, random_check_instance, train

DATA_DIR_ENV = "KDGENE_DATA_DIR"


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict[str, str]
    seed: int
    code_version: str
    wall_seconds: float


def _sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(
    path: str | Path,
    command: str,
    config: dict,
    input_paths: list[str | Path],
    seed: int,
    started: float,
) -> None:
    manifest = RunManifest(
        command=command,
        config=config,
        inputs={str(p): _sha256(p) for p in input_paths if Path(p).is_file()},
        seed=seed,
        code_version=__version__,
        wall_seconds=time.perf_counter() - started,
    )
    Path(path).write_text(json.dumps(asdict(manifest), indent=2) + "\n", encoding="utf-8")


def _limit_threads(n: int | None) -> None:
    if n is None:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=n)
    except ImportError:
        # best effort without threadpoolctl; honored only if BLAS reads these lazily
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def _err(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _load_data_dir(data_dir: str) -> TripleStore:
    triples_path = Path(data_dir) / "triples.tsv"
    if not triples_path.is_file():
        raise FileNotFoundError(f"no such file: {triples_path}")
    types_path = Path(data_dir) / "entity_types.tsv"
    types = load_entity_types(types_path) if types_path.is_file() else None
    return load_triples(triples_path, entity_types_by_name=types)


def _resolve_config(args: argparse.Namespace) -> TrainConfig:
    config = load_config(args.config) if args.config else TrainConfig()
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key] = value
    config = apply_overrides(config, overrides)
    for note in grid_warnings(config):
        print(f"warning: {note}", file=sys.stderr)
    return config


def _training_inputs(data_dir: str) -> tuple[TripleStore, Path, Path]:
    store = _load_data_dir(data_dir)
    folds_path = Path(data_dir) / "folds.tsv"
    if not folds_path.is_file():
        raise FileNotFoundError(f"no such file: {folds_path} (run prepare first)")
    return store, Path(data_dir) / "triples.tsv", folds_path


def cmd_prepare(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    for path in args.triples + ([args.types] if args.types else []):
        if not Path(path).is_file():
            return _err(f"no such file: {path}")
    types = load_entity_types(args.types) if args.types else None
    store = load_triples(*args.triples, columns=args.columns, entity_types_by_name=types)
    if args.target_relation not in store.relation_ids:
        return _err(
            f"target relation {args.target_relation!r} not found; "
            f"relations present: {store.relation_names}"
        )
    split = make_folds(
        store, store.relation_ids[args.target_relation], args.folds, args.seed
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_triples(store, out_dir / "triples.tsv")
    if store.entity_types:
        save_entity_types(store, out_dir / "entity_types.tsv")
    save_folds(store, split, out_dir / "folds.tsv")

    stats = scale_summary(store)
    print(f"entities\t{stats['entities']}")
    for tag, count in sorted(stats["entities_by_type"].items()):
        print(f"entities[{tag}]\t{count}")
    print(f"relations\t{stats['relations']}")
    for name, count in sorted(stats["triples_by_relation"].items()):
        print(f"triples[{name}]\t{count}")
    print(f"triples\t{stats['triples']}")
    print(f"folds\t{split.fold_count}")

    _write_manifest(
        out_dir / "prepare.manifest.json",
        "prepare",
        {
            "folds": args.folds,
            "target_relation": args.target_relation,
            "columns": args.columns,
        },
        [*args.triples, *( [args.types] if args.types else [] )],
        args.seed,
        started,
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    _limit_threads(args.threads)
    config = _resolve_config(args)
    store, triples_path, folds_path = _training_inputs(args.data_dir)
    split, skipped = load_folds(folds_path, store)
    if skipped:
        print(f"warning: {len(skipped)} fold rows outside vocabulary", file=sys.stderr)
    if not 0 <= args.fold < split.fold_count:
        return _err(f"fold {args.fold} out of range [0, {split.fold_count})")
    trainable = add_reciprocals(training_store(store, split, args.fold))

    log_path = Path(args.log) if args.log else Path(str(args.out) + ".log.csv")
    with open(log_path, "w", encoding="utf-8", newline="\n") as log:
        log.write("epoch,mean_loss,wall_seconds\n")

        def sink(epoch: int, mean_loss: float, wall: float) -> None:
            log.write(f"{epoch},{mean_loss},{wall}\n")
            print(f"epoch {epoch}: mean_loss={mean_loss:.6f}", file=sys.stderr)

        result = train(trainable, config, sink=sink)

    save_checkpoint(
        args.out,
        result.params,
        entity_names=trainable.entity_names,
        relation_names=trainable.relation_names,
        entity_types=trainable.entity_types,
    )
    _write_manifest(
        Path(args.manifest) if args.manifest else Path(str(args.out) + ".manifest.json"),
        "train",
        {**config.as_dict(), "fold": args.fold, "threads": args.threads},
        [triples_path, folds_path, *( [args.config] if args.config else [] )],
        config.seed,
        started,
    )
    if result.aborted:
        print(f"error: training aborted: {result.abort_reason}", file=sys.stderr)
        print(f"last finite checkpoint written to {args.out}", file=sys.stderr)
        return 1
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    if not Path(args.checkpoint).is_file():
        return _err(f"no such file: {args.checkpoint}")
    params = load_checkpoint(args.checkpoint)
    entity_names, relation_names, entity_types = load_vocab(args.checkpoint + ".vocab.tsv")
    store = _load_data_dir(args.data_dir)
    if store.entity_names != entity_names:
        return _err("checkpoint vocabulary does not match the data directory")

    if args.disease not in store.entity_ids:
        near = difflib.get_close_matches(args.disease, store.entity_names, n=3)
        hint = f"; closest names: {', '.join(near)}" if near else ""
        return _err(f"unknown disease {args.disease!r}{hint}")
    disease = store.entity_ids[args.disease]
    if args.relation not in store.relation_ids:
        return _err(f"unknown relation {args.relation!r}")
    relation = store.relation_ids[args.relation]

    filter_store = store
    if args.fold is not None:
        folds_path = Path(args.data_dir) / "folds.tsv"
        if not folds_path.is_file():
            return _err(f"no such file: {folds_path}")
        split, _ = load_folds(folds_path, store)
        filter_store = training_store(store, split, args.fold)

    pool = default_candidate_pool(store, relation)
    ranking = rank_query(params, filter_store, disease, relation, pool)
    for gene, score in zip(
        ranking.ranked_ids[: args.top_k], ranking.ranked_scores[: args.top_k]
    ):
        print(f"{store.entity_names[int(gene)]}\t{score}")

    _write_manifest(
        Path(args.manifest) if args.manifest else Path(str(args.checkpoint) + ".predict.manifest.json"),
        "predict",
        {"disease": args.disease, "relation": args.relation, "top_k": args.top_k, "fold": args.fold},
        [args.checkpoint, Path(args.data_dir) / "triples.tsv"],
        0,
        started,
    )
    return 0


def _naive_hit_ratio(results, n: int) -> float | None:
    hits = 0
    pairs = 0
    for result in results:
        for positive in result.positives:
            pairs += 1
            found = False
            for candidate in list(result.ranked_ids)[:n]:
                if int(candidate) == positive:
                    found = True
            if found:
                hits += 1
    return None if pairs == 0 else hits / pairs


def _naive_map(results, n: int) -> float | None:
    values = []
    for result in results:
        if not result.positives:
            continue
        total = 0.0
        for k in range(1, min(n, len(result.ranked_ids)) + 1):
            if int(result.ranked_ids[k - 1]) in result.positives:
                seen = 0
                for j in range(k):
                    if int(result.ranked_ids[j]) in result.positives:
                        seen += 1
                total += seen / k
        values.append(total / min(len(result.positives), n))
    return None if not values else sum(values) / len(values)


def cmd_evaluate(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    _limit_threads(args.threads)
    if not Path(args.checkpoint).is_file():
        return _err(f"no such file: {args.checkpoint}")
    params = load_checkpoint(args.checkpoint)
    store, triples_path, folds_path = _training_inputs(args.data_dir)
    entity_names, _, _ = load_vocab(args.checkpoint + ".vocab.tsv")
    if store.entity_names != entity_names:
        return _err("checkpoint vocabulary does not match the data directory")
    split, skipped = load_folds(folds_path, store)
    if not 0 <= args.fold < split.fold_count:
        return _err(f"fold {args.fold} out of range [0, {split.fold_count})")
    trainable = training_store(store, split, args.fold)
    target = next(iter(split.assignments)).relation
    pool = default_candidate_pool(trainable, target)
    report, results = evaluate_fold(
        params,
        trainable,
        split,
        args.fold,
        pool,
        skipped_cold_start=len(skipped),
    )
    write_metrics_csv(args.out, [report])
    if args.dump_rankings:
        write_rankings(args.dump_rankings, results, trainable)

    if args.oracle_check:
        for n in DEFAULT_CUTOFFS:
            engine_hr, oracle_hr = report.hr[n], _naive_hit_ratio(results, n)
            engine_map, oracle_map = report.map_[n], _naive_map(results, n)
            for label, engine, oracle in (
                ("hr", engine_hr, oracle_hr),
                ("map", engine_map, oracle_map),
            ):
                if engine is None and oracle is None:
                    continue
                if engine is None or oracle is None or abs(engine - oracle) > 1e-12:
                    return _err(
                        f"oracle mismatch on {label}@{n}: engine={engine} oracle={oracle}"
                    )
        print("oracle check: ok", file=sys.stderr)

    for fold, metric, n, value in report.metric_rows():
        print(f"{metric}@{n}\t{value}")
    print(
        f"queries={report.n_queries} pairs={report.n_pairs} "
        f"skipped_empty_pool={report.skipped_empty_pool} "
        f"skipped_cold_start={report.skipped_cold_start}",
        file=sys.stderr,
    )
    _write_manifest(
        Path(args.manifest) if args.manifest else Path(str(args.out) + ".manifest.json"),
        "evaluate",
        {"fold": args.fold, "oracle_check": bool(args.oracle_check)},
        [args.checkpoint, triples_path, folds_path],
        0,
        started,
    )
    return 0


def _parse_variant_token(token: str) -> KGVariantSpec:
    """Preset ("kg3"), thresholded preset ("kg3@850"), or custom
    ("myvariant:disease_gene+ppi@700")."""
    threshold = None
    if "@" in token:
        token, _, raw = token.partition("@")
        threshold = float(raw)
    presets = variant_presets()
    if ":" in token:
        name, _, rels = token.partition(":")
        included = frozenset(rels.split("+"))
    elif token in presets:
        base = presets[token]
        name, included = (token if threshold is None else f"{token}@{threshold:g}"), base.included
    else:
        raise ValueError(
            f"unknown variant {token!r}; presets: {sorted(presets)}; "
            f"custom syntax name:rel1+rel2[@ppi_min_score] over {RELATION_TYPES}"
        )
    spec = KGVariantSpec(name=name, included=included, ppi_min_score=threshold)
    spec.validate()
    return spec


def cmd_ablate(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    _limit_threads(args.threads)
    config = _resolve_config(args)
    store, triples_path, folds_path = _training_inputs(args.data_dir)
    split, _ = load_folds(folds_path, store)
    if not 0 <= args.fold < split.fold_count:
        return _err(f"fold {args.fold} out of range [0, {split.fold_count})")
    specs = [_parse_variant_token(token) for token in args.specs.split(",")]
    cells = args.cells.split(",") if args.cells else None
    rows = run_ablation(store, specs, config, split, args.fold, cells=cells)
    write_ablation_csv(args.out, rows)
    for variant, metric, n, value in rows:
        print(f"{variant}\t{metric}@{n}\t{value}")
    _write_manifest(
        Path(args.manifest) if args.manifest else Path(str(args.out) + ".manifest.json"),
        "ablate",
        {**config.as_dict(), "fold": args.fold, "specs": args.specs, "cells": args.cells},
        [triples_path, folds_path, *( [args.config] if args.config else [] )],
        config.seed,
        started,
    )
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = _resolve_config(args)
    strict = config.model in ("cp_n3", "distmult") and config.reg_lambda == 0.0
    rel_threshold = 1e-6 if strict else 1e-4
    # below this scale, a central difference at the given step cannot
    # resolve the derivative to the relative threshold; certify absolutely
    min_scale = 2e-3 if strict else 2e-4
    abs_threshold = 1e-7

    worst_rel = 0.0
    worst_label = ""
    worst_abs = 0.0
    for instance in range(args.instances):
        params, batch = random_check_instance(
            seed=int(np.random.SeedSequence([config.seed, instance]).generate_state(1)[0]),
            model=config.model,
            cell_kind=config.cell,
            output_mode=config.output_mode,
        )
        report = gradient_check(params, batch, config.reg_lambda, step=args.step)
        rel = report.max_rel_error_over(min_scale)
        if rel >= worst_rel:
            worst_rel = rel
            worst_entry = max(
                (
                    e
                    for e in report.entries
                    if max(abs(e.analytic), abs(e.numeric)) >= min_scale
                ),
                key=lambda e: e.rel_error,
            )
            worst_label = f"{worst_entry.param}{list(worst_entry.index)}"
        worst_abs = max(worst_abs, report.max_abs_error_below(min_scale))
    print(f"instances\t{args.instances}")
    print(f"max_rel_error\t{worst_rel:.3e}")
    print(f"worst_param\t{worst_label}")
    print(f"max_abs_error_small_entries\t{worst_abs:.3e}")
    print(f"thresholds\trel<{rel_threshold:g} (entries >= {min_scale:g}), abs<{abs_threshold:g}")
    _write_manifest(
        Path(args.manifest) if args.manifest else Path("gradcheck.manifest.json"),
        "gradcheck",
        {**config.as_dict(), "instances": args.instances, "step": args.step},
        [args.config] if args.config else [],
        config.seed,
        started,
    )
    if worst_rel >= rel_threshold or worst_abs >= abs_threshold:
        print("error: gradient check failed", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kdgene",
        description="Gated tensor-decomposition link prediction over typed triple stores",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest TSV triples, build folds, print scale stats")
    p.add_argument("--triples", nargs="+", required=True, help="triple TSV file(s)")
    p.add_argument("--types", help="optional entity,type TSV")
    p.add_argument("--columns", default="hrt", help="column order of the first three fields")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target-relation", default=TARGET_RELATION)
    p.add_argument("--out-dir", default=os.environ.get(DATA_DIR_ENV, "."))
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train on all folds except one")
    p.add_argument("--data-dir", default=os.environ.get(DATA_DIR_ENV, "."))
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override (wins)")
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="training log CSV (default: <out>.log.csv)")
    p.add_argument("--threads", type=int, default=None, help="1 = fully deterministic mode")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="rank filtered candidate genes for a disease")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", default=os.environ.get(DATA_DIR_ENV, "."))
    p.add_argument("--disease", required=True)
    p.add_argument("--relation", default=TARGET_RELATION)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--fold", type=int, default=None, help="filter against this fold's training complement")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="filtered ranking metrics on one fold")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", default=os.environ.get(DATA_DIR_ENV, "."))
    p.add_argument("--fold", type=int, required=True)
    p.add_argument("--out", default="metrics.csv")
    p.add_argument("--dump-rankings")
    p.add_argument("--oracle-check", action="store_true", help="recompute metrics with naive loops")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="comparative runs over KG variants or cell kinds")
    p.add_argument("--data-dir", default=os.environ.get(DATA_DIR_ENV, "."))
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--specs", required=True, help="comma list, e.g. kg1,kg2,kg3@850")
    p.add_argument("--cells", help="comma list of cell kinds to cross with the specs")
    p.add_argument("--out", default="ablation_report.csv")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference check of the analytic gradients")
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as err:
        return _err(str(err))
    except (KGFormatError, ValueError) as err:
        return _err(str(err))


if __name__ == "__main__":
    sys.exit(main())
