#!/usr/bin/env python3
"""Grid-enumeration demo: sweep learning rate and regularization strength on
the planted fixture and print held-out HR@10 per configuration."""

from __future__ import annotations

import argparse
from pathlib import Path

from kdgene.ablation import build_variant, variant_presets
from kdgene.config import TrainConfig, expand_grid
from kdgene.evaluator import evaluate_queries
from kdgene.kg import add_reciprocals, load_entity_types, load_triples
from kdgene.trainer import train

ROOT = Path(__file__).resolve().parents[1]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", default=ROOT / "data" / "planted")
    parser.add_argument("--epochs", type=int, default=20)
    args = parser.parse_args()

    data = Path(args.data_dir)
    types = load_entity_types(data / "entity_types.tsv")
    full = load_triples(data / "train.tsv", entity_types_by_name=types)
    test = load_triples(data / "test.tsv")
    store = build_variant(full, variant_presets()["kg1"])
    queries: dict[int, set[int]] = {}
    for h, _, t in test.triples:
        head = store.entity_ids[test.entity_names[h]]
        tail = store.entity_ids[test.entity_names[t]]
        queries.setdefault(head, set()).add(tail)
    frozen = {h: frozenset(v) for h, v in queries.items()}
    augmented = add_reciprocals(store)

    base = TrainConfig(epochs=args.epochs, d_e=32, d_r=16, batch_size=256, seed=0)
    grid = {"learning_rate": [0.01, 0.05, 0.1], "reg_lambda": [0.001, 0.01, 0.1]}
    print(f"{'learning_rate':>13s} {'reg_lambda':>10s} {'HR@10':>7s}")
    for config in expand_grid(base, grid):
        result = train(augmented, config)
        report, _ = evaluate_queries(
            result.params, store, frozen,
            store.relation_ids["disease_gene"],
            store.entities_of_type("protein"),
        )
        print(f"{config.learning_rate:13.3f} {config.reg_lambda:10.3f} {report.hr[10]:7.3f}")


if __name__ == "__main__":
    main()
