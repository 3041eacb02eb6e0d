#!/usr/bin/env python3
"""Generate the committed planted-structure fixture under data/planted/.

Block-structured disease-gene graph: diseases and genes are partitioned
into latent blocks; each disease links to genes of its own block, and a
correlated disease-symptom relation shares the block structure. A fixed
fraction of the disease-gene links is held out as the test split, chosen
so every disease keeps most of its links and every held-out gene still
occurs in training.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np


def generate(
    out_dir: Path,
    n_blocks: int = 10,
    diseases_per_block: int = 5,
    genes_per_block: int = 20,
    links_per_disease: int = 8,
    symptoms_per_block: int = 2,
    holdout_fraction: float = 0.2,
    seed: int = 7,
) -> dict:
    rng = np.random.default_rng(seed)
    n_diseases = n_blocks * diseases_per_block
    n_genes = n_blocks * genes_per_block

    diseases = [f"disease{i:03d}" for i in range(n_diseases)]
    genes = [f"gene{i:03d}" for i in range(n_genes)]
    symptoms = [f"symptom{i:02d}" for i in range(n_blocks * symptoms_per_block)]

    links: list[tuple[str, str]] = []
    per_disease: dict[str, list[str]] = {}
    for d_idx, disease in enumerate(diseases):
        block = d_idx // diseases_per_block
        block_genes = genes[block * genes_per_block : (block + 1) * genes_per_block]
        chosen = rng.choice(len(block_genes), size=links_per_disease, replace=False)
        per_disease[disease] = [block_genes[i] for i in sorted(chosen)]
        links.extend((disease, g) for g in per_disease[disease])

    n_holdout = round(holdout_fraction * len(links))
    # spread the holdout over diseases (at most ceil(mean)+1 per disease) and
    # never orphan a gene from the training split
    gene_train_count: dict[str, int] = {}
    for _, g in links:
        gene_train_count[g] = gene_train_count.get(g, 0) + 1
    base, extra = divmod(n_holdout, n_diseases)
    extras = set(rng.choice(n_diseases, size=extra, replace=False).tolist())
    test_links: set[tuple[str, str]] = set()
    for d_idx, disease in enumerate(diseases):
        want = base + (1 if d_idx in extras else 0)
        order = rng.permutation(links_per_disease)
        taken = 0
        for i in order:
            if taken == want:
                break
            gene = per_disease[disease][i]
            if gene_train_count[gene] > 1:
                gene_train_count[gene] -= 1
                test_links.add((disease, gene))
                taken += 1

    train_rows = []
    test_rows = []
    for disease, gene in links:
        row = f"{disease}\tdisease_gene\t{gene}"
        (test_rows if (disease, gene) in test_links else train_rows).append(row)
    for d_idx, disease in enumerate(diseases):
        block = d_idx // diseases_per_block
        for s in range(symptoms_per_block):
            symptom = symptoms[block * symptoms_per_block + s]
            train_rows.append(f"{disease}\tdisease_symptom\t{symptom}")

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "train.tsv").write_text("\n".join(train_rows) + "\n", encoding="utf-8")
    (out_dir / "test.tsv").write_text("\n".join(test_rows) + "\n", encoding="utf-8")
    types = (
        [f"{d}\tdisease" for d in diseases]
        + [f"{g}\tprotein" for g in genes]
        + [f"{s}\tsymptom" for s in symptoms]
    )
    (out_dir / "entity_types.tsv").write_text("\n".join(types) + "\n", encoding="utf-8")
    return {
        "diseases": n_diseases,
        "genes": n_genes,
        "symptoms": len(symptoms),
        "train_links": len(links) - len(test_links),
        "test_links": len(test_links),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out-dir", default=Path(__file__).resolve().parents[1] / "data" / "planted"
    )
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    stats = generate(Path(args.out_dir), seed=args.seed)
    for key, value in stats.items():
        print(f"{key}\t{value}")


if __name__ == "__main__":
    main()
