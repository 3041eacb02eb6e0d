import numpy as np
import pytest

from kdgene.ablation import (
    KGVariantSpec,
    RELATION_TYPES,
    build_variant,
    run_ablation,
    variant_presets,
    write_ablation_csv,
)
from kdgene.config import TrainConfig
from kdgene.kg import add_reciprocals, make_folds

PRESET_RELATIONS = {
    "kg1": {"disease_gene"},
    "kg2": {"disease_gene", "disease_symptom"},
    "kg3": {"disease_gene", "ppi"},
    "kg4": {"disease_gene", "disease_symptom", "ppi"},
    "kg5": {"disease_gene", "ppi", "go_protein", "pathway_protein"},
    "kg6": set(RELATION_TYPES),
}


def test_presets_are_the_six_standard_combinations():
    presets = variant_presets()
    assert set(presets) == set(PRESET_RELATIONS)
    for name, expected in PRESET_RELATIONS.items():
        assert set(presets[name].included) == expected


def test_kg1_keeps_only_disease_gene(demo_store):
    variant = build_variant(demo_store, variant_presets()["kg1"])
    assert variant.relation_names == ["disease_gene"]
    assert variant.n_triples == 15
    # vocabulary rebuilt: only disease-gene endpoints survive
    assert all(
        tag in ("disease", "protein") for tag in variant.entity_types.values()
    )
    assert variant.n_entities == 13


def test_kg6_is_identity_filter(demo_store):
    variant = build_variant(demo_store, variant_presets()["kg6"])
    assert variant.n_triples == demo_store.n_triples
    assert variant.entity_names == demo_store.entity_names
    assert variant.relation_names == demo_store.relation_names


def test_ppi_thresholds_are_nested(demo_store):
    counts = {}
    for threshold in (700, 850, 950):
        spec = KGVariantSpec(
            f"kg3@{threshold}", frozenset({"disease_gene", "ppi"}), ppi_min_score=threshold
        )
        variant = build_variant(demo_store, spec)
        rid = variant.relation_ids["ppi"]
        edges = {
            (variant.entity_names[h], variant.entity_names[t])
            for h, r, t in variant.triples
            if r == rid
        }
        counts[threshold] = edges
    assert counts[950] < counts[850] < counts[700]


def test_variant_triple_count_monotone_in_threshold(demo_store):
    sizes = []
    for threshold in (0, 700, 850, 950, 1000):
        spec = KGVariantSpec(
            f"v@{threshold}", frozenset({"disease_gene", "ppi"}), ppi_min_score=threshold
        )
        sizes.append(build_variant(demo_store, spec).n_triples)
    assert sizes == sorted(sizes, reverse=True)


def test_variant_triple_count_monotone_in_relation_subset(demo_store):
    small = build_variant(demo_store, variant_presets()["kg2"])
    large = build_variant(demo_store, variant_presets()["kg4"])
    assert small.n_triples <= large.n_triples


def test_variant_must_include_disease_gene():
    spec = KGVariantSpec("bad", frozenset({"ppi"}))
    with pytest.raises(ValueError, match="must include disease_gene"):
        spec.validate()


def test_variant_unknown_relation_type():
    spec = KGVariantSpec("bad", frozenset({"disease_gene", "mirna"}))
    with pytest.raises(ValueError, match="unknown relation types"):
        spec.validate()


def test_ppi_threshold_requires_scores(demo_store):
    from kdgene.kg import build_store

    store = build_store(
        [("d", "disease_gene", "g", None), ("g", "ppi", "h", None)]
    )
    spec = KGVariantSpec("v", frozenset({"disease_gene", "ppi"}), ppi_min_score=500)
    with pytest.raises(ValueError, match="no confidence score"):
        build_variant(store, spec)


def test_variant_rejects_augmented_store(demo_store):
    with pytest.raises(ValueError, match="before reciprocal"):
        build_variant(add_reciprocals(demo_store), variant_presets()["kg1"])


def _fast_config(**overrides):
    base = dict(
        batch_size=64, learning_rate=0.1, reg_lambda=0.01, epochs=2,
        d_e=8, d_r=4, model="kdgene", cell="lstm", output_mode="standard", seed=1,
    )
    base.update(overrides)
    return TrainConfig(**base)


def test_run_ablation_identical_specs_give_identical_rows(demo_store):
    split = make_folds(demo_store, demo_store.relation_ids["disease_gene"], 3, seed=2)
    spec = variant_presets()["kg2"]
    twin = KGVariantSpec("kg2_twin", spec.included, spec.ppi_min_score)
    rows = run_ablation(demo_store, [spec, twin], _fast_config(), split, fold_id=0)
    first = [(m, n, v) for label, m, n, v in rows if label == "kg2"]
    second = [(m, n, v) for label, m, n, v in rows if label == "kg2_twin"]
    assert first == second
    assert len(first) > 0


def test_run_ablation_rejects_duplicate_names(demo_store):
    split = make_folds(demo_store, demo_store.relation_ids["disease_gene"], 3, seed=2)
    spec = variant_presets()["kg1"]
    with pytest.raises(ValueError, match="duplicate variant names"):
        run_ablation(demo_store, [spec, spec], _fast_config(), split, fold_id=0)


def test_run_ablation_cell_kinds_emit_labeled_rows(demo_store):
    split = make_folds(demo_store, demo_store.relation_ids["disease_gene"], 3, seed=2)
    rows = run_ablation(
        demo_store,
        [variant_presets()["kg1"]],
        _fast_config(),
        split,
        fold_id=0,
        cells=["rnn", "gru", "lstm"],
    )
    labels = {label for label, _, _, _ in rows}
    assert labels == {"kg1+rnn", "kg1+gru", "kg1+lstm"}
    per_metric = {}
    for label, metric, n, _ in rows:
        per_metric.setdefault((metric, n), set()).add(label)
    assert all(len(v) == 3 for v in per_metric.values())


def test_ablation_csv_format(tmp_path):
    path = tmp_path / "ablation_report.csv"
    write_ablation_csv(path, [("kg1", "hr", 10, 0.5)])
    assert path.read_text() == "variant,metric,N,value\nkg1,hr,10,0.5\n"
