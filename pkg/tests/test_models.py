import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from kdgene.cells import new_cell
from kdgene.models import (
    ModelParams,
    init_params,
    load_checkpoint,
    load_vocab,
    n_parameters,
    param_items,
    save_checkpoint,
    score_all_tails,
    score_triple,
)


def _cp_params(entity_rows, relation_rows, kind="cp_n3"):
    return ModelParams(
        kind=kind,
        entity_emb=np.asarray(entity_rows, dtype=np.float64),
        relation_emb=np.asarray(relation_rows, dtype=np.float64),
    )


def test_score_triple_direct_arithmetic():
    params = _cp_params([[1.0, 2.0], [5.0, 6.0]], [[3.0, 4.0]])
    assert score_triple(params, 0, 0, 1) == pytest.approx(63.0)


def test_score_triple_zero_tail_annihilates():
    params = _cp_params([[1.0, 2.0], [0.0, 0.0]], [[3.0, 4.0]])
    assert score_triple(params, 0, 0, 1) == 0.0


def test_score_triple_cp_hand_example():
    params = _cp_params([[1.0, 1.0], [1.0, 3.0]], [[2.0, -1.0]])
    assert score_triple(params, 0, 0, 1) == pytest.approx(-1.0)


def test_score_all_tails_basis_vectors():
    params = _cp_params([[1.0, 0.0], [0.0, 1.0]], [[1.0, 1.0]])
    params.entity_emb = np.array([[1.0, 0.0], [0.0, 1.0]])
    # head row [1, 0] with relation [a, b] gives q = [a, 0]
    params.relation_emb = np.array([[0.7, 0.9]])
    scores = score_all_tails(params, 0, 0)
    assert_allclose(scores, [0.7, 0.0])


def test_score_all_tails_zero_relation():
    params = _cp_params(np.ones((4, 3)), np.zeros((1, 3)))
    assert_allclose(score_all_tails(params, 0, 0), np.zeros(4))


def test_invalid_ids_raise():
    params = _cp_params(np.ones((2, 2)), np.ones((1, 2)))
    with pytest.raises(ValueError, match="head id"):
        score_triple(params, 5, 0, 0)
    with pytest.raises(ValueError, match="relation id"):
        score_all_tails(params, 0, 3)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["cp_n3", "distmult", "kdgene"]))
@settings(max_examples=30, deadline=None)
def test_score_all_tails_matches_score_triple(seed, kind):
    rng = np.random.default_rng(seed)
    n_e = int(rng.integers(2, 12))
    d_e = int(rng.integers(1, 6))
    d_r = d_e if kind != "kdgene" else int(rng.integers(1, 6))
    params = init_params(n_e, 3, d_e, d_r, kind=kind, seed=seed, scale=0.5)
    h = int(rng.integers(n_e))
    r = int(rng.integers(3))
    scores = score_all_tails(params, h, r)
    looped = np.array([score_triple(params, h, r, t) for t in range(n_e)])
    scale = max(1.0, np.abs(scores).max())
    assert np.abs(scores - looped).max() <= 1e-12 * scale


def test_distmult_is_cp_with_tied_lookups():
    cp = init_params(6, 2, 4, 4, kind="cp_n3", seed=9, scale=0.3)
    dm = ModelParams(
        kind="distmult",
        entity_emb=cp.entity_emb.copy(),
        relation_emb=cp.relation_emb.copy(),
    )
    for h in range(6):
        for r in range(2):
            assert_allclose(score_all_tails(cp, h, r), score_all_tails(dm, h, r))


def test_kdgene_contrived_cell_reproduces_cp_scores():
    # with zero gate weights, the as_written output is sigma(b_o); choosing
    # b_o = logit(v) pins the updated relation embedding at v for every query
    rng = np.random.default_rng(4)
    v = rng.uniform(0.2, 0.8, 5)
    cp = init_params(7, 1, 5, 5, kind="cp_n3", seed=11, scale=0.6)
    cp.relation_emb[0] = v
    cell = new_cell("lstm", d_e=5, d_r=3, output_mode="as_written")
    cell.weights["b_o"][:] = np.log(v / (1.0 - v))
    kd = ModelParams(
        kind="kdgene",
        entity_emb=cp.entity_emb.copy(),
        relation_emb=rng.normal(size=(1, 3)),
        cell=cell,
    )
    for h in range(7):
        assert_allclose(score_all_tails(kd, h, 0), score_all_tails(cp, h, 0), rtol=1e-12)


def test_scores_invariant_under_entity_permutation():
    params = init_params(9, 2, 4, 3, kind="kdgene", seed=2, scale=0.4)
    rng = np.random.default_rng(0)
    perm = rng.permutation(9)  # new id of entity e is perm[e]
    permuted = params.copy()
    permuted.entity_emb[perm] = params.entity_emb
    for h in range(9):
        for r in range(2):
            original = score_all_tails(params, h, r)
            relabeled = score_all_tails(permuted, int(perm[h]), r)
            assert_allclose(relabeled[perm], original, rtol=1e-12, atol=1e-15)


def test_init_same_seed_is_bitwise_identical():
    a = init_params(5, 4, 3, 2, kind="kdgene", seed=33)
    b = init_params(5, 4, 3, 2, kind="kdgene", seed=33)
    for (name_a, arr_a), (_, arr_b) in zip(param_items(a), param_items(b)):
        assert np.array_equal(arr_a, arr_b), name_a


def test_init_different_seeds_differ():
    a = init_params(5, 4, 3, 3, kind="cp_n3", seed=1)
    b = init_params(5, 4, 3, 3, kind="cp_n3", seed=2)
    assert not np.array_equal(a.entity_emb, b.entity_emb)


def test_init_zero_dimension_is_error():
    with pytest.raises(ValueError, match="positive"):
        init_params(0, 1, 4, 4, kind="cp_n3")


def test_init_mean_within_three_sigma():
    params = init_params(1000, 100, 100, 100, kind="cp_n3", seed=5)
    draws = params.entity_emb.ravel()
    assert draws.size == 10**5
    sigma_mean = (0.01 / np.sqrt(3.0)) / np.sqrt(draws.size)
    assert abs(draws.mean()) < 3.0 * sigma_mean


def test_cp_requires_matching_dims():
    with pytest.raises(ValueError, match="d_r == d_e"):
        init_params(3, 2, 4, 2, kind="cp_n3")


def test_validate_rejects_non_finite():
    params = init_params(3, 2, 4, 4, kind="cp_n3")
    params.entity_emb[0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        params.validate()


@pytest.mark.parametrize(
    "kind,cell_kind,output_mode",
    [
        ("cp_n3", "lstm", "standard"),
        ("distmult", "lstm", "standard"),
        ("kdgene", "lstm", "as_written"),
        ("kdgene", "gru", "standard"),
        ("kdgene", "rnn", "standard"),
    ],
)
def test_checkpoint_round_trip(tmp_path, kind, cell_kind, output_mode):
    d_r = 4 if kind != "kdgene" else 3
    params = init_params(
        5, 2, 4, d_r, kind=kind, seed=8, cell_kind=cell_kind, output_mode=output_mode
    )
    path = tmp_path / "model.ckpt"
    entity_names = [f"e{i}" for i in range(5)]
    relation_names = ["r0", "r1"]
    save_checkpoint(path, params, entity_names, relation_names, {0: "disease"})
    loaded = load_checkpoint(path)
    assert loaded.kind == params.kind
    assert loaded.output_mode == params.output_mode
    for (name_a, arr_a), (_, arr_b) in zip(param_items(params), param_items(loaded)):
        assert np.array_equal(arr_a, arr_b), name_a
    e_names, r_names, types = load_vocab(str(path) + ".vocab.tsv")
    assert e_names == entity_names
    assert r_names == relation_names
    assert types == {0: "disease"}


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(ValueError, match="bad magic"):
        load_checkpoint(path)


def test_checkpoint_truncated(tmp_path):
    params = init_params(4, 2, 3, 3, kind="cp_n3", seed=0)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 9])
    with pytest.raises(ValueError, match="truncated"):
        load_checkpoint(path)


def test_n_parameters_counts_flat_space():
    params = init_params(5, 2, 4, 3, kind="kdgene", seed=0, cell_kind="rnn")
    # entity 5*4, relation 2*3, rnn cell: (4,4) + (4,3) + (4,)
    assert n_parameters(params) == 20 + 6 + 16 + 12 + 4
