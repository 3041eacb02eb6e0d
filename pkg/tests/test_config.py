import numpy as np
import pytest

from kdgene.config import (
    TrainConfig,
    apply_overrides,
    config_text,
    derived_rng,
    expand_grid,
    grid_warnings,
    parse_config,
)


def test_parse_round_trip():
    config = TrainConfig(batch_size=128, learning_rate=0.1, seed=9)
    assert parse_config(config_text(config)) == config


def test_parse_ignores_comments_and_blanks():
    config = parse_config("# a comment\n\nepochs=7\n")
    assert config.epochs == 7


def test_unknown_key_lists_valid_keys():
    with pytest.raises(ValueError, match="valid keys: batch_size"):
        parse_config("bogus_key=1\n")


def test_malformed_line_is_error():
    with pytest.raises(ValueError, match="key=value"):
        parse_config("epochs\n")


def test_overrides_win():
    config = apply_overrides(TrainConfig(epochs=3), {"epochs": "11", "cell": "gru"})
    assert config.epochs == 11
    assert config.cell == "gru"


@pytest.mark.parametrize(
    "field,value,match",
    [
        ("batch_size", 0, "batch_size"),
        ("learning_rate", 0.0, "learning_rate"),
        ("reg_lambda", -0.1, "reg_lambda"),
        ("epochs", 0, "epochs"),
        ("model", "tucker", "model"),
        ("cell", "peephole", "cell"),
        ("output_mode", "verbatim", "output_mode"),
        ("seed", -1, "seed"),
    ],
)
def test_validation_errors(field, value, match):
    config = TrainConfig(**{field: value})
    with pytest.raises(ValueError, match=match):
        config.validate()


def test_cp_dimension_constraint():
    with pytest.raises(ValueError, match="d_r == d_e"):
        TrainConfig(model="cp_n3", d_e=8, d_r=4).validate()


def test_lambda_outside_grid_warns_but_is_accepted():
    config = TrainConfig(reg_lambda=0.3)
    config.validate()
    notes = grid_warnings(config)
    assert len(notes) == 1
    assert "0.3" in notes[0]
    assert grid_warnings(TrainConfig(reg_lambda=0.05)) == []


def test_expand_grid_enumerates_cartesian_product():
    configs = expand_grid(
        TrainConfig(), {"learning_rate": [0.01, 0.1], "reg_lambda": [0.01, 0.05, 0.1]}
    )
    assert len(configs) == 6
    assert len({(c.learning_rate, c.reg_lambda) for c in configs}) == 6


def test_expand_grid_unknown_key():
    with pytest.raises(ValueError, match="unknown config key"):
        expand_grid(TrainConfig(), {"momentum": [0.9]})


def test_derived_rng_is_deterministic_and_label_separated():
    a = derived_rng(5, "param-init").integers(2**32)
    b = derived_rng(5, "param-init").integers(2**32)
    c = derived_rng(5, "epoch-shuffle").integers(2**32)
    d = derived_rng(6, "param-init").integers(2**32)
    assert a == b
    assert a != c
    assert a != d


def test_derived_rng_index_separated():
    a = derived_rng(5, "epoch-shuffle", 0).integers(2**32)
    b = derived_rng(5, "epoch-shuffle", 1).integers(2**32)
    assert a != b
