import dataclasses

import pytest

from imot.config import (
    ConfigError,
    RunConfig,
    config_from_json,
    config_to_json,
    load_config,
    save_config,
    validate_config,
)


def test_defaults_are_valid():
    cfg = validate_config(RunConfig())
    assert cfg.token_len == 100
    assert cfg.particle_count == 128
    assert cfg.k1 == 9 and cfg.k2 == 3
    assert cfg.learning_rate == 1e-4 and cfg.batch_size == 128


def test_derived_widths():
    cfg = RunConfig(token_len=40)
    assert cfg.ffn_width == 160
    assert cfg.train_stride_eff == 4
    assert cfg.eval_stride_eff == 40
    cfg = RunConfig(token_len=40, ffn_hidden=7, train_stride=3, eval_stride=9)
    assert (cfg.ffn_width, cfg.train_stride_eff, cfg.eval_stride_eff) == (7, 3, 9)


@pytest.mark.parametrize("overrides,needle", [
    (dict(k1=3, k2=5), "k2 >= k1"),
    (dict(k1=9, k2=9), "k2 >= k1"),
    (dict(k1=9, k2=4), "parity mismatch"),
    (dict(k1=0, k2=0), "orders must be >= 1"),
    (dict(channels=6), "channels must be 3"),
    (dict(token_len=1), "token_len must be >= 2"),
    (dict(token_len=8, k1=9, k2=3), "exceeds token_len"),
    (dict(particle_count=0), "particle_count"),
    (dict(encoder_layers=0), "encoder_layers"),
    (dict(decoder_layers=0), "decoder_layers"),
    (dict(gamma=-1.0), "gamma"),
    (dict(attention_heads=3), "divisible by attention_heads"),
    (dict(token_len=25, attention_heads=5), "must be even"),
    (dict(particles=False, dsm=True), "dsm requires particles"),
    (dict(learning_rate=-1e-4), "learning_rate"),
    (dict(batch_size=0), "batch_size"),
    (dict(max_epochs=0), "max_epochs"),
    (dict(patience=-1), "patience"),
    (dict(val_fraction=0.9), "val_fraction"),
    (dict(mlp_hidden=0), "mlp_hidden"),
    (dict(train_stride=0), "train_stride"),
    (dict(pdr_stride_m=0.0), "pdr_stride_m"),
])
def test_invariant_violations_named(overrides, needle):
    with pytest.raises(ConfigError) as excinfo:
        validate_config(RunConfig(**overrides))
    assert needle in str(excinfo.value)


def test_json_round_trip_is_bitwise():
    cfg = RunConfig(token_len=200, learning_rate=3.0000000000000004e-4, gamma=2.2,
                    ffn_hidden=123, psd=False, seed=7)
    text = config_to_json(cfg)
    again = config_from_json(text)
    assert again == cfg
    assert config_to_json(again) == text


def test_unknown_keys_hard_error():
    with pytest.raises(ConfigError, match="unknown configuration keys: learning_rte"):
        config_from_json('{"learning_rte": 1e-3}')


def test_invalid_json_and_non_object():
    with pytest.raises(ConfigError, match="invalid JSON"):
        config_from_json("{not json")
    with pytest.raises(ConfigError, match="JSON object"):
        config_from_json("[1, 2]")


def test_file_round_trip(tmp_path):
    cfg = RunConfig(token_len=100, particle_count=12, seed=3)
    path = tmp_path / "config.json"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_loaded_document_is_validated(tmp_path):
    doc = config_to_json(RunConfig()).replace('"k2": 3', '"k2": 11')
    with pytest.raises(ConfigError, match="k2 >= k1"):
        config_from_json(doc)


def test_config_is_immutable():
    cfg = RunConfig()
    with pytest.raises(dataclasses.FrozenInstanceError):
        cfg.token_len = 5
