import json

import pytest
from hypothesis import given, settings, strategies as st

from flowroute.config import (
    ConfigError,
    RunConfig,
    config_from_dict,
    config_to_dict,
    dump_config,
    large_scale_config,
    load_config,
    full_scale_config,
)


@pytest.mark.parametrize("make", [RunConfig, full_scale_config, large_scale_config])
def test_roundtrip(tmp_path, make):
    cfg = make()
    path = tmp_path / "c.json"
    dump_config(cfg, path)
    assert load_config(path) == cfg


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.floats(0.1, 1.0), st.integers(1, 64), st.integers(0, 2 ** 31))
def test_roundtrip_overrides(c, lam, bands, seed):
    cfg = RunConfig().replace(**{"env.neighbors": c, "training.discount": lam,
                                 "layout.num_bands": bands, "training.seed": seed})
    assert config_from_dict(json.loads(json.dumps(config_to_dict(cfg)))) == cfg


def test_unknown_keys_rejected():
    doc = config_to_dict(RunConfig())
    doc["training"]["gamma"] = 0.9
    with pytest.raises(ConfigError, match="gamma"):
        config_from_dict(doc)
    with pytest.raises(ConfigError):
        config_from_dict({"bogus": {}})


@pytest.mark.parametrize("section, key, value", [
    ("env", "neighbors", 0),
    ("env", "neighbors", "ten"),
    ("training", "discount", 0.0),
    ("training", "discount", 1.5),
    ("agent", "optimizer", "rmsprop"),
    ("eval", "rounds", 0),
    ("eval", "fairness", 1),
    ("layout", "num_bands", 2.5),
])
def test_invalid_values_rejected(section, key, value):
    doc = config_to_dict(RunConfig())
    doc[section][key] = value
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_partial_document_uses_defaults():
    cfg = config_from_dict({"layout": {"num_bands": 4}})
    assert cfg.layout.num_bands == 4
    assert cfg.env == RunConfig().env


def test_reference_defaults():
    cfg = RunConfig()
    assert cfg.layout.grid_counts == (6, 8, 7, 6, 5, 10, 8, 9, 6)
    assert cfg.env.neighbors == 10
    assert cfg.eval.rounds == 2
    assert cfg.training.bias == 40.0


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_shipped_config_files_load():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    assert load_config(root / "desk.json") == RunConfig()
    assert load_config(root / "full_scale.json") == full_scale_config()
    assert load_config(root / "large_scale.json") == large_scale_config()
