"""Config schema: section building, YAML loading, and fingerprints."""

import dataclasses

import pytest

from uwacr.config import (
    AppConfig,
    BenchParams,
    config_fingerprint,
    config_from_dict,
    default_config,
    load_config,
    resolved_dict,
    smoke_config,
)


def test_presets_construct_and_differ():
    d = default_config()
    s = smoke_config()
    assert d.ofdm.n_fft != s.ofdm.n_fft
    assert config_fingerprint(d) != config_fingerprint(s)


def test_fingerprint_is_stable_and_sensitive():
    assert config_fingerprint(smoke_config()) == config_fingerprint(smoke_config())
    cfg = smoke_config()
    moved = dataclasses.replace(cfg, scenario=dataclasses.replace(cfg.scenario, snr_db=-1.0))
    assert config_fingerprint(moved) != config_fingerprint(cfg)
    assert len(config_fingerprint(cfg)) == 12


def test_resolved_dict_carries_derived_grid_quantities():
    doc = resolved_dict(smoke_config())
    derived = doc["derived"]
    assert derived["n_cp"] == 16
    assert derived["n_sym"] == 80
    assert len(derived["rb_bins_shifted"]) == 5


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown key turbo"):
        config_from_dict({"turbo": {}})
    with pytest.raises(ValueError, match="unknown key scenario.bogus"):
        config_from_dict({"scenario": {"bogus": 1}})
    with pytest.raises(ValueError, match="must be a mapping"):
        config_from_dict({"scenario": 3})
    with pytest.raises(ValueError, match="mapping"):
        config_from_dict([1, 2])


def test_lists_become_tuples():
    cfg = config_from_dict({"agent": {"conv": [[2, 8, 4]], "hidden": [16]}})
    assert cfg.agent.conv == ((2, 8, 4),)
    assert cfg.agent.hidden == (16,)


def test_load_config_yaml(tmp_path):
    path = tmp_path / "lab.yaml"
    path.write_text(
        "version: 2\n"
        "ofdm:\n"
        "  n_fft: 64\n"
        "  symbol_duration: 0.064\n"
        "  cp_duration: 0.016\n"
        "  n_rb: 5\n"
        "  subcarriers_per_rb: 10\n"
        "scenario:\n"
        "  snr_db: 4.0\n",
        encoding="utf-8",
    )
    cfg = load_config(path)
    assert cfg.version == "2"
    assert cfg.ofdm.n_fft == 64
    assert cfg.scenario.snr_db == 4.0
    # untouched sections keep their defaults
    assert cfg.bench == AppConfig().bench


def test_load_config_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("", encoding="utf-8")
    assert load_config(path) == AppConfig()


def test_bench_params_validation():
    with pytest.raises(ValueError, match="episodes per sweep point"):
        BenchParams(episodes_per_point=1)
    with pytest.raises(ValueError, match="curve_window"):
        BenchParams(curve_window=0)
