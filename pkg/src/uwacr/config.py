"""Run configuration: one document aggregating every parameter group.

YAML files mirror the dataclass fields section by section; unknown keys
are hard errors naming the offending path, so typos never silently fall
back to defaults. The resolved dictionary (including derived grid
quantities) is fingerprinted into result files for provenance.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import yaml

from .agent import AgentParams
from .chanmodel import AcousticParams
from .envsim import RewardParams, ScenarioParams
from .phy import OfdmParams
from .sensing import SensingConfig

__all__ = [
    "BenchParams",
    "AppConfig",
    "load_config",
    "config_from_dict",
    "config_fingerprint",
    "default_config",
    "smoke_config",
]


@dataclass(frozen=True)
class BenchParams:
    """Evaluation sweep settings."""

    snr_grid: tuple[float, ...] = (-4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0)
    episodes_per_point: int = 24
    eval_seed: int = 1234
    train_episodes: int = 300
    curve_window: int = 25

    def __post_init__(self):
        if self.episodes_per_point < 2:
            raise ValueError("need at least 2 episodes per sweep point")
        if self.curve_window < 1:
            raise ValueError("curve_window must be >= 1")


@dataclass(frozen=True)
class AppConfig:
    version: str = "1"
    ofdm: OfdmParams = field(default_factory=OfdmParams)
    acoustic: AcousticParams = field(default_factory=AcousticParams)
    sensing: SensingConfig = field(default_factory=SensingConfig)
    scenario: ScenarioParams = field(default_factory=ScenarioParams)
    reward: RewardParams = field(default_factory=RewardParams)
    agent: AgentParams = field(default_factory=AgentParams)
    bench: BenchParams = field(default_factory=BenchParams)


_SECTIONS = {
    "ofdm": OfdmParams,
    "acoustic": AcousticParams,
    "sensing": SensingConfig,
    "scenario": ScenarioParams,
    "reward": RewardParams,
    "agent": AgentParams,
    "bench": BenchParams,
}


def _coerce(value):
    if isinstance(value, list):
        return tuple(_coerce(v) for v in value)
    return value


def _build_section(cls, overrides: dict, path: str):
    valid = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in overrides.items():
        if key not in valid:
            raise ValueError(f"unknown key {path}.{key}")
        kwargs[key] = _coerce(value)
    return cls(**kwargs)


def config_from_dict(doc: dict) -> AppConfig:
    if not isinstance(doc, dict):
        raise ValueError("config document must be a mapping")
    kwargs = {}
    for key, value in doc.items():
        if key == "version":
            kwargs["version"] = str(value)
        elif key in _SECTIONS:
            if not isinstance(value, dict):
                raise ValueError(f"section {key} must be a mapping")
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        else:
            raise ValueError(f"unknown key {key}")
    return AppConfig(**kwargs)


def load_config(path) -> AppConfig:
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return config_from_dict(doc if doc is not None else {})


def resolved_dict(cfg: AppConfig) -> dict:
    """Plain-data view of the config plus the derived grid quantities."""
    out = {"version": cfg.version}
    for name in _SECTIONS:
        out[name] = dataclasses.asdict(getattr(cfg, name))
    out["derived"] = {
        "sample_period": cfg.ofdm.sample_period,
        "subcarrier_spacing": cfg.ofdm.subcarrier_spacing,
        "n_cp": cfg.ofdm.n_cp,
        "n_sym": cfg.ofdm.n_sym,
        "rb_bins_shifted": [list(map(int, b)) for b in cfg.ofdm.rb_bins_shifted],
    }
    return out


def config_fingerprint(cfg: AppConfig) -> str:
    blob = json.dumps(resolved_dict(cfg), sort_keys=True, default=float)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def default_config() -> AppConfig:
    return AppConfig()


def smoke_config() -> AppConfig:
    """Scaled-down preset for fast end-to-end runs: a 64-point grid, one
    static interferer, and a small network."""
    return AppConfig(
        ofdm=OfdmParams(
            n_fft=64,
            symbol_duration=0.064,
            cp_duration=0.016,
            n_rb=5,
            subcarriers_per_rb=10,
        ),
        acoustic=AcousticParams(
            max_delay_spread=0.001,
            path_count_model="fixed",
            path_count_param=0.0,
        ),
        sensing=SensingConfig(n_sens=64, beacon_symbols=4),
        scenario=ScenarioParams(
            n_nodes=2,
            active_min=1,
            active_max=1,
            snr_db=20.0,
            horizon=16,
            static_channels=True,
            synchronized=True,
            drift_speed=0.0,
        ),
        reward=RewardParams(w5=0.05, w6=0.05),
        agent=AgentParams(
            conv=((4, 8, 4), (4, 4, 2)),
            hidden=(32, 32),
        ),
        bench=BenchParams(train_episodes=200),
    )
