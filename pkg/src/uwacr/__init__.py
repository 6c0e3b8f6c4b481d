"""Desk-scale simulation lab for cognitive access in underwater acoustic
OFDMA networks: channel synthesis, asynchronous-interference physics,
omniscient ground truth, spectrum sensing, an actor-critic access agent,
heuristic baselines, and a benchmark harness."""

from .agent import Agent, AgentParams, compute_gae, load_agent, save_agent, train
from .baselines import EpsilonPolicyConfig, calibrate_epsilon, cqi_epsilon_decide, ed_epsilon_decide
from .chanmodel import (
    AcousticParams,
    ChannelImpulseResponse,
    DiscreteChannel,
    Geometry3D,
    discretize,
    generate_cir,
    parse_arrival_file,
    thorp_absorption_db_per_km,
)
from .config import AppConfig, default_config, load_config, smoke_config
from .envsim import ActionMatrix, RewardParams, ScenarioParams, StepOutcome, UWAEnv
from .oracle import GroundTruth, SinrReport, compute_cqi, ground_truth, monte_carlo_sinr, sinr_report
from .phy import InterfererSpec, OfdmParams
from .sensing import Observation, SensingConfig, beacon_cqi, energy_detect, observe_spectrum

__version__ = "0.1.0"

__all__ = [
    "Agent", "AgentParams", "compute_gae", "load_agent", "save_agent", "train",
    "EpsilonPolicyConfig", "calibrate_epsilon", "cqi_epsilon_decide", "ed_epsilon_decide",
    "AcousticParams", "ChannelImpulseResponse", "DiscreteChannel", "Geometry3D",
    "discretize", "generate_cir", "parse_arrival_file", "thorp_absorption_db_per_km",
    "AppConfig", "default_config", "load_config", "smoke_config",
    "ActionMatrix", "RewardParams", "ScenarioParams", "StepOutcome", "UWAEnv",
    "GroundTruth", "SinrReport", "compute_cqi", "ground_truth", "monte_carlo_sinr", "sinr_report",
    "InterfererSpec", "OfdmParams",
    "Observation", "SensingConfig", "beacon_cqi", "energy_detect", "observe_spectrum",
    "__version__",
]
