"""Heuristic access policies and their backoff calibration.

Both baselines read the same observation the agent gets. The CQI policy
ranks RBs by the beacon CQI (which interference inflates, so the top rank
is actively misleading in crowded water); the energy-detect policy picks
the quietest RB from the spectrum snapshot. Both back their rate off the
CQI-implied ceiling by a factor (1 - epsilon), and epsilon is calibrated
offline so that transmissions on genuinely free RBs fit under capacity at
a target probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envsim import ActionMatrix, UWAEnv
from .sensing import energy_detect

__all__ = [
    "EpsilonPolicyConfig",
    "cqi_epsilon_decide",
    "ed_epsilon_decide",
    "decision_to_action",
    "collect_decision_records",
    "offline_success",
    "calibrate_epsilon",
]

PROB_FLOOR = 1e-3


@dataclass(frozen=True)
class EpsilonPolicyConfig:
    """k: 1-based CQI order statistic to pick (k=1 is the largest); None
    draws a uniform random rank each decision."""

    epsilon: float = 0.37
    k: int | None = None

    def __post_init__(self):
        if not (0.0 <= self.epsilon < 1.0):
            raise ValueError("epsilon must lie in [0, 1)")
        if self.k is not None and self.k < 1:
            raise ValueError("k is a 1-based rank")


def _rate_from_cqi(cqi_value: float, epsilon: float) -> float:
    return (1.0 - epsilon) * float(np.log2(1.0 + max(cqi_value, 0.0)))


def cqi_epsilon_decide(cqi: np.ndarray, cfg: EpsilonPolicyConfig,
                       rng: np.random.Generator | None = None) -> tuple[int, float]:
    """(rb, rate) from the CQI ranking."""
    cqi = np.asarray(cqi, dtype=float)
    order = np.argsort(-cqi, kind="stable")
    if cfg.k is None:
        if rng is None:
            raise ValueError("random-rank policy needs an rng")
        rank = int(rng.integers(cqi.size))
    else:
        if cfg.k > cqi.size:
            raise ValueError("rank exceeds the RB count")
        rank = cfg.k - 1
    rb = int(order[rank])
    return rb, _rate_from_cqi(cqi[rb], cfg.epsilon)


def ed_epsilon_decide(energy: np.ndarray, cqi: np.ndarray,
                      epsilon: float) -> tuple[int, float]:
    """(rb, rate): quietest RB by in-band energy, rate off that RB's CQI."""
    cqi = np.asarray(cqi, dtype=float)
    energy = np.asarray(energy, dtype=float)
    if cqi.shape != energy.shape:
        raise ValueError("cqi and energy must have matching shapes")
    rb = int(np.argmin(energy))
    return rb, _rate_from_cqi(cqi[rb], epsilon)


def decision_to_action(rb: int, rate: float, n_rb: int) -> ActionMatrix:
    """Wrap a hard (rb, rate) decision as an action matrix. The probability
    column gets a small floor off the chosen RB so log terms stay finite."""
    probs = np.full(n_rb, PROB_FLOOR)
    probs[rb] = 1.0 - PROB_FLOOR * (n_rb - 1)
    rates = np.zeros(n_rb)
    rates[rb] = rate
    return ActionMatrix(probs, rates, rb_override=rb)


def collect_decision_records(env: UWAEnv, n_episodes: int, seed: int) -> list[dict]:
    """Replay scripted episodes once, recording everything an epsilon policy
    needs to be evaluated offline: the observation summaries, a pre-drawn
    random rank, and the ground truth. Valid because the scene evolution
    ignores the agent's actions."""
    rng = np.random.default_rng(seed)
    dummy = decision_to_action(0, 0.0, env.ofdm.n_rb)
    records = []
    for ep in range(n_episodes):
        obs = env.reset(seed=seed * 7_919 + ep)
        for _ in range(env.scenario.horizon):
            truth = env.current_truth()
            if truth.any_free:
                records.append({
                    "cqi": np.asarray(obs.cqi, dtype=float),
                    "energy": energy_detect(obs.spectrum, env.sensing, env.ofdm),
                    "rank": int(rng.integers(env.ofdm.n_rb)),
                    "v_rb": truth.v_rb.copy(),
                    "v_rate": truth.v_rate.copy(),
                })
            obs = env.step(dummy).observation
    return records


def offline_success(records: list[dict], kind: str, epsilon: float,
                    k: int | None = None) -> float:
    """Fraction of free-RB decisions whose rate fits under capacity.

    kind: "cqi" (1-based rank k, or the record's pre-drawn random rank when
    k is None) or "ed" (quietest RB). Conditioning on free RBs isolates the
    rate backoff from the occupancy guess."""
    hits = 0
    free = 0
    for rec in records:
        if kind == "cqi":
            order = np.argsort(-rec["cqi"], kind="stable")
            rb = int(order[k - 1 if k is not None else rec["rank"]])
        elif kind == "ed":
            rb = int(np.argmin(rec["energy"]))
        else:
            raise ValueError(f"unknown policy kind {kind!r}")
        if rec["v_rb"][rb] != 1:
            continue
        free += 1
        if _rate_from_cqi(rec["cqi"][rb], epsilon) <= rec["v_rate"][rb]:
            hits += 1
    if free == 0:
        raise ValueError("no free-RB decisions recorded; cannot calibrate")
    return hits / free


def calibrate_epsilon(env: UWAEnv | None, kind: str, target: float = 0.9,
                      n_episodes: int = 32, seed: int = 0,
                      k: int | None = None,
                      records: list[dict] | None = None) -> tuple[float, float]:
    """Smallest epsilon in [0, 1) whose free-RB fit rate reaches the target,
    found by bisection. Success is exactly nondecreasing in epsilon on a
    fixed record set, since the RB choice never depends on epsilon. Returns
    (epsilon, achieved_success)."""
    if not (0.0 < target < 1.0):
        raise ValueError("target must lie in (0, 1)")
    if records is None:
        if env is None:
            raise ValueError("need an env or a record set")
        records = collect_decision_records(env, n_episodes, seed)
    lo, hi = 0.0, 1.0 - 1e-9
    if offline_success(records, kind, hi, k) < target:
        raise ValueError(f"target {target} unreachable for epsilon in [0, 1)")
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if offline_success(records, kind, mid, k) >= target:
            hi = mid
        else:
            lo = mid
    return hi, offline_success(records, kind, hi, k)
