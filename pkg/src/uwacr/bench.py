"""Evaluation harness: common policy interface, SNR sweeps, reports.

A policy is any callable (observation, env) -> ActionMatrix; adapters wrap
the learned agent, the heuristics, an omniscient oracle, and a random
picker. Sweep results go to CSV with per-point 95% confidence intervals
and the config fingerprint, so plots stay traceable to their settings.
"""

from __future__ import annotations

import csv
import dataclasses

import numpy as np

from .agent import Agent
from .baselines import EpsilonPolicyConfig, cqi_epsilon_decide, decision_to_action, ed_epsilon_decide
from .config import AppConfig, config_fingerprint
from .envsim import UWAEnv, reward_terms
from .oracle import monte_carlo_sinr, sinr_report
from .sensing import energy_detect

__all__ = [
    "build_env",
    "build_agent",
    "agent_policy",
    "cqi_policy",
    "ed_policy",
    "oracle_policy",
    "random_policy",
    "evaluate_policy",
    "run_sweep",
    "write_sweep_csv",
    "emit_training_curves",
    "sinr_check",
    "reward_term_magnitudes",
]


def build_env(cfg: AppConfig, snr_db: float | None = None) -> UWAEnv:
    scenario = cfg.scenario
    if snr_db is not None:
        scenario = dataclasses.replace(scenario, snr_db=snr_db)
    return UWAEnv(cfg.ofdm, cfg.acoustic, cfg.sensing, scenario, cfg.reward)


def build_agent(cfg: AppConfig) -> Agent:
    return Agent(cfg.ofdm.n_rb, cfg.sensing.n_sens, cfg.agent)


# -- policy adapters ----------------------------------------------------------


def agent_policy(agent: Agent):
    def decide(obs, env):
        return agent.greedy_action(obs)
    return decide


def cqi_policy(cfg: EpsilonPolicyConfig, seed: int = 0):
    rng = np.random.default_rng(seed)

    def decide(obs, env):
        rb, rate = cqi_epsilon_decide(obs.cqi, cfg, rng)
        return decision_to_action(rb, rate, env.ofdm.n_rb)
    return decide


def ed_policy(epsilon: float):
    def decide(obs, env):
        energy = energy_detect(obs.spectrum, env.sensing, env.ofdm)
        rb, rate = ed_epsilon_decide(energy, obs.cqi, epsilon)
        return decision_to_action(rb, rate, env.ofdm.n_rb)
    return decide


def oracle_policy():
    """Omniscient reference: ideal RB, true achievable rate."""
    def decide(obs, env):
        truth = env.current_truth()
        if not truth.any_free:
            return decision_to_action(0, 0.0, env.ofdm.n_rb)
        rb = truth.best_rb
        return decision_to_action(rb, float(truth.v_rate[rb]), env.ofdm.n_rb)
    return decide


def random_policy(epsilon: float = 0.5, seed: int = 0):
    rng = np.random.default_rng(seed)

    def decide(obs, env):
        rb = int(rng.integers(env.ofdm.n_rb))
        rate = (1.0 - epsilon) * float(np.log2(1.0 + max(obs.cqi[rb], 0.0)))
        return decision_to_action(rb, rate, env.ofdm.n_rb)
    return decide


# -- evaluation ----------------------------------------------------------------


def evaluate_policy(env: UWAEnv, policy, n_episodes: int, seed: int = 0) -> dict:
    """Per-episode means of reward, success, and throughput (spectral
    efficiency proxy), plus their 95% confidence intervals."""
    ep_reward = np.zeros(n_episodes)
    ep_success = np.zeros(n_episodes)
    ep_through = np.zeros(n_episodes)
    for ep in range(n_episodes):
        obs = env.reset(seed=seed + ep)
        rewards, succ, thr, n_act = [], 0, [], 0
        for _ in range(env.scenario.horizon):
            out = env.step(policy(obs, env))
            rewards.append(out.reward)
            if not out.skipped:
                n_act += 1
                succ += int(out.success)
                thr.append(out.throughput)
            obs = out.observation
        ep_reward[ep] = np.mean(rewards)
        ep_success[ep] = succ / max(n_act, 1)
        ep_through[ep] = np.mean(thr) if thr else 0.0

    def ci(x):
        return 1.96 * float(np.std(x, ddof=1)) / np.sqrt(len(x)) if len(x) > 1 else 0.0

    return {
        "episodes": n_episodes,
        "reward_mean": float(ep_reward.mean()), "reward_ci95": ci(ep_reward),
        "success_mean": float(ep_success.mean()), "success_ci95": ci(ep_success),
        "se_mean": float(ep_through.mean()), "se_ci95": ci(ep_through),
        "per_episode_se": ep_through,
    }


def run_sweep(cfg: AppConfig, policies: dict, out_path=None,
              episodes_per_point: int | None = None) -> list[dict]:
    bench = cfg.bench
    n_eps = episodes_per_point if episodes_per_point is not None else bench.episodes_per_point
    fingerprint = config_fingerprint(cfg)
    rows = []
    if n_eps < 1:
        if out_path is not None:
            write_sweep_csv(rows, out_path)
        return rows
    for snr in bench.snr_grid:
        env = build_env(cfg, snr_db=snr)
        for name, policy in policies.items():
            res = evaluate_policy(env, policy, n_eps, seed=bench.eval_seed)
            rows.append({
                "snr_db": float(snr),
                "policy": name,
                "episodes": res["episodes"],
                "se_mean": res["se_mean"], "se_ci95": res["se_ci95"],
                "success_mean": res["success_mean"], "success_ci95": res["success_ci95"],
                "reward_mean": res["reward_mean"], "reward_ci95": res["reward_ci95"],
                "config_hash": fingerprint,
            })
    if out_path is not None:
        write_sweep_csv(rows, out_path)
    return rows


_SWEEP_FIELDS = [
    "snr_db", "policy", "episodes",
    "se_mean", "se_ci95", "success_mean", "success_ci95",
    "reward_mean", "reward_ci95", "config_hash",
]


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_SWEEP_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in _SWEEP_FIELDS})


def emit_training_curves(history: list[dict], path, window: int = 25,
                         config_hash: str = "") -> None:
    """Training history to CSV with a trailing moving average of the reward."""
    fields = ["episode", "reward_mean", "reward_trailing", "success_rate",
              "throughput_mean", "sigma", "config_hash"]
    rewards = [row["reward_mean"] for row in history]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for i, row in enumerate(history):
            lo = max(0, i - window + 1)
            writer.writerow({
                "episode": row["episode"],
                "reward_mean": row["reward_mean"],
                "reward_trailing": float(np.mean(rewards[lo:i + 1])),
                "success_rate": row["success_rate"],
                "throughput_mean": row["throughput_mean"],
                "sigma": row["sigma"],
                "config_hash": config_hash,
            })


def sinr_check(cfg: AppConfig, seed: int = 0, n_trials: int = 4000) -> dict:
    """Cross-validate the closed-form per-subcarrier SINR against brute-force
    synthesis on one randomly drawn scene. Returns the worst and mean relative
    disagreement over the victim's allocation."""
    env = build_env(cfg)
    env.reset(seed=seed)
    alloc = env.ofdm.rb_bins[0]
    specs = env._specs(at_agent=False)
    report = sinr_report(env._direct, alloc, cfg.scenario.tx_power, specs,
                         env.sigma2, env.ofdm)
    closed = report.sinr[0]
    mc = monte_carlo_sinr(env._direct, alloc, cfg.scenario.tx_power, specs,
                          env.sigma2, env.ofdm, n_trials=n_trials, seed=seed + 1)
    rel = np.abs(mc - closed) / closed
    return {
        "alloc": [int(b) for b in alloc],
        "closed_form": [float(v) for v in closed],
        "monte_carlo": [float(v) for v in mc],
        "max_rel_err": float(rel.max()),
        "mean_rel_err": float(rel.mean()),
        "n_trials": n_trials,
    }


def reward_term_magnitudes(env: UWAEnv, n_episodes: int = 8, seed: int = 0) -> dict:
    """Typical magnitudes of the reward ingredients under a random policy;
    input for choosing mixing weights."""
    policy = random_policy(seed=seed)
    r_rb, r_rate, chosen = [], [], []
    for ep in range(n_episodes):
        obs = env.reset(seed=seed + 31 * ep)
        for _ in range(env.scenario.horizon):
            truth = env.current_truth()
            action = policy(obs, env)
            if truth.any_free:
                a, b, c = reward_terms(action, truth, env.reward)
                r_rb.append(a)
                r_rate.append(b)
                chosen.append(c)
            obs = env.step(action).observation
    return {
        "rb_term_mean_abs": float(np.mean(np.abs(r_rb))) if r_rb else 0.0,
        "rate_term_mean_abs": float(np.mean(np.abs(r_rate))) if r_rate else 0.0,
        "chosen_rate_mean": float(np.mean(chosen)) if chosen else 0.0,
        "samples": len(r_rb),
    }
