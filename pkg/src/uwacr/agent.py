"""Actor-critic access agent.

The actor maps one observation (beacon CQI vector + complex spectrum
snapshot) to the two-column action: an RB probability column and a
nonnegative rate column. Exploration samples the RB from the probability
head and perturbs the executed rate with decaying Gaussian noise; the
update is a likelihood-ratio policy gradient with GAE advantages and a
separately trained value baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .envsim import ActionMatrix, UWAEnv
from .nn import Adam, TwoStreamNet, sigmoid, softmax, softplus
from .sensing import Observation

__all__ = [
    "AgentParams",
    "Agent",
    "SampleInfo",
    "EpisodeBatch",
    "compute_gae",
    "rollout",
    "train",
    "save_agent",
    "load_agent",
]

MAX_PARAMETERS = 100_000


@dataclass(frozen=True)
class AgentParams:
    """Network shape and optimization hyperparameters."""

    conv: tuple[tuple[int, int, int], ...] = ((8, 8, 4), (8, 4, 2))
    hidden: tuple[int, ...] = (64, 64)
    actor_lr: float = 3e-3
    critic_lr: float = 1e-2
    gamma: float = 0.95
    lam: float = 0.95
    entropy_coef: float = 0.0
    noise_scale: float = 0.5
    noise_decay: float = 0.97
    noise_floor: float = 0.02
    rate_bias_init: float = 0.0      # pre-softplus bias of the rate head at build time
    center_advantages: bool = True
    max_grad_norm: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.lam <= 1.0):
            raise ValueError("gamma and lam must lie in [0, 1]")
        if self.noise_scale < 0 or self.noise_floor < 0:
            raise ValueError("noise scales must be nonnegative")
        if not (0.0 < self.noise_decay <= 1.0):
            raise ValueError("noise_decay must be in (0, 1]")


@dataclass
class SampleInfo:
    rb: int
    u_raw: float       # executed-rate sample before the nonnegativity clamp
    sigma: float
    logp: float


@dataclass
class EpisodeBatch:
    side: np.ndarray     # (T, 5*n_rb) preprocessed CQI/energy features
    signal: np.ndarray   # (T, 2, n_sens) normalized spectrum
    rb: np.ndarray       # (T,) int sampled RB (0 where masked out)
    u_raw: np.ndarray    # (T,) executed-rate samples
    sigma: np.ndarray    # (T,) exploration scales
    reward: np.ndarray   # (T,)
    mask: np.ndarray     # (T,) bool, False where the step was skipped
    success: np.ndarray  # (T,) bool
    throughput: np.ndarray  # (T,)


def compute_gae(rewards: np.ndarray, values: np.ndarray, gamma: float, lam: float) -> np.ndarray:
    """Generalized advantage estimates over one episode; terminal value 0."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if rewards.shape != values.shape or rewards.ndim != 1:
        raise ValueError("rewards and values must be equal-length vectors")
    adv = np.zeros_like(rewards)
    acc = 0.0
    next_value = 0.0
    for t in range(rewards.size - 1, -1, -1):
        delta = rewards[t] + gamma * next_value - values[t]
        acc = delta + gamma * lam * acc
        adv[t] = acc
        next_value = values[t]
    return adv


SIDE_FEATURES_PER_RB = 5


def observation_features(obs: Observation) -> tuple[np.ndarray, np.ndarray]:
    """(side, signal) feature pair.

    The side vector stacks five per-RB views: log-compressed CQI, its
    within-observation z-score, log-compressed listening-window energy
    (median-normalized so the scale is preset-independent), that energy's
    z-score, and the plug-in rate implied by the CQI after removing the
    estimator's unit noise bias.  The z-score pairs expose cross-band
    ordering to a linear readout, and the plug-in rate puts the rate head's
    natural operating point one linear map away.  Carrying CQI and window
    energy together matters because they disagree on purpose: an interfered
    band inflates the pilot-derived CQI while also lighting up the listening
    window.  The signal matrix is the RMS-normalized spectrum with re/im as
    channels.
    """
    cqi = np.asarray(obs.cqi, dtype=float)
    logc = np.log1p(cqi)
    zc = (logc - logc.mean()) / (logc.std() + 1e-9)
    if obs.band_energy is not None:
        loge = np.log1p(obs.band_energy / (np.median(obs.band_energy) + 1e-300))
        ze = (loge - loge.mean()) / (loge.std() + 1e-9)
    else:
        loge = np.zeros_like(logc)
        ze = np.zeros_like(logc)
    implied = np.log2(1.0 + np.maximum(cqi - 1.0, 0.0))
    side = np.concatenate([logc, zc, loge, ze, implied])
    spec = np.asarray(obs.spectrum, dtype=float)
    rms = np.sqrt(np.mean(spec * spec))
    signal = (spec / (rms + 1e-12)).T
    return side, signal


class Agent:
    """Two independent networks over a shared feature map: the actor with
    RB-logit and raw-rate heads, and a scalar critic."""

    def __init__(self, n_rb: int, n_sens: int, params: AgentParams):
        self.n_rb = n_rb
        self.n_sens = n_sens
        self.side_dim = SIDE_FEATURES_PER_RB * n_rb
        self.hp = params
        rng = np.random.default_rng(params.seed)
        self.actor = TwoStreamNet(
            side_dim=self.side_dim, in_channels=2, in_length=n_sens,
            conv=params.conv, hidden=params.hidden,
            head_dims=(n_rb, n_rb), rng=rng,
        )
        self.critic = TwoStreamNet(
            side_dim=self.side_dim, in_channels=2, in_length=n_sens,
            conv=params.conv, hidden=params.hidden,
            head_dims=(1,), rng=rng,
        )
        if params.rate_bias_init != 0.0:
            # start the rate regression near the expected output scale
            self.actor.params.get("head1_b")[:] = params.rate_bias_init
        total = self.actor.params.size + self.critic.params.size
        if total > MAX_PARAMETERS:
            raise ValueError(f"{total} parameters exceed the {MAX_PARAMETERS} budget")
        self.opt_actor = Adam(self.actor.params.size, params.actor_lr)
        self.opt_critic = Adam(self.critic.params.size, params.critic_lr)
        self.rejected_updates = 0

    # -- inference -----------------------------------------------------------

    def policy(self, side: np.ndarray, signal: np.ndarray):
        """Batched (probs, mean_rates) plus raw heads and cache for backprop."""
        heads, cache = self.actor.forward(side, signal)
        logits, rate_raw = heads
        return softmax(logits, axis=1), softplus(rate_raw), logits, rate_raw, cache

    def value(self, side: np.ndarray, signal: np.ndarray):
        heads, cache = self.critic.forward(side, signal)
        return heads[0][:, 0], cache

    def action_matrix(self, obs: Observation) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic (probs, rates) for one observation."""
        side, signal = observation_features(obs)
        probs, rates, _, _, _ = self.policy(side[None], signal[None])
        return probs[0], rates[0]

    def sample_action(self, obs: Observation, rng: np.random.Generator,
                      sigma: float) -> tuple[ActionMatrix, SampleInfo]:
        probs, rates = self.action_matrix(obs)
        rb = int(rng.choice(self.n_rb, p=probs))
        u_raw = float(rates[rb] + sigma * rng.standard_normal()) if sigma > 0 else float(rates[rb])
        executed = rates.copy()
        executed[rb] = max(u_raw, 0.0)
        logp = float(np.log(probs[rb]))
        if sigma > 0:
            logp += -0.5 * ((u_raw - rates[rb]) / sigma) ** 2 - np.log(sigma * np.sqrt(2 * np.pi))
        action = ActionMatrix(probs, executed, rb_override=rb, raw_rates=rates.copy())
        return action, SampleInfo(rb=rb, u_raw=u_raw, sigma=sigma, logp=logp)

    def greedy_action(self, obs: Observation) -> ActionMatrix:
        """Deterministic action: most probable RB, estimated rates as-is."""
        probs, rates = self.action_matrix(obs)
        rb = int(np.argmax(probs))
        return ActionMatrix(probs, rates, rb_override=rb, raw_rates=rates.copy())

    # -- learning --------------------------------------------------------------

    def gradients(self, batch: EpisodeBatch) -> dict:
        """Analytic policy and value gradients for one episode batch.

        The actor loss is the negated likelihood-ratio objective
        -mean(adv * log pi(a|s)) minus an optional entropy bonus, with the
        advantages treated as constants; the critic loss is the squared
        error against frozen GAE return targets. Both gradients are exact
        backpropagation through those scalars.
        """
        hp = self.hp
        T = batch.reward.size
        mask = batch.mask.astype(bool)
        n_act = int(mask.sum())

        values, critic_cache = self.value(batch.side, batch.signal)
        adv = compute_gae(batch.reward, values, hp.gamma, hp.lam)
        target = adv + values
        adv_used = adv.copy()
        if hp.center_advantages and n_act > 0:
            adv_used[mask] -= adv_used[mask].mean()

        probs, mean_rates, logits, rate_raw, actor_cache = self.policy(batch.side, batch.signal)

        denom = max(n_act, 1)
        glogits = np.zeros_like(logits)
        graw = np.zeros_like(rate_raw)
        entropy = 0.0
        actor_loss = 0.0
        for t in np.flatnonzero(mask):
            a = adv_used[t]
            rb = batch.rb[t]
            logp = float(np.log(probs[t, rb]))
            glogits[t] = a * probs[t] / denom
            glogits[t, rb] -= a / denom
            if batch.sigma[t] > 0:
                sig2 = batch.sigma[t] ** 2
                resid = batch.u_raw[t] - mean_rates[t, rb]
                logp += -0.5 * resid ** 2 / sig2 - 0.5 * np.log(2 * np.pi * sig2)
                graw[t, rb] = -a * (resid / sig2) * sigmoid(rate_raw[t, rb]) / denom
            actor_loss -= a * logp / denom
            if hp.entropy_coef > 0:
                logps = np.log(probs[t])
                h = -float(np.dot(probs[t], logps))
                entropy += h / denom
                actor_loss -= hp.entropy_coef * h / denom
                glogits[t] += hp.entropy_coef * probs[t] * (logps + h) / denom
        grad_actor = self.actor.backward(actor_cache, [glogits, graw])

        gvalue = (2.0 * (values - target) / T)[:, None]
        grad_critic = self.critic.backward(critic_cache, [gvalue])

        return {
            "grad_actor": grad_actor,
            "grad_critic": grad_critic,
            "actor_loss": float(actor_loss),
            "critic_loss": float(np.mean((values - target) ** 2)),
            "critic_target": target,
            "values": values,
            "advantages": adv,
            "advantages_used": adv_used,
            "entropy": float(entropy),
            "n_actionable": n_act,
        }

    def update(self, batch: EpisodeBatch) -> dict:
        hp = self.hp
        g = self.gradients(batch)
        grad_actor, grad_critic = g["grad_actor"], g["grad_critic"]

        if not (np.all(np.isfinite(grad_actor)) and np.all(np.isfinite(grad_critic))):
            self.rejected_updates += 1
            return {"applied": False, "rejected": self.rejected_updates}

        actor_norm = float(np.linalg.norm(grad_actor))
        critic_norm = float(np.linalg.norm(grad_critic))
        if hp.max_grad_norm > 0:
            if actor_norm > hp.max_grad_norm:
                grad_actor = grad_actor * (hp.max_grad_norm / actor_norm)
            if critic_norm > hp.max_grad_norm:
                grad_critic = grad_critic * (hp.max_grad_norm / critic_norm)
        self.opt_actor.step(self.actor.params.vector, grad_actor)
        self.opt_critic.step(self.critic.params.vector, grad_critic)

        return {
            "applied": True,
            "policy_loss": g["actor_loss"],
            "critic_loss": g["critic_loss"],
            "actor_grad_norm": actor_norm,
            "critic_grad_norm": critic_norm,
            "entropy": g["entropy"],
            "adv_std": float(g["advantages"].std()),
        }


def rollout(env: UWAEnv, agent: Agent, scene_seed: int,
            rng: np.random.Generator | None = None,
            sigma: float = 0.0, greedy: bool = False) -> tuple[EpisodeBatch, dict]:
    """Run one episode; returns the training batch and summary statistics."""
    obs = env.reset(seed=scene_seed)
    horizon = env.scenario.horizon
    side_rows, signal_rows = [], []
    rb = np.zeros(horizon, dtype=int)
    u_raw = np.zeros(horizon)
    sig = np.zeros(horizon)
    reward = np.zeros(horizon)
    mask = np.zeros(horizon, dtype=bool)
    success = np.zeros(horizon, dtype=bool)
    throughput = np.zeros(horizon)
    regret = np.zeros(horizon)
    for t in range(horizon):
        side, signal = observation_features(obs)
        side_rows.append(side)
        signal_rows.append(signal)
        if greedy:
            action = agent.greedy_action(obs)
            info = SampleInfo(rb=action.rb_override, u_raw=float(action.rates[action.rb_override]),
                              sigma=0.0, logp=0.0)
        else:
            action, info = agent.sample_action(obs, rng, sigma)
        out = env.step(action)
        if not out.skipped:
            rb[t] = info.rb
            u_raw[t] = info.u_raw
            sig[t] = info.sigma
            mask[t] = True
            success[t] = out.success
            throughput[t] = out.throughput
            best = float(np.max(out.truth.v_rate))
            regret[t] = best - out.throughput
        reward[t] = out.reward
        obs = out.observation
    batch = EpisodeBatch(
        side=np.asarray(side_rows), signal=np.asarray(signal_rows),
        rb=rb, u_raw=u_raw, sigma=sig, reward=reward, mask=mask,
        success=success, throughput=throughput,
    )
    n_act = max(int(mask.sum()), 1)
    stats = {
        "reward_mean": float(reward.mean()),
        "success_rate": float(success.sum() / n_act),
        "throughput_mean": float(throughput[mask].mean()) if mask.any() else 0.0,
        "regret_mean": float(regret[mask].mean()) if mask.any() else 0.0,
        "skipped_steps": int((~mask).sum()),
    }
    return batch, stats


def train(env: UWAEnv, agent: Agent, n_episodes: int, seed: int = 0,
          plateau_window: int = 25, plateau_patience: int | None = None,
          plateau_tol: float = 1e-3, log=None) -> list[dict]:
    """Per-episode policy-gradient training. Returns one history row per
    episode; stops early when the trailing reward mean stops improving
    (only if plateau_patience is set)."""
    hp = agent.hp
    sample_rng = np.random.default_rng(seed)
    history: list[dict] = []
    best_trailing = -np.inf
    stale = 0
    for ep in range(n_episodes):
        sigma = max(hp.noise_floor, hp.noise_scale * hp.noise_decay ** ep)
        batch, stats = rollout(env, agent, scene_seed=seed * 1_000_003 + ep,
                               rng=sample_rng, sigma=sigma)
        diag = agent.update(batch)
        row = {"episode": ep, "sigma": sigma, **stats, **diag}
        history.append(row)
        if log is not None:
            log(row)
        if plateau_patience is not None and ep + 1 >= 2 * plateau_window:
            trailing = float(np.mean([r["reward_mean"] for r in history[-plateau_window:]]))
            if trailing > best_trailing + plateau_tol:
                best_trailing = trailing
                stale = 0
            else:
                stale += 1
                if stale >= plateau_patience:
                    row["stopped_early"] = True
                    break
    return history


def save_agent(agent: Agent, path) -> None:
    meta = {
        "format_version": 1,
        "n_rb": agent.n_rb,
        "n_sens": agent.n_sens,
        "params": {
            "conv": [list(c) for c in agent.hp.conv],
            "hidden": list(agent.hp.hidden),
            "actor_lr": agent.hp.actor_lr,
            "critic_lr": agent.hp.critic_lr,
            "gamma": agent.hp.gamma,
            "lam": agent.hp.lam,
            "entropy_coef": agent.hp.entropy_coef,
            "noise_scale": agent.hp.noise_scale,
            "noise_decay": agent.hp.noise_decay,
            "noise_floor": agent.hp.noise_floor,
            "center_advantages": agent.hp.center_advantages,
            "max_grad_norm": agent.hp.max_grad_norm,
            "seed": agent.hp.seed,
        },
    }
    np.savez_compressed(
        path,
        actor=agent.actor.params.vector,
        critic=agent.critic.params.vector,
        actor_m=agent.opt_actor.m, actor_v=agent.opt_actor.v,
        critic_m=agent.opt_critic.m, critic_v=agent.opt_critic.v,
        opt_t=np.array([agent.opt_actor.t, agent.opt_critic.t]),
        meta=np.array(json.dumps(meta)),
    )


def load_agent(path) -> Agent:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        p = meta["params"]
        params = AgentParams(
            conv=tuple(tuple(c) for c in p["conv"]),
            hidden=tuple(p["hidden"]),
            actor_lr=p["actor_lr"], critic_lr=p["critic_lr"],
            gamma=p["gamma"], lam=p["lam"],
            entropy_coef=p["entropy_coef"],
            noise_scale=p["noise_scale"], noise_decay=p["noise_decay"],
            noise_floor=p["noise_floor"],
            center_advantages=p["center_advantages"],
            max_grad_norm=p["max_grad_norm"], seed=p["seed"],
        )
        agent = Agent(meta["n_rb"], meta["n_sens"], params)
        agent.actor.params.set_vector(data["actor"])
        agent.critic.params.set_vector(data["critic"])
        agent.opt_actor.m = data["actor_m"].copy()
        agent.opt_actor.v = data["actor_v"].copy()
        agent.opt_critic.m = data["critic_m"].copy()
        agent.opt_critic.v = data["critic_v"].copy()
        agent.opt_actor.t, agent.opt_critic.t = (int(v) for v in data["opt_t"])
    return agent
