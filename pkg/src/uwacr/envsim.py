"""Cognitive-access episode simulator.

One agent node shares a box of water with scripted neighbor nodes and a sink.
Each step the agent hears a beacon and a spectrum snapshot, names an RB
probability column and a rate column, and the simulator judges the extracted
decision against omniscient ground truth. Neighbors hold their RBs for
geometric dwell times, drift through the box, and get fresh channels and
clock offsets every step; the agent's actions never influence them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .chanmodel import AcousticParams, ChannelImpulseResponse, Geometry3D, discretize, generate_cir
from .oracle import BeaconSpec, GroundTruth, default_beacon, ground_truth
from .phy import InterfererSpec, OfdmParams, synthesize_interference_window, synthesize_received
from .sensing import (
    Observation,
    SensingConfig,
    beacon_cqi,
    energy_detect,
    observe_spectrum,
)

__all__ = [
    "ScenarioParams",
    "RewardParams",
    "ActionMatrix",
    "StepOutcome",
    "UWAEnv",
    "select_decision",
    "reward_terms",
    "compute_reward",
    "write_trace",
    "read_trace",
    "outcome_record",
]


@dataclass(frozen=True)
class ScenarioParams:
    """Network scene: who is in the water and how it evolves."""

    n_nodes: int = 5                 # agent + potential interferers
    active_min: int = 1              # interferers active per episode, inclusive range
    active_max: int = 3
    snr_db: float = 6.0              # mean per-subcarrier receive SNR on the direct link
    horizon: int = 64                # steps per episode
    dwell_mean: float = 8.0          # mean steps an interferer keeps its RB
    step_interval: float = 1.0       # seconds of wall-clock per step (drift integration)
    drift_speed: float = 0.5         # m/s node drift magnitude
    box: tuple[float, float, float] = (1000.0, 1000.0, 200.0)
    sink_position: tuple[float, float, float] = (500.0, 500.0, 100.0)
    min_spacing: float = 25.0        # m, placement rejection radius
    tx_power: float = 1.0            # per-subcarrier transmit power, all nodes
    static_channels: bool = False    # hold channels and gaps from reset (calm-water mode)
    synchronized: bool = False       # neighbors symbol-aligned with the victim (gap 0)
    collision_free_start: bool = True

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("need at least the agent node")
        if not (0 <= self.active_min <= self.active_max <= self.n_nodes - 1):
            raise ValueError("active interferer range must fit inside n_nodes - 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.dwell_mean < 1.0:
            raise ValueError("dwell_mean must be >= 1 step")
        for coord, limit in zip(self.sink_position, self.box):
            if not (0.0 <= coord <= limit):
                raise ValueError("sink outside box")


@dataclass(frozen=True)
class RewardParams:
    """Weights of the shaped reward.

    w1: cross-entropy of the RB probability column against the ideal RB.
    w2: MSE of the RB probability column against true availability.
    w3: MSE of the overestimate-zeroed rate column against true rates.
    w4: squared error of the rate estimate at the ideal RB.
    w5, w6: mixing weights of the two auxiliary groups.
    w7: weight of the agent's own rate estimate at its chosen RB.

    gate_throughput_on_success multiplies the w7 term by the realized success
    indicator. With scripted neighbors the reward is otherwise independent of
    the executed RB choice, and a pure likelihood-ratio update would have an
    exactly zero expected gradient for the RB head; the gate is what makes RB
    selection learnable. Turn it off to get the raw estimate-valued term.
    """

    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    w4: float = 1.0
    w5: float = 0.5
    w6: float = 0.5
    w7: float = 1.0
    gate_throughput_on_success: bool = True

    def __post_init__(self):
        for name in ("w1", "w2", "w3", "w4", "w5", "w6", "w7"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.w5 == 0 and self.w6 == 0 and self.w7 == 0:
            raise ValueError("at least one of w5, w6, w7 must be positive")


@dataclass
class ActionMatrix:
    """Two-column action: RB probability vector and nonnegative rate vector.

    rb_override, when set, names the RB the transmitter actually uses (the
    sampled exploration choice); the probability column stays the raw
    distribution so the reward's cross-entropy term remains meaningful.
    raw_rates preserves the pre-clamp exploration sample for log-density
    bookkeeping and plays no role in the environment.
    """

    rb_probs: np.ndarray
    rates: np.ndarray
    rb_override: int | None = None
    raw_rates: np.ndarray | None = None

    def __post_init__(self):
        self.rb_probs = np.asarray(self.rb_probs, dtype=float)
        self.rates = np.asarray(self.rates, dtype=float)
        if self.rb_probs.shape != self.rates.shape or self.rb_probs.ndim != 1:
            raise ValueError("action columns must be equal-length vectors")
        if np.any(self.rb_probs < 0) or abs(self.rb_probs.sum() - 1.0) > 1e-9:
            raise ValueError("rb_probs must be a probability vector")
        if np.any(self.rates < 0):
            raise ValueError("rates must be nonnegative")
        if self.rb_override is not None and not (0 <= self.rb_override < self.rb_probs.size):
            raise ValueError("rb_override out of range")

    def as_matrix(self) -> np.ndarray:
        return np.stack([self.rb_probs, self.rates], axis=1)


def select_decision(a: ActionMatrix) -> tuple[int, float]:
    """Extract (RB, rate): argmax of rates * probs, ties to the lowest index.

    An explicit rb_override (exploration sample) takes precedence.
    """
    rb = a.rb_override if a.rb_override is not None else int(np.argmax(a.rates * a.rb_probs))
    return rb, float(a.rates[rb])


def reward_terms(a: ActionMatrix, truth: GroundTruth, w: RewardParams) -> tuple[float, float, float]:
    """(r_rb, r_rate, chosen_rate_estimate) before mixing.

    Requires at least one free RB (the ideal-RB index is undefined otherwise).
    """
    if not truth.any_free:
        raise ValueError("reward undefined when every RB is occupied")
    n = a.rb_probs.size
    ideal = truth.best_rb
    # guard the w1=0 case: 0 * inf would poison the sum
    if w.w1 > 0:
        ce = -float(np.log(a.rb_probs[ideal])) if a.rb_probs[ideal] > 0 else float("inf")
        ce_term = w.w1 * ce
    else:
        ce_term = 0.0
    mse_rb = float(np.mean((a.rb_probs - truth.v_rb) ** 2))
    r_rb = -ce_term - w.w2 * mse_rb

    clipped = np.where(a.rates > truth.v_rate, 0.0, a.rates)
    mse_rate = float(np.mean((clipped - truth.v_rate) ** 2))
    peak_err = float((a.rates[ideal] - truth.v_rate[ideal]) ** 2)
    r_rate = -w.w3 * mse_rate - w.w4 * peak_err

    chosen = int(np.argmax(a.rates * a.rb_probs))
    assert 0 <= chosen < n
    return r_rb, r_rate, float(a.rates[chosen])


def compute_reward(a: ActionMatrix, truth: GroundTruth, w: RewardParams) -> float:
    """Shaped reward with the chosen-rate term taken at face value (ungated)."""
    r_rb, r_rate, chosen_rate = reward_terms(a, truth, w)
    return w.w5 * r_rb + w.w6 * r_rate + w.w7 * chosen_rate


@dataclass
class StepOutcome:
    """Everything the simulator reveals about one step."""

    reward: float
    success: bool
    throughput: float          # chosen rate on success, else 0
    truth: GroundTruth         # snapshot the decision was judged against
    observation: Observation   # post-advance sensing for the next decision
    skipped: bool = False      # no free RB existed; no transmission attempted
    chosen_rb: int = -1
    chosen_rate: float = 0.0


@dataclass
class _Neighbor:
    node: int
    rb: int
    dwell: int
    gap: int
    to_sink: object = None   # DiscreteChannel
    to_agent: object = None


class UWAEnv:
    """Fixed-horizon episodic simulator. reset() before step()."""

    def __init__(
        self,
        ofdm: OfdmParams,
        acoustic: AcousticParams,
        sensing: SensingConfig,
        scenario: ScenarioParams,
        reward: RewardParams,
        beacon: BeaconSpec | None = None,
    ):
        sensing.validate_against(ofdm)
        if acoustic.max_delay_spread > ofdm.cp_duration + ofdm.sample_period / 2:
            raise ValueError("channel delay spread exceeds the cyclic prefix")
        self.ofdm = ofdm
        self.acoustic = acoustic
        self.sensing = sensing
        self.scenario = scenario
        self.reward = reward
        self.beacon = beacon if beacon is not None else default_beacon(ofdm)
        self.rng: np.random.Generator | None = None
        self.t = -1
        self.done = True
        self.sigma2 = float("nan")
        self._truth_cache: tuple[int, GroundTruth] | None = None

    # -- scene assembly ----------------------------------------------------

    def _place_nodes(self) -> np.ndarray:
        box = np.asarray(self.scenario.box)
        sink = np.asarray(self.scenario.sink_position)
        positions = np.empty((self.scenario.n_nodes, 3))
        placed = [sink]
        for i in range(self.scenario.n_nodes):
            for _ in range(200):
                p = self.rng.uniform(0.0, box)
                if all(np.linalg.norm(p - q) >= self.scenario.min_spacing for q in placed):
                    break
            positions[i] = p
            placed.append(p)
        return positions

    def _draw_channel(self, src: np.ndarray, dst: np.ndarray):
        geom = Geometry3D(tuple(src), tuple(dst), box=self.scenario.box)
        cir = generate_cir(geom, self.acoustic, int(self.rng.integers(1 << 62)))
        return discretize(cir.normalized(), self.ofdm.sample_period, self.ofdm.n_fft)

    def _regen_channels(self) -> None:
        sink = np.asarray(self.scenario.sink_position)
        self._direct = self._draw_channel(self._positions[0], sink)
        for nb in self._neighbors:
            nb.to_sink = self._draw_channel(self._positions[nb.node], sink)
            nb.to_agent = self._draw_channel(self._positions[nb.node], self._positions[0])

    def _resample_gaps(self) -> None:
        for nb in self._neighbors:
            nb.gap = 0 if self.scenario.synchronized else int(self.rng.integers(0, self.ofdm.n_sym))

    def _draw_dwell(self) -> int:
        return int(self.rng.geometric(1.0 / self.scenario.dwell_mean))

    def _occupied_mask(self) -> np.ndarray:
        mask = np.zeros(self.ofdm.n_rb, dtype=bool)
        for nb in self._neighbors:
            mask[nb.rb] = True
        return mask

    def _specs(self, at_agent: bool) -> list:
        return [
            InterfererSpec(
                channel=nb.to_agent if at_agent else nb.to_sink,
                gap=nb.gap,
                alloc=self.ofdm.rb_bins[nb.rb],
                power=self.scenario.tx_power,
                node_id=nb.node,
            )
            for nb in self._neighbors
        ]

    def _sense(self) -> Observation:
        specs = self._specs(at_agent=True)
        # CQI averaged over the pilot symbols of one sensing packet
        estimates = []
        for _ in range(self.sensing.beacon_symbols):
            rx = synthesize_received(
                self._direct, self.beacon.data_symbol(), specs, self.sigma2, self.ofdm, self.rng
            )
            estimates.append(
                beacon_cqi(rx, self.beacon, self.sigma2, self.ofdm, data_power=self.scenario.tx_power)
            )
        cqi = np.mean(estimates, axis=0)
        samples = synthesize_interference_window(
            specs, self.sigma2, self.ofdm, self.rng,
        )
        if self.sensing.sensing_symbols > 1:
            extra = [
                synthesize_interference_window(specs, self.sigma2, self.ofdm, self.rng)
                for _ in range(self.sensing.sensing_symbols - 1)
            ]
            samples = np.concatenate([samples] + extra)
        spectrum = observe_spectrum(samples, self.sensing, self.ofdm)
        energy = energy_detect(spectrum, self.sensing, self.ofdm)
        return Observation(cqi, spectrum, energy)

    # -- episode API ---------------------------------------------------------

    def reset(self, seed: int = 0) -> Observation:
        self.rng = np.random.default_rng(seed)
        sc = self.scenario
        n_active = int(self.rng.integers(sc.active_min, sc.active_max + 1))
        if sc.collision_free_start and n_active > self.ofdm.n_rb:
            raise ValueError(
                f"{n_active} active interferers cannot hold distinct RBs on a {self.ofdm.n_rb}-RB grid"
            )
        self._positions = self._place_nodes()
        self._velocities = np.zeros_like(self._positions)
        if sc.drift_speed > 0:
            direction = self.rng.standard_normal(self._positions.shape)
            direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-12)
            self._velocities = direction * sc.drift_speed
        nodes = self.rng.choice(np.arange(1, sc.n_nodes), size=n_active, replace=False)
        rbs = self.rng.choice(self.ofdm.n_rb, size=n_active, replace=False)
        self._neighbors = [
            _Neighbor(node=int(n), rb=int(r), dwell=self._draw_dwell(), gap=0)
            for n, r in zip(nodes, rbs)
        ]
        self._resample_gaps()
        self._regen_channels()
        diag = np.fft.fft(self._direct.h, self.ofdm.n_fft)
        mean_gain = float(np.mean(np.abs(diag[self.ofdm.occupied_bins]) ** 2))
        self.sigma2 = sc.tx_power * mean_gain / (10.0 ** (sc.snr_db / 10.0))
        self.t = 0
        self.done = False
        self._truth_cache = None
        return self._sense()

    def current_truth(self) -> GroundTruth:
        """Omniscient snapshot for the pending decision (cached per step)."""
        if self.done:
            raise RuntimeError("episode finished; call reset()")
        if self._truth_cache is None or self._truth_cache[0] != self.t:
            truth = ground_truth(
                self._occupied_mask(),
                self._direct,
                self._specs(at_agent=False),
                self.sigma2,
                self.ofdm,
                power=self.scenario.tx_power,
            )
            self._truth_cache = (self.t, truth)
        return self._truth_cache[1]

    def _advance(self) -> None:
        sc = self.scenario
        self.t += 1
        self.done = self.t >= sc.horizon
        if sc.static_channels:
            return
        self._positions = np.clip(
            self._positions + self._velocities * sc.step_interval,
            0.0,
            np.asarray(sc.box),
        )
        taken = self._occupied_mask()
        for nb in self._neighbors:
            nb.dwell -= 1
            if nb.dwell <= 0:
                taken[nb.rb] = False
                free = np.flatnonzero(~taken)
                nb.rb = int(self.rng.choice(free))
                taken[nb.rb] = True
                nb.dwell = self._draw_dwell()
        self._resample_gaps()
        self._regen_channels()

    def step(self, a: ActionMatrix) -> StepOutcome:
        if self.rng is None:
            raise RuntimeError("call reset() first")
        if self.done:
            raise RuntimeError("episode finished; call reset()")
        if a.rb_probs.size != self.ofdm.n_rb:
            raise ValueError("action width must equal n_rb")
        truth = self.current_truth()
        w = self.reward
        if not truth.any_free:
            outcome = StepOutcome(0.0, False, 0.0, truth, None, skipped=True)
        else:
            rb, rate = select_decision(a)
            success = bool(truth.v_rb[rb] == 1 and rate <= truth.v_rate[rb])
            throughput = rate if success else 0.0
            r_rb, r_rate, chosen_est = reward_terms(a, truth, w)
            if w.gate_throughput_on_success:
                # Value the executed decision: estimated rate survives only on
                # success, so this term equals realized throughput.
                last = w.w7 * throughput
            else:
                last = w.w7 * chosen_est
            reward = w.w5 * r_rb + w.w6 * r_rate + last
            outcome = StepOutcome(reward, success, throughput, truth,
                                  None, chosen_rb=rb, chosen_rate=rate)
        self._advance()
        outcome.observation = self._sense()
        return outcome


def write_trace(path, records: list) -> None:
    """Persist per-step records as JSON lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def read_trace(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def outcome_record(t: int, out: StepOutcome) -> dict:
    """Flatten a step outcome into a JSON-friendly trace record."""
    return {
        "t": t,
        "rb": out.chosen_rb,
        "rate": out.chosen_rate,
        "success": bool(out.success),
        "reward": float(out.reward),
        "skipped": bool(out.skipped),
        "v_rb": [int(v) for v in out.truth.v_rb],
        "v_rate": [float(v) for v in out.truth.v_rate],
    }
