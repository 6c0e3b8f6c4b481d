"""Episode simulator: decisions, reward arithmetic, dynamics, traces."""

import dataclasses

import numpy as np
import pytest

from uwacr.envsim import (
    ActionMatrix,
    RewardParams,
    ScenarioParams,
    UWAEnv,
    compute_reward,
    outcome_record,
    read_trace,
    reward_terms,
    select_decision,
    write_trace,
)
from uwacr.oracle import GroundTruth, compute_cqi, default_beacon


def one_hot_action(rb, rate, n_rb, floor=1e-3):
    probs = np.full(n_rb, floor)
    probs[rb] = 1.0 - floor * (n_rb - 1)
    rates = np.zeros(n_rb)
    rates[rb] = rate
    return ActionMatrix(probs, rates)


def make_env(cfg, **scenario_overrides):
    scenario = dataclasses.replace(cfg.scenario, **scenario_overrides)
    return UWAEnv(cfg.ofdm, cfg.acoustic, cfg.sensing, scenario, cfg.reward)


class TestActionMatrix:
    def test_probability_column_checked(self):
        with pytest.raises(ValueError, match="probability"):
            ActionMatrix(np.array([0.5, 0.6]), np.zeros(2))
        with pytest.raises(ValueError, match="probability"):
            ActionMatrix(np.array([1.2, -0.2]), np.zeros(2))

    def test_rates_nonnegative(self):
        with pytest.raises(ValueError, match="nonnegative"):
            ActionMatrix(np.array([0.5, 0.5]), np.array([1.0, -0.1]))

    def test_override_range_checked(self):
        with pytest.raises(ValueError, match="rb_override"):
            ActionMatrix(np.array([0.5, 0.5]), np.zeros(2), rb_override=2)

    def test_as_matrix(self):
        a = ActionMatrix(np.array([0.25, 0.75]), np.array([1.0, 2.0]))
        assert a.as_matrix().shape == (2, 2)
        assert a.as_matrix()[1].tolist() == [0.75, 2.0]


class TestSelectDecision:
    def test_mass_concentrated_on_one_rb(self):
        a = ActionMatrix(np.array([1.0, 0, 0, 0, 0]), np.array([2.0, 9, 9, 9, 9]))
        assert select_decision(a) == (0, 2.0)

    def test_uniform_probabilities_pick_best_rate(self):
        a = ActionMatrix(np.full(5, 0.2), np.array([1.0, 2, 3, 4, 5]))
        assert select_decision(a) == (4, 5.0)

    def test_tie_breaks_to_lowest_index(self):
        a = ActionMatrix(np.array([0.5, 0.5]), np.array([3.0, 3.0]))
        assert select_decision(a) == (0, 3.0)

    def test_override_takes_precedence(self):
        a = ActionMatrix(np.full(5, 0.2), np.array([1.0, 2, 3, 4, 5]), rb_override=1)
        assert select_decision(a) == (1, 2.0)


TRUTH_2RB = GroundTruth(np.array([1, 0]), np.array([2.0, 0.0]))


class TestRewardArithmetic:
    def test_perfect_action_scores_zero(self):
        w = RewardParams(w1=1, w2=1, w3=1, w4=1, w5=1, w6=1, w7=0)
        a = ActionMatrix(np.array([1.0, 0.0]), np.array([2.0, 0.0]))
        assert compute_reward(a, TRUTH_2RB, w) == pytest.approx(0.0, abs=1e-9)

    def test_uniform_probabilities_pay_ce_plus_mse(self):
        # CE = -ln 0.5, MSE = ((0.5-1)^2 + (0.5-0)^2)/2 = 0.25
        w = RewardParams(w1=1, w2=1, w3=0, w4=0, w5=1, w6=0, w7=0)
        truth = GroundTruth(np.array([1, 0]), np.array([1.0, 0.0]))
        a = ActionMatrix(np.array([0.5, 0.5]), np.array([1.0, 0.0]))
        assert compute_reward(a, truth, w) == pytest.approx(-0.9431471805599453, abs=1e-9)

    def test_overestimate_zeroed_then_penalized(self):
        # rate 3 over capacity 2 is zeroed, so the loss sees the full 2^2
        w = RewardParams(w1=0, w2=0, w3=1, w4=0, w5=0, w6=1, w7=0)
        a = ActionMatrix(np.array([0.5, 0.5]), np.array([3.0, 0.0]))
        assert compute_reward(a, TRUTH_2RB, w) == pytest.approx(-2.0, abs=1e-9)

    def test_auxiliary_terms_never_positive(self):
        rng = np.random.default_rng(60)
        w = RewardParams()
        for _ in range(200):
            probs = rng.dirichlet(np.ones(5))
            rates = rng.uniform(0, 6, size=5)
            v_rb = np.zeros(5, dtype=int)
            v_rb[rng.integers(5)] = 1
            v_rate = v_rb * rng.uniform(0.5, 5.0, size=5)
            a = ActionMatrix(probs, rates)
            r_rb, r_rate, chosen = reward_terms(a, GroundTruth(v_rb, v_rate), w)
            assert r_rb <= 0 and r_rate <= 0
            assert chosen <= rates.max()
            total = compute_reward(a, GroundTruth(v_rb, v_rate), w)
            assert total <= w.w7 * rates.max() + 1e-12

    def test_decomposition_with_only_throughput_weight(self):
        w = RewardParams(w1=1, w2=1, w3=1, w4=1, w5=0, w6=0, w7=2.0)
        a = ActionMatrix(np.array([0.3, 0.7]), np.array([1.0, 1.5]))
        chosen_est = a.rates[int(np.argmax(a.rates * a.rb_probs))]
        assert compute_reward(a, TRUTH_2RB, w) == pytest.approx(2.0 * chosen_est, abs=1e-12)

    def test_all_occupied_truth_rejected(self):
        truth = GroundTruth(np.array([0, 0]), np.array([0.0, 0.0]))
        a = ActionMatrix(np.array([0.5, 0.5]), np.zeros(2))
        with pytest.raises(ValueError, match="occupied"):
            compute_reward(a, truth, RewardParams())

    def test_weight_validation(self):
        with pytest.raises(ValueError, match="w3"):
            RewardParams(w3=-0.1)
        with pytest.raises(ValueError, match="w5, w6, w7"):
            RewardParams(w5=0, w6=0, w7=0)


class TestEnvLifecycle:
    def test_reset_is_deterministic(self, smoke_cfg):
        env = make_env(smoke_cfg)
        a = env.reset(seed=9)
        b = env.reset(seed=9)
        assert np.array_equal(a.cqi, b.cqi)
        assert np.array_equal(a.spectrum, b.spectrum)

    def test_reset_bookkeeping(self, smoke_cfg):
        env = make_env(smoke_cfg, n_nodes=5, active_min=3, active_max=3)
        env.reset(seed=1)
        truth = env.current_truth()
        assert int((truth.v_rb == 0).sum()) == 3  # collision-free start: distinct RBs
        assert np.all(truth.v_rate[truth.v_rb == 0] == 0)

    def test_zero_interferers_leaves_band_quiet(self, smoke_cfg):
        env = make_env(smoke_cfg, n_nodes=1, active_min=0, active_max=0)
        obs = env.reset(seed=2)
        truth = env.current_truth()
        assert truth.v_rb.tolist() == [1, 1, 1, 1, 1]
        # CQI close to the interference-free oracle (noise-level error only)
        oracle = compute_cqi(default_beacon(env.ofdm), env._direct, env.sigma2, env.ofdm)
        np.testing.assert_allclose(obs.cqi, oracle, rtol=0.5)
        # spectrum energy at the noise floor, far below one transmitting node
        power = obs.spectrum[:, 0] ** 2 + obs.spectrum[:, 1] ** 2
        assert power.mean() < 10 * env.sigma2

    def test_snr_sets_noise_level(self, smoke_cfg):
        env = make_env(smoke_cfg, snr_db=10.0)
        env.reset(seed=3)
        diag = np.fft.fft(env._direct.h, env.ofdm.n_fft)
        mean_gain = float(np.mean(np.abs(diag[env.ofdm.occupied_bins]) ** 2))
        assert env.sigma2 == pytest.approx(mean_gain / 10.0, rel=1e-12)

    def test_infeasible_active_count_rejected(self, smoke_cfg):
        env = make_env(smoke_cfg, n_nodes=8, active_min=6, active_max=6)
        with pytest.raises(ValueError, match="distinct RBs"):
            env.reset(seed=0)

    def test_step_before_reset_rejected(self, smoke_cfg):
        env = make_env(smoke_cfg)
        with pytest.raises(RuntimeError, match="reset"):
            env.step(one_hot_action(0, 1.0, 5))

    def test_stepping_terminated_episode_rejected(self, smoke_cfg):
        env = make_env(smoke_cfg, horizon=2)
        env.reset(seed=4)
        a = one_hot_action(0, 0.0, 5)
        env.step(a)
        env.step(a)
        assert env.done
        with pytest.raises(RuntimeError, match="finished"):
            env.step(a)

    def test_action_width_checked(self, smoke_cfg):
        env = make_env(smoke_cfg)
        env.reset(seed=5)
        with pytest.raises(ValueError, match="n_rb"):
            env.step(one_hot_action(0, 1.0, 4))

    def test_static_channels_freeze_the_scene(self, smoke_cfg):
        env = make_env(smoke_cfg, static_channels=True, horizon=8)
        env.reset(seed=6)
        first = env.current_truth()
        a = one_hot_action(0, 0.0, 5)
        for _ in range(3):
            env.step(a)
            now = env.current_truth()
            assert np.array_equal(now.v_rb, first.v_rb)
            np.testing.assert_allclose(now.v_rate, first.v_rate, rtol=1e-12)

    def test_dynamic_scene_actually_moves(self, smoke_cfg):
        env = make_env(smoke_cfg, n_nodes=5, active_min=2, active_max=2,
                       static_channels=False, drift_speed=0.5, dwell_mean=2.0,
                       horizon=16)
        env.reset(seed=7)
        a = one_hot_action(0, 0.0, 5)
        rates = []
        for _ in range(8):
            rates.append(env.current_truth().v_rate.copy())
            env.step(a)
        assert any(not np.allclose(rates[0], r) for r in rates[1:])


class TestStepJudgment:
    def _free_rb_env(self, smoke_cfg, seed=11):
        env = make_env(smoke_cfg, static_channels=True)
        env.reset(seed=seed)
        truth = env.current_truth()
        assert truth.any_free
        return env, truth

    def test_occupied_rb_fails_regardless_of_rate(self, smoke_cfg):
        env, truth = self._free_rb_env(smoke_cfg)
        occupied = int(np.argmin(truth.v_rb))
        assert truth.v_rb[occupied] == 0
        out = env.step(one_hot_action(occupied, 0.01, 5))
        assert not out.success and out.throughput == 0.0
        assert out.chosen_rb == occupied

    def test_rate_under_capacity_succeeds(self, smoke_cfg):
        env, truth = self._free_rb_env(smoke_cfg)
        rb = truth.best_rb
        rate = 0.99 * truth.v_rate[rb]
        out = env.step(one_hot_action(rb, rate, 5))
        assert out.success
        assert out.throughput == pytest.approx(rate)

    def test_rate_over_capacity_fails(self, smoke_cfg):
        env, truth = self._free_rb_env(smoke_cfg)
        rb = truth.best_rb
        out = env.step(one_hot_action(rb, 1.01 * truth.v_rate[rb], 5))
        assert not out.success and out.throughput == 0.0

    def test_truth_snapshot_matches_judged_state(self, smoke_cfg):
        env, truth = self._free_rb_env(smoke_cfg)
        out = env.step(one_hot_action(truth.best_rb, 0.5, 5))
        assert np.array_equal(out.truth.v_rb, truth.v_rb)

    def test_all_occupied_step_is_skipped(self, smoke_cfg):
        env = make_env(smoke_cfg, n_nodes=6, active_min=5, active_max=5,
                       collision_free_start=True)
        env.reset(seed=12)
        truth = env.current_truth()
        assert not truth.any_free
        out = env.step(one_hot_action(0, 1.0, 5))
        assert out.skipped and out.reward == 0.0 and not out.success
        assert out.chosen_rb == -1

    def test_gate_splits_estimate_from_throughput(self, smoke_cfg):
        # a failing transmission: gated reward drops the w7 term entirely,
        # the literal form still pays the agent its own estimate
        rewards = {}
        for gate in (True, False):
            env = make_env(smoke_cfg, static_channels=True)
            env.reward = dataclasses.replace(env.reward, gate_throughput_on_success=gate)
            env.reset(seed=13)
            truth = env.current_truth()
            rb = truth.best_rb
            action = one_hot_action(rb, truth.v_rate[rb] * 2.0, 5)
            rewards[gate] = env.step(action).reward
        w = smoke_cfg.reward
        env = make_env(smoke_cfg, static_channels=True)
        env.reset(seed=13)
        chosen_est = 2.0 * env.current_truth().v_rate[env.current_truth().best_rb]
        assert rewards[False] - rewards[True] == pytest.approx(w.w7 * chosen_est, rel=1e-12)

    def test_episode_is_bit_stable(self, smoke_cfg):
        actions = [one_hot_action(rb, 0.3 * rb, 5) for rb in (0, 3, 1, 4, 2)]
        runs = []
        for _ in range(2):
            env = make_env(smoke_cfg, horizon=5)
            env.reset(seed=14)
            runs.append([env.step(a) for a in actions])
        for a, b in zip(*runs):
            assert a.reward == b.reward
            assert a.success == b.success
            assert np.array_equal(a.observation.cqi, b.observation.cqi)
            assert np.array_equal(a.observation.spectrum, b.observation.spectrum)


class TestTrace:
    def test_round_trip(self, smoke_cfg, tmp_path):
        env = make_env(smoke_cfg, horizon=4)
        env.reset(seed=15)
        records = []
        for t in range(4):
            out = env.step(one_hot_action(t % 5, 0.2, 5))
            records.append(outcome_record(t, out))
        path = tmp_path / "trace.jsonl"
        write_trace(path, records)
        assert read_trace(path) == records

    def test_record_fields(self, smoke_cfg):
        env = make_env(smoke_cfg, horizon=1)
        env.reset(seed=16)
        out = env.step(one_hot_action(2, 0.1, 5))
        rec = outcome_record(0, out)
        assert set(rec) == {"t", "rb", "rate", "success", "reward", "skipped", "v_rb", "v_rate"}
        assert rec["rb"] == 2 and rec["t"] == 0
