from __future__ import annotations

import numpy as np
import pytest

from ddq import nn
from ddq.trainer import (
    AgentVariant,
    DdqTrainer,
    TrainerConfig,
    anneal_k,
    rbs_initialize,
)
from ddq.policy import ReplayBuffer


def fast_config(**overrides) -> TrainerConfig:
    base = dict(
        epochs=4,
        planning_steps=3,
        rbs_dialogues=10,
        q_warmup_steps=20,
        wm_pretrain_epochs=2,
        eval_every=2,
        eval_dialogues=20,
        seed=0,
    )
    base.update(overrides)
    return TrainerConfig(**base)


class TestConfig:
    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            TrainerConfig(planning_steps=-1)
        with pytest.raises(ValueError):
            TrainerConfig(update_steps=0)
        with pytest.raises(ValueError):
            TrainerConfig(gamma=1.5)

    def test_paper_pinned_defaults(self):
        cfg = TrainerConfig()
        assert cfg.max_turns == 40
        assert cfg.gamma == 0.95
        assert cfg.batch_size == 16
        assert cfg.buffer_capacity == 5000
        assert cfg.rbs_dialogues == 100
        assert cfg.update_steps == 1
        assert cfg.target_sync_every == 1


class TestRbsInitialize:
    def test_dialogue_count_and_tuples(self):
        trainer = DdqTrainer(fast_config(rbs_dialogues=7))
        assert len(trainer.rbs_traces) == 7
        assert len(trainer.real_buffer) >= sum(
            len(t.experiences) for t in trainer.rbs_traces
        ) - trainer.config.buffer_capacity  # no overflow at this scale
        assert len(trainer.real_buffer) == sum(len(t.experiences) for t in trainer.rbs_traces)

    def test_zero_dialogues_leaves_buffer_empty(self):
        trainer = DdqTrainer(fast_config(rbs_dialogues=0, q_warmup_steps=0, wm_pretrain_epochs=0))
        assert len(trainer.real_buffer) == 0

    def test_fixed_seed_reproducible(self):
        a = DdqTrainer(fast_config())
        b = DdqTrainer(fast_config())
        for ea, eb in zip(a.real_buffer, b.real_buffer):
            assert np.array_equal(ea.s, eb.s)
            assert (ea.a, ea.r, ea.a_u, ea.terminal) == (eb.a, eb.r, eb.a_u, eb.terminal)

    def test_standalone_op(self, kb, goal_db):
        trainer = DdqTrainer(fast_config(rbs_dialogues=0, q_warmup_steps=0, wm_pretrain_epochs=0))
        buffer = ReplayBuffer(500)
        traces = rbs_initialize(trainer.env, 5, buffer, np.random.default_rng(0), epsilon=0.2)
        assert len(traces) == 5
        assert len(buffer) == sum(len(t.experiences) for t in traces)


class TestDirectRl:
    def test_episode_appends_exactly_its_tuples(self):
        trainer = DdqTrainer(fast_config())
        before = len(trainer.real_buffer)
        trace = trainer.run_direct_rl_episode()
        assert len(trainer.real_buffer) == before + len(trace.experiences)
        assert len(trace.experiences) == trace.turns

    def test_greedy_trace_reproducible(self):
        def trace_of():
            trainer = DdqTrainer(fast_config(epsilon=0.0))
            return trainer.run_direct_rl_episode().transcript

        assert trace_of() == trace_of()

    def test_buffer_capacity_respected(self):
        trainer = DdqTrainer(fast_config(buffer_capacity=50, rbs_dialogues=20))
        assert len(trainer.real_buffer) == 50
        trainer.run_direct_rl_episode()
        assert len(trainer.real_buffer) == 50


class TestPlanning:
    def test_k_zero_is_noop(self):
        trainer = DdqTrainer(fast_config(variant=AgentVariant.DQN, planning_steps=0))
        before = trainer.qnet_hash()
        assert trainer.run_planning(trainer.current_k) == 0
        assert len(trainer.sim_buffer) == 0
        assert trainer.qnet_hash() == before

    def test_k_rollouts_counted(self):
        trainer = DdqTrainer(fast_config(planning_steps=5))
        trainer.run_planning(5)
        planning_steps = [e for e in trainer.audit_log if e[0] == "planning"]
        assert len(planning_steps) == 5 * trainer.config.update_steps

    def test_never_terminating_model_hits_loop_bound(self):
        trainer = DdqTrainer(fast_config())
        # Force the termination head to never fire.
        trainer.world_model.term_head.weights[1][...] = 0.0
        trainer.world_model.term_head.biases[1][...] = -50.0
        length = trainer.run_planning_rollout()
        assert length == trainer.config.max_turns + 1

    def test_rollout_rewards_and_states_recorded(self):
        trainer = DdqTrainer(fast_config())
        trainer.run_planning_rollout()
        assert len(trainer.sim_buffer) > 0
        exp = next(iter(trainer.sim_buffer))
        assert exp.s.shape == (trainer.encoder_config.dim,)
        assert np.isfinite(exp.r)


class TestVariants:
    def test_fixed_wm_never_mutates_world_model(self):
        trainer = DdqTrainer(fast_config(variant=AgentVariant.DDQ_FIXED_WM))
        before = trainer.world_model_hash()
        for _ in range(3):
            trainer.run_epoch()
        assert trainer.world_model_hash() == before

    def test_dqn_never_touches_world_model_or_sim_buffer(self):
        trainer = DdqTrainer(fast_config(variant=AgentVariant.DQN, planning_steps=0))
        wm_before = trainer.world_model_hash()
        for _ in range(3):
            trainer.run_epoch()
        assert trainer.world_model_hash() == wm_before
        assert len(trainer.sim_buffer) == 0
        assert all(buf == "real" for _, buf in trainer.audit_log)

    def test_dqn_k_consumes_extra_real_dialogues(self):
        trainer = DdqTrainer(fast_config(variant=AgentVariant.DQN_K, planning_steps=4))
        trainer.audit_log.clear()
        trainer.run_epoch()
        direct = [e for e in trainer.audit_log if e[0] == "direct_rl"]
        assert len(direct) == (1 + 4) * trainer.config.update_steps
        assert len(trainer.sim_buffer) == 0
        assert trainer.world_model_hash() == DdqTrainer(
            fast_config(variant=AgentVariant.DQN_K, planning_steps=4)
        ).world_model_hash()

    def test_ddq_runs_one_real_plus_k_simulated(self):
        trainer = DdqTrainer(fast_config(variant=AgentVariant.DDQ, planning_steps=3))
        trainer.audit_log.clear()
        trainer.run_epoch()
        phases = [p for p, _ in trainer.audit_log]
        assert phases.count("direct_rl") == trainer.config.update_steps
        assert phases.count("planning") == 3 * trainer.config.update_steps
        assert phases.count("world_model") == trainer.config.update_steps

    def test_rand_init_skips_pretraining(self):
        rand = DdqTrainer(fast_config(variant=AgentVariant.DDQ_RAND_INIT))
        pre = DdqTrainer(fast_config(variant=AgentVariant.DDQ))
        assert rand.world_model_hash() != pre.world_model_hash()

    def test_buffers_never_mix(self):
        trainer = DdqTrainer(fast_config(variant=AgentVariant.DDQ, planning_steps=2))
        for _ in range(3):
            trainer.run_epoch()
        for phase, buffer_name in trainer.audit_log:
            if phase in ("direct_rl", "world_model", "warmup"):
                assert buffer_name == "real"
            elif phase == "planning":
                assert buffer_name == "simulated"


class TestAnnealK:
    def test_below_threshold_unchanged(self):
        cfg = fast_config(k_anneal_threshold=0.7, k_anneal_window=3)
        assert anneal_k([0.5, 0.5, 0.5], 10, cfg) == 10

    def test_crossing_halves(self):
        cfg = fast_config(k_anneal_threshold=0.7, k_anneal_window=3)
        assert anneal_k([0.8, 0.9, 0.8], 10, cfg) == 5

    def test_floor_reached_and_kept(self):
        cfg = fast_config(k_anneal_threshold=0.7, k_anneal_window=3)
        k = 10
        for _ in range(10):
            k = anneal_k([0.9, 0.9, 0.9], k, cfg)
        assert k == cfg.k_anneal_floor == 1

    def test_short_history_no_change(self):
        cfg = fast_config(k_anneal_threshold=0.7, k_anneal_window=5)
        assert anneal_k([0.9, 0.9], 10, cfg) == 10

    def test_disabled(self):
        cfg = fast_config(k_anneal_enabled=False, k_anneal_window=1)
        assert anneal_k([1.0], 10, cfg) == 10


class TestEvaluate:
    def test_reproducible_and_side_effect_free(self):
        trainer = DdqTrainer(fast_config())
        q_before = trainer.qnet_hash()
        wm_before = trainer.world_model_hash()
        real_before = len(trainer.real_buffer)
        first = trainer.evaluate(30, np.random.default_rng(123))
        second = trainer.evaluate(30, np.random.default_rng(123))
        assert first == second
        assert trainer.qnet_hash() == q_before
        assert trainer.world_model_hash() == wm_before
        assert len(trainer.real_buffer) == real_before
        assert len(trainer.sim_buffer) == 0

    def test_reward_consistent_with_accounting(self):
        trainer = DdqTrainer(fast_config())
        success, reward, turns = trainer.evaluate(50, np.random.default_rng(7))
        cfg = trainer.reward_config
        assert -cfg.max_turns + cfg.failure_reward <= reward <= cfg.success_reward
        # reward = success*(80) + (1-success)*(-40) - mean_turns exactly
        expected = success * cfg.success_reward + (1 - success) * cfg.failure_reward - turns
        assert reward == pytest.approx(expected)


class TestDeterminism:
    def test_identical_config_identical_metrics(self):
        def run():
            trainer = DdqTrainer(fast_config(variant=AgentVariant.DDQ, planning_steps=2))
            return trainer.train()

        a, b = run(), run()
        assert [m.__dict__ for m in a] == [m.__dict__ for m in b]


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        trainer = DdqTrainer(fast_config())
        trainer.run_epoch()
        path = tmp_path / "ckpt.npz"
        trainer.save_checkpoint(path)
        other = DdqTrainer(fast_config(seed=5))
        other.load_checkpoint(path)
        assert nn.params_equal(other.qnet, trainer.qnet)
        assert other.world_model_hash() == trainer.world_model_hash()

    def test_ingest_real_episode_advances_epoch(self):
        trainer = DdqTrainer(fast_config(variant=AgentVariant.DDQ, planning_steps=1))
        trace = trainer.run_direct_rl_episode()
        before = trainer.epoch
        trainer.ingest_real_episode(trace.experiences)
        assert trainer.epoch == before + 1
