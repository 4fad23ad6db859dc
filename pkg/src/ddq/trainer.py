"""End-to-end Deep Dyna-Q training: replay-buffer spiking, per-epoch direct
reinforcement learning, world-model learning, K planning rollouts, target
sync, K annealing, and periodic evaluation, for every agent variant.

One epoch = one real dialogue plus its learning and planning phases. Real and
simulated experience live in separate buffers and never mix: direct RL samples
the real buffer, planning samples the simulated one.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import nn
from .domain import (
    GoalDbConfig,
    KnowledgeBase,
    UserGoal,
    build_goal_database,
    enumerate_agent_actions,
    enumerate_user_actions,
    generate_kb,
    sample_user_goal,
)
from .env import (
    DialogueEnv,
    EpisodeTrace,
    generate_rule_based_corpus,
    realize_user_act,
    run_episode,
)
from .policy import (
    Experience,
    ReplayBuffer,
    make_q_network,
    q_learning_step,
    select_action,
    sync_target,
)
from .simulator import RewardConfig, open_dialogue
from .state import EncoderConfig, encode, new_dialogue_state, realize_agent_act, update
from .world_model import (
    WorldModel,
    WorldModelConfig,
    make_world_model,
    pretrain,
    simulate_turn,
    world_model_step,
)


class AgentVariant(str, Enum):
    DQN = "dqn"
    DDQ = "ddq"
    DDQ_RAND_INIT = "ddq-rand-init"
    DDQ_FIXED_WM = "ddq-fixed-wm"
    DQN_K = "dqn-k"


# Variants that roll out the world model in a planning phase.
PLANNING_VARIANTS = frozenset(
    {AgentVariant.DDQ, AgentVariant.DDQ_RAND_INIT, AgentVariant.DDQ_FIXED_WM}
)
# Variants that keep refining the world model on real experience.
WM_LEARNING_VARIANTS = frozenset({AgentVariant.DDQ, AgentVariant.DDQ_RAND_INIT})
# Variants whose world model is pretrained on the warm-start corpus.
WM_PRETRAIN_VARIANTS = frozenset({AgentVariant.DDQ, AgentVariant.DDQ_FIXED_WM})


@dataclass(frozen=True)
class TrainerConfig:
    epochs: int = 300
    planning_steps: int = 5
    max_turns: int = 40
    target_sync_every: int = 1
    update_steps: int = 1
    gamma: float = 0.95
    epsilon: float = 0.1
    batch_size: int = 16
    buffer_capacity: int = 5000
    rbs_dialogues: int = 100
    rbs_epsilon: float = 0.5
    wm_corpus_dialogues: int = 400
    q_warmup_steps: int = 5000
    variant: AgentVariant = AgentVariant.DDQ
    eval_every: int = 5
    eval_dialogues: int = 500
    seed: int = 0
    lr: float = 3e-3
    lr_decay_every: int = 100
    lr_decay_factor: float = 0.5
    wm_lr: float = 0.1
    wm_pretrain_lr: float = 0.05
    wm_pretrain_epochs: int = 100
    hidden: int = 80
    sample_user_action: bool = True
    clamp_td_targets: bool = True
    k_anneal_enabled: bool = True
    k_anneal_threshold: float = 0.4
    k_anneal_window: int = 10
    k_anneal_floor: int = 1
    k_anneal_after_epoch: int = 150
    k_anneal_every: int = 50
    kb_rows: int = 100
    n_goals: int = 100
    optional_prob: float = 0.2
    request_move_prob: float = 0.3

    def __post_init__(self):
        if self.planning_steps < 0:
            raise ValueError("planning steps must be >= 0")
        if self.update_steps < 1:
            raise ValueError("update steps must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")


@dataclass
class EpochMetrics:
    epoch: int
    variant: str
    k: int
    train_reward: float
    success: float | None
    reward: float | None
    turns: float | None
    wm_loss_a: float | None
    wm_loss_r: float | None
    wm_loss_t: float | None


def anneal_k(
    eval_success_history: list[float],
    current_k: int,
    config: TrainerConfig,
    epoch: int | None = None,
) -> int:
    """Reduce planning pressure in two ways, both halving K with a floor:
    once the success moving average over the last k_anneal_window evaluations
    clears the threshold, and unconditionally on a late-stage schedule (every
    k_anneal_every epochs from k_anneal_after_epoch on)."""
    if not config.k_anneal_enabled or current_k <= config.k_anneal_floor:
        return current_k
    window = config.k_anneal_window
    if (
        len(eval_success_history) >= window
        and float(np.mean(eval_success_history[-window:])) > config.k_anneal_threshold
    ):
        return max(config.k_anneal_floor, current_k // 2)
    if (
        epoch is not None
        and config.k_anneal_after_epoch
        and epoch >= config.k_anneal_after_epoch
        and config.k_anneal_every
        and (epoch - config.k_anneal_after_epoch) % config.k_anneal_every == 0
    ):
        return max(config.k_anneal_floor, current_k // 2)
    return current_k


def rbs_initialize(
    env: DialogueEnv,
    n_dialogues: int,
    buffer: ReplayBuffer,
    rng: np.random.Generator,
    epsilon: float = 0.0,
) -> list[EpisodeTrace]:
    """Replay-buffer spiking: pre-fill the real buffer with rule-based-agent
    dialogues (run epsilon-greedy like everything else); returns the traces,
    which double as the world-model pretraining corpus."""
    traces = generate_rule_based_corpus(env, n_dialogues, rng, epsilon)
    for trace in traces:
        buffer.extend(trace.experiences)
    return traces


class DdqTrainer:
    def __init__(
        self,
        config: TrainerConfig,
        kb: KnowledgeBase | None = None,
        goal_db: list[UserGoal] | None = None,
    ):
        self.config = config
        seq = np.random.SeedSequence(config.seed)
        domain_seed, init_seed, rbs_seed, train_seed, pretrain_seed = seq.spawn(5)
        domain_rng = np.random.default_rng(domain_seed)
        self.kb = kb if kb is not None else generate_kb(domain_rng, config.kb_rows)
        if goal_db is not None:
            self.goal_db = goal_db
        else:
            self.goal_db = build_goal_database(
                self.kb,
                GoalDbConfig(
                    n_goals=config.n_goals,
                    optional_prob=config.optional_prob,
                    request_move_prob=config.request_move_prob,
                ),
                domain_rng,
            )
        self.agent_actions = enumerate_agent_actions()
        self.user_actions = enumerate_user_actions()
        self.encoder_config = EncoderConfig(
            agent_actions=tuple(self.agent_actions), max_turns=config.max_turns
        )
        self.reward_config = RewardConfig(max_turns=config.max_turns)
        self.wm_config = WorldModelConfig(sample_user_action=config.sample_user_action)
        self.env = self._make_env()

        init_rng = np.random.default_rng(init_seed)
        dim = self.encoder_config.dim
        self.qnet = make_q_network(dim, len(self.agent_actions), init_rng, hidden=config.hidden)
        self.target_net = nn.copy_params(self.qnet)
        self.world_model = make_world_model(
            dim,
            len(self.agent_actions),
            len(self.user_actions),
            init_rng,
            hidden=config.hidden,
            reward_scale=self.reward_config.success_reward,
        )

        self.real_buffer = ReplayBuffer(config.buffer_capacity, name="real")
        self.sim_buffer = ReplayBuffer(config.buffer_capacity, name="simulated")
        self.train_rng = np.random.default_rng(train_seed)
        # (phase, buffer name) per learning step; lets audits verify that
        # direct RL only ever samples real experience and planning only
        # simulated experience.
        self.audit_log: list[tuple[str, str]] = []

        rbs_rng = np.random.default_rng(rbs_seed)
        self.rbs_traces = rbs_initialize(
            self.env, config.rbs_dialogues, self.real_buffer, rbs_rng, config.rbs_epsilon
        )
        corpus = [e for t in self.rbs_traces for e in t.experiences]
        # The pretraining corpus may be larger than the spiked buffer: extra
        # warm-start dialogues feed only the world model, not replay.
        extra = config.wm_corpus_dialogues - config.rbs_dialogues
        if extra > 0 and config.variant in WM_PRETRAIN_VARIANTS:
            corpus = corpus + [
                e
                for t in generate_rule_based_corpus(self.env, extra, rbs_rng, config.rbs_epsilon)
                for e in t.experiences
            ]
        # Policy initialization from the warm-start experience: TD steps on the
        # spiked buffer so the starting greedy policy stays near demonstrated
        # behavior (every variant gets the same treatment).
        self.td_bound = self.reward_config.success_reward if config.clamp_td_targets else None
        warmup_rng = np.random.default_rng([config.seed, 0x9A5])
        for _ in range(config.q_warmup_steps):
            self.audit_log.append(("warmup", self.real_buffer.name))
            q_learning_step(
                self.qnet,
                self.target_net,
                self.real_buffer,
                config.batch_size,
                config.gamma,
                config.lr,
                warmup_rng,
                self.td_bound,
            )
        sync_target(self.qnet, self.target_net)
        if config.variant in WM_PRETRAIN_VARIANTS and corpus and config.wm_pretrain_epochs > 0:
            pretrain(
                self.world_model,
                corpus,
                config.wm_pretrain_epochs,
                config.wm_pretrain_lr,
                np.random.default_rng(pretrain_seed),
                len(self.agent_actions),
                batch_size=config.batch_size,
            )

        self.current_k = 0 if config.variant is AgentVariant.DQN else config.planning_steps
        self.epoch = 0
        self.eval_history: list[float] = []
        self.metrics: list[EpochMetrics] = []

    @property
    def current_lr(self) -> float:
        cfg = self.config
        if not cfg.lr_decay_every:
            return cfg.lr
        return cfg.lr * cfg.lr_decay_factor ** (self.epoch // cfg.lr_decay_every)

    def _make_env(self) -> DialogueEnv:
        return DialogueEnv(
            self.kb,
            self.goal_db,
            self.agent_actions,
            self.user_actions,
            self.encoder_config,
            self.reward_config,
        )

    def _egreedy_act_fn(self, rng: np.random.Generator):
        def act(_state, s_vec):
            return select_action(self.qnet, s_vec, self.config.epsilon, rng)

        return act

    def _onehot(self, action_id: int) -> np.ndarray:
        vec = np.zeros(len(self.agent_actions))
        vec[action_id] = 1.0
        return vec

    def run_direct_rl_episode(self) -> EpisodeTrace:
        """One real dialogue with the epsilon-greedy policy, tuples into the
        real buffer, then Z Q-learning steps on the real buffer."""
        cfg = self.config
        trace = run_episode(self.env, self._egreedy_act_fn(self.train_rng), self.train_rng)
        self.real_buffer.extend(trace.experiences)
        for _ in range(cfg.update_steps):
            self.audit_log.append(("direct_rl", self.real_buffer.name))
            q_learning_step(
                self.qnet,
                self.target_net,
                self.real_buffer,
                cfg.batch_size,
                cfg.gamma,
                self.current_lr,
                self.train_rng,
                self.td_bound,
            )
        return trace

    def run_planning_rollout(self) -> int:
        """One simulated dialogue against the world model (Dyna planning);
        returns its length in agent turns."""
        cfg = self.config
        rng = self.train_rng
        goal = sample_user_goal(rng, self.goal_db)
        opening = open_dialogue(goal, rng)
        state = update(new_dialogue_state(self.kb), opening, "user", self.kb)
        s_vec = encode(state, self.encoder_config)
        length = 0
        terminal = False
        while not terminal and length <= cfg.max_turns:
            action_id = select_action(self.qnet, s_vec, cfg.epsilon, rng)
            template = self.agent_actions[action_id]
            agent_act = realize_agent_act(template.intent, template.slot, state, self.kb)
            after_agent = update(state, agent_act, "agent", self.kb)
            user_action_id, reward, terminal = simulate_turn(
                self.world_model, s_vec, self._onehot(action_id), rng, self.wm_config
            )
            user_act = realize_user_act(
                self.user_actions[user_action_id], goal, after_agent, self.kb
            )
            next_state = update(after_agent, user_act, "user", self.kb)
            s_next_vec = encode(next_state, self.encoder_config)
            self.sim_buffer.append(
                Experience(s_vec, action_id, reward, user_action_id, s_next_vec, terminal)
            )
            state, s_vec = next_state, s_next_vec
            length += 1
        return length

    def run_planning(self, k: int) -> int:
        """K simulated dialogues, each followed by Z Q-learning steps on the
        simulated buffer; returns the dialogue count."""
        cfg = self.config
        for _ in range(k):
            self.run_planning_rollout()
            for _ in range(cfg.update_steps):
                self.audit_log.append(("planning", self.sim_buffer.name))
                q_learning_step(
                    self.qnet,
                    self.target_net,
                    self.sim_buffer,
                    cfg.batch_size,
                    cfg.gamma,
                    self.current_lr,
                    self.train_rng,
                    self.td_bound,
                )
        return k

    def _world_model_phase(self) -> tuple[float, float, float] | None:
        cfg = self.config
        losses = None
        for _ in range(cfg.update_steps):
            self.audit_log.append(("world_model", self.real_buffer.name))
            result = world_model_step(
                self.world_model,
                self.real_buffer,
                cfg.batch_size,
                cfg.wm_lr,
                self.train_rng,
                len(self.agent_actions),
            )
            if result is not None:
                losses = result
        return losses

    def run_epoch(self) -> EpochMetrics:
        cfg = self.config
        self.epoch += 1

        trace = self.run_direct_rl_episode()
        train_rewards = [trace.total_reward]
        if cfg.variant is AgentVariant.DQN_K:
            # K times more real experience instead of planning.
            for _ in range(self.current_k):
                train_rewards.append(self.run_direct_rl_episode().total_reward)

        wm_losses = None
        if cfg.variant in WM_LEARNING_VARIANTS:
            wm_losses = self._world_model_phase()

        if cfg.variant in PLANNING_VARIANTS:
            self.run_planning(self.current_k)

        if cfg.target_sync_every and self.epoch % cfg.target_sync_every == 0:
            sync_target(self.qnet, self.target_net)

        success = reward = turns = None
        if cfg.eval_every and self.epoch % cfg.eval_every == 0:
            success, reward, turns = self.evaluate(cfg.eval_dialogues)
            self.eval_history.append(success)
            if cfg.variant in PLANNING_VARIANTS:
                self.current_k = anneal_k(self.eval_history, self.current_k, cfg, self.epoch)

        metrics = EpochMetrics(
            epoch=self.epoch,
            variant=cfg.variant.value,
            k=self.current_k,
            train_reward=float(np.mean(train_rewards)),
            success=success,
            reward=reward,
            turns=turns,
            wm_loss_a=wm_losses[0] if wm_losses else None,
            wm_loss_r=wm_losses[1] if wm_losses else None,
            wm_loss_t=wm_losses[2] if wm_losses else None,
        )
        self.metrics.append(metrics)
        return metrics

    def train(self) -> list[EpochMetrics]:
        for _ in range(self.config.epochs):
            self.run_epoch()
        return self.metrics

    def ingest_real_episode(self, experiences: list[Experience]) -> None:
        """Commit one externally collected real dialogue (e.g. a human user)
        as this epoch's direct experience, then run the epoch's learning,
        world-model, planning, and target-sync phases."""
        cfg = self.config
        self.epoch += 1
        self.real_buffer.extend(experiences)
        for _ in range(cfg.update_steps):
            self.audit_log.append(("direct_rl", self.real_buffer.name))
            q_learning_step(
                self.qnet,
                self.target_net,
                self.real_buffer,
                cfg.batch_size,
                cfg.gamma,
                self.current_lr,
                self.train_rng,
                self.td_bound,
            )
        if cfg.variant in WM_LEARNING_VARIANTS:
            self._world_model_phase()
        if cfg.variant in PLANNING_VARIANTS:
            self.run_planning(self.current_k)
        if cfg.target_sync_every and self.epoch % cfg.target_sync_every == 0:
            sync_target(self.qnet, self.target_net)

    def evaluate(
        self, n_dialogues: int, rng: np.random.Generator | None = None
    ) -> tuple[float, float, float]:
        """Greedy-policy evaluation: no exploration, no buffer writes, no
        learning. Returns (success rate, average reward, average turns)."""
        if rng is None:
            rng = np.random.default_rng([self.config.seed, 0xEAA1, self.epoch])
        env = self._make_env()

        def act(_state, s_vec):
            return select_action(self.qnet, s_vec, 0.0, rng)

        successes = 0
        total_reward = 0.0
        total_turns = 0
        for _ in range(n_dialogues):
            trace = run_episode(env, act, rng)
            successes += int(trace.success)
            total_reward += trace.total_reward
            total_turns += trace.turns
        return (
            successes / n_dialogues,
            total_reward / n_dialogues,
            total_turns / n_dialogues,
        )

    def world_model_hash(self) -> int:
        return self.world_model.param_hash()

    def qnet_hash(self) -> int:
        return self.qnet.param_hash()

    def save_checkpoint(self, path) -> None:
        nn.save_checkpoint(
            path,
            {
                "qnet": self.qnet,
                "target": self.target_net,
                **{f"wm_{k}": v for k, v in self.world_model.networks().items()},
            },
        )

    def load_checkpoint(self, path) -> None:
        nets = nn.load_checkpoint(path)
        self.qnet = nets["qnet"]
        self.target_net = nets.get("target", nn.copy_params(self.qnet))
        if all(f"wm_{k}" in nets for k in ("shared", "action_head", "reward_head", "term_head")):
            self.world_model = WorldModel(
                nets["wm_shared"],
                nets["wm_action_head"],
                nets["wm_reward_head"],
                nets["wm_term_head"],
            )
