"""Dialogue environment plumbing: runs full agent/user episodes against the
simulator, converts action templates to concrete acts, and exports
transcripts. Real-experience episodes for the trainer and the warm-start
corpus both come from here."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .domain import (
    ActionTemplate,
    DialogueAct,
    Intent,
    KnowledgeBase,
    UserGoal,
    action_id_for,
    sample_user_goal,
)
from .policy import Experience
from .simulator import (
    RewardConfig,
    judge,
    respond,
    reward_for,
    rule_based_agent_act,
    start_session,
)
from .state import (
    DialogueState,
    EncoderConfig,
    encode,
    is_terminal,
    new_dialogue_state,
    realize_agent_act,
    signal_termination,
    update,
)

def realize_user_act(
    template: ActionTemplate,
    goal: UserGoal,
    state: DialogueState,
    kb: KnowledgeBase,
) -> DialogueAct:
    """Concrete act for a world-model-predicted user action template.

    Inform values come from the sampled goal when available, else from a kb
    row consistent with the constraints voiced so far, else a placeholder.
    """
    if template.intent is Intent.REQUEST:
        return DialogueAct(Intent.REQUEST, request_slots=frozenset({template.slot}))
    if template.intent is Intent.INFORM:
        slot = template.slot
        value = goal.constraints.get(slot)
        if value is None:
            rows = kb.lookup({s: v for s, v in state.user_informed.items() if s in kb.rows[0]})
            value = rows[0][slot] if rows else "unknown"
        return DialogueAct(Intent.INFORM, inform_slots={slot: value})
    return DialogueAct(template.intent)


@dataclass
class EnvStep:
    agent_act: DialogueAct
    user_act: DialogueAct
    user_action_id: int
    next_state: DialogueState
    reward: float
    done: bool
    success: bool


@dataclass
class EpisodeTrace:
    experiences: list[Experience]
    transcript: list[dict]
    total_reward: float
    turns: int
    success: bool


class DialogueEnv:
    """One dialogue at a time against the simulated user."""

    def __init__(
        self,
        kb: KnowledgeBase,
        goal_db: list[UserGoal],
        agent_actions: list[ActionTemplate],
        user_actions: list[ActionTemplate],
        encoder_config: EncoderConfig,
        reward_config: RewardConfig,
    ):
        self.kb = kb
        self.goal_db = goal_db
        self.agent_actions = agent_actions
        self.user_actions = user_actions
        self.encoder_config = encoder_config
        self.reward_config = reward_config
        self.session = None
        self.state: DialogueState | None = None

    def reset(self, rng: np.random.Generator) -> DialogueState:
        goal = sample_user_goal(rng, self.goal_db)
        self.session, opening = start_session(goal, rng)
        self.state = update(new_dialogue_state(self.kb), opening, "user", self.kb)
        return self.state

    def step(self, action_id: int, rng: np.random.Generator) -> EnvStep:
        template = self.agent_actions[action_id]
        agent_act = realize_agent_act(template.intent, template.slot, self.state, self.kb)
        after_agent = update(self.state, agent_act, "agent", self.kb)
        user_act, done = respond(
            self.session, agent_act, self.kb, rng, max_turns=self.reward_config.max_turns
        )
        next_state = update(after_agent, user_act, "user", self.kb)
        success = judge(self.session, self.kb) if done else False
        reward = reward_for(self.reward_config, done, success)
        if done and not is_terminal(next_state, self.encoder_config):
            next_state = signal_termination(next_state)
        self.state = next_state
        return EnvStep(
            agent_act=agent_act,
            user_act=user_act,
            user_action_id=action_id_for(user_act, self.user_actions),
            next_state=next_state,
            reward=reward,
            done=done,
            success=success,
        )


def run_episode(env: DialogueEnv, act_fn, rng: np.random.Generator) -> EpisodeTrace:
    """One full dialogue. `act_fn(state, state_vector) -> action id`."""
    state = env.reset(rng)
    transcript = [
        {"turn": 0, "actor": "user", "act": state.last_user_act.to_dict(), "reward": 0.0}
    ]
    s_vec = encode(state, env.encoder_config)
    experiences: list[Experience] = []
    total_reward = 0.0
    done = False
    while not done:
        action_id = act_fn(state, s_vec)
        step = env.step(action_id, rng)
        s_next_vec = encode(step.next_state, env.encoder_config)
        experiences.append(
            Experience(s_vec, action_id, step.reward, step.user_action_id, s_next_vec, step.done)
        )
        turn = step.next_state.turn_count
        transcript.append(
            {"turn": turn, "actor": "agent", "act": step.agent_act.to_dict(), "reward": step.reward}
        )
        transcript.append(
            {"turn": turn, "actor": "user", "act": step.user_act.to_dict(), "reward": 0.0}
        )
        total_reward += step.reward
        state = step.next_state
        s_vec = s_next_vec
        done = step.done
    return EpisodeTrace(
        experiences=experiences,
        transcript=transcript,
        total_reward=total_reward,
        turns=state.turn_count,
        success=step.success,
    )


def rule_based_act_fn(env: DialogueEnv, epsilon: float = 0.0, rng: np.random.Generator | None = None):
    """Rule policy under the same epsilon-greedy wrapper as training dialogues."""

    def act(state: DialogueState, _s_vec) -> int:
        if epsilon > 0 and rng is not None and rng.random() < epsilon:
            return int(rng.integers(len(env.agent_actions)))
        return action_id_for(rule_based_agent_act(state, env.kb), env.agent_actions)

    return act


def generate_rule_based_corpus(
    env: DialogueEnv, n_dialogues: int, rng: np.random.Generator, epsilon: float = 0.0
) -> list[EpisodeTrace]:
    act = rule_based_act_fn(env, epsilon, rng)
    return [run_episode(env, act, rng) for _ in range(n_dialogues)]


def save_transcripts(traces: list[EpisodeTrace], path) -> None:
    """Line-delimited transcript export: one JSON record per utterance."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, trace in enumerate(traces):
            for entry in trace.transcript:
                fh.write(json.dumps({"dialogue": i, **entry}) + "\n")
