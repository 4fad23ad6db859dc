"""Dialogue state tracking and its fixed-length vector encoding.

The state vector concatenates: user intent one-hot (11), user inform bag (16),
open user request bag (16), last agent action one-hot (|A|), agent inform bag
(16), normalized turn count (1), and a one-hot over knowledge-base match-count
bins (6). Every entry lies in [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .domain import (
    INTENTS,
    KB_SLOTS,
    SLOTS,
    ActionTemplate,
    DialogueAct,
    Intent,
    KnowledgeBase,
    Slot,
    action_id_for,
)

_INTENT_INDEX = {intent: i for i, intent in enumerate(INTENTS)}
_SLOT_INDEX = {slot: i for i, slot in enumerate(SLOTS)}

# Match-count bins: 0, 1, 2-4, 5-19, 20-99, >=100.
_KB_BIN_EDGES = (1, 2, 5, 20, 100)


def kb_count_bin(count: int) -> int:
    for i, edge in enumerate(_KB_BIN_EDGES):
        if count < edge:
            return i
    return len(_KB_BIN_EDGES)


@dataclass(frozen=True)
class EncoderConfig:
    """Fixes the encoded vector layout for one run."""

    agent_actions: tuple[ActionTemplate, ...]
    max_turns: int = 40

    @property
    def dim(self) -> int:
        return (
            len(INTENTS)
            + len(SLOTS) * 3
            + len(self.agent_actions)
            + 1
            + len(_KB_BIN_EDGES) + 1
        )


@dataclass(frozen=True)
class DialogueState:
    last_user_act: DialogueAct | None = None
    last_agent_act: DialogueAct | None = None
    last_actor: str | None = None
    user_informed: dict[Slot, str] = field(default_factory=dict)
    agent_informed: dict[Slot, str] = field(default_factory=dict)
    user_requested: frozenset[Slot] = field(default_factory=frozenset)
    turn_count: int = 0
    kb_match_count: int = 0
    termination_signal: bool = False


def new_dialogue_state(kb: KnowledgeBase) -> DialogueState:
    return DialogueState(kb_match_count=kb.match_count({}))


def update(state: DialogueState, act: DialogueAct, actor: str, kb: KnowledgeBase) -> DialogueState:
    """Fold one act into the state. Later inform values overwrite earlier ones;
    the turn count advances only on agent acts."""
    if actor not in ("user", "agent"):
        raise ValueError(f"unknown actor {actor!r}")
    if actor == "user":
        user_informed = {**state.user_informed, **act.inform_slots}
        user_requested = state.user_requested | act.request_slots
        next_state = replace(
            state,
            last_user_act=act,
            last_actor="user",
            user_informed=user_informed,
            user_requested=user_requested,
            kb_match_count=kb.match_count(user_informed),
        )
    else:
        agent_informed = {**state.agent_informed, **act.inform_slots}
        resolved = set(act.inform_slots)
        if Slot.TASKCOMPLETE in act.inform_slots:
            # Booking the ticket is what answers the standing ticket request.
            resolved.add(Slot.TICKET)
        next_state = replace(
            state,
            last_agent_act=act,
            last_actor="agent",
            agent_informed=agent_informed,
            user_requested=state.user_requested - resolved,
            turn_count=state.turn_count + 1,
        )
    return next_state


def signal_termination(state: DialogueState) -> DialogueState:
    return replace(state, termination_signal=True)


def encode(state: DialogueState, config: EncoderConfig) -> np.ndarray:
    vec = np.zeros(config.dim, dtype=np.float64)
    offset = 0
    if state.last_user_act is not None:
        vec[offset + _INTENT_INDEX[state.last_user_act.intent]] = 1.0
    offset += len(INTENTS)
    for slot in state.user_informed:
        vec[offset + _SLOT_INDEX[slot]] = 1.0
    offset += len(SLOTS)
    for slot in state.user_requested:
        vec[offset + _SLOT_INDEX[slot]] = 1.0
    offset += len(SLOTS)
    if state.last_agent_act is not None:
        vec[offset + action_id_for(state.last_agent_act, list(config.agent_actions))] = 1.0
    offset += len(config.agent_actions)
    for slot in state.agent_informed:
        vec[offset + _SLOT_INDEX[slot]] = 1.0
    offset += len(SLOTS)
    vec[offset] = min(1.0, state.turn_count / config.max_turns)
    offset += 1
    vec[offset + kb_count_bin(state.kb_match_count)] = 1.0
    return vec


def ticket_informed(state: DialogueState) -> bool:
    return Slot.TASKCOMPLETE in state.agent_informed or Slot.TICKET in state.agent_informed


def is_terminal(state: DialogueState, config: EncoderConfig) -> bool:
    if state.termination_signal:
        return True
    if state.turn_count >= config.max_turns:
        return True
    last_act = state.last_agent_act if state.last_actor == "agent" else state.last_user_act
    if last_act is not None and last_act.intent in (Intent.CLOSING, Intent.THANKS):
        return ticket_informed(state)
    return False


_KB_SLOT_SET = frozenset(KB_SLOTS)


def _kb_value_for(slot: Slot, state: DialogueState, kb: KnowledgeBase) -> str:
    """Pick a truthful value: prefer rows consistent with everything said so
    far, fall back to the user's constraints alone, then to any row."""
    merged = {
        s: v
        for s, v in {**state.user_informed, **state.agent_informed}.items()
        if s in _KB_SLOT_SET
    }
    rows = kb.lookup(merged)
    if not rows:
        rows = kb.lookup(
            {s: v for s, v in state.user_informed.items() if s in _KB_SLOT_SET}
        )
    if not rows:
        rows = list(kb.rows)
    return rows[0][slot]


def realize_agent_act(
    intent: Intent, slot: Slot | None, state: DialogueState, kb: KnowledgeBase
) -> DialogueAct:
    """Turn an (intent, slot) action template into a concrete dialogue act,
    filling inform values from the knowledge base."""
    if intent is Intent.REQUEST:
        if slot is None:
            raise ValueError("request template needs a slot")
        return DialogueAct(Intent.REQUEST, request_slots=frozenset({slot}))
    if intent is Intent.INFORM:
        if slot is None:
            raise ValueError("inform template needs a slot")
        if slot is Slot.TASKCOMPLETE:
            return DialogueAct(Intent.INFORM, inform_slots={Slot.TASKCOMPLETE: "booked"})
        return DialogueAct(Intent.INFORM, inform_slots={slot: _kb_value_for(slot, state, kb)})
    return DialogueAct(intent)
