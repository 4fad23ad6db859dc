"""Agenda-based simulated user for the movie-ticket task, plus the naive
rule-based agent used to seed the real-experience buffer.

Per turn the user answers agent requests from its goal constraints, re-asks
requests the agent has not yet answered, volunteers constraints the agent has
not heard yet, and denies (with a correction) any agent inform that
contradicts a constraint. The user hangs up after four identical consecutive
agent acts, and judges the finished dialogue against both its goal and the
knowledge base.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import (
    DialogueAct,
    Intent,
    KB_SLOTS,
    KnowledgeBase,
    Slot,
    UserGoal,
)
from .state import DialogueState, realize_agent_act, ticket_informed

_SLOT_ORDER = {slot: i for i, slot in enumerate(Slot)}

# How many identical consecutive agent acts the user tolerates.
PATIENCE = 4

# Chance the user volunteers an unexpressed constraint instead of re-asking
# an open request when both moves are available.
VOLUNTEER_PROB = 0.5


@dataclass(frozen=True)
class RewardConfig:
    """Success pays 2*L, failure costs L, and every agent turn costs 1."""

    max_turns: int = 40
    per_turn_penalty: float = -1.0

    @property
    def success_reward(self) -> float:
        return 2.0 * self.max_turns

    @property
    def failure_reward(self) -> float:
        return -1.0 * self.max_turns


def reward_for(config: RewardConfig, terminal: bool, success: bool) -> float:
    """Per-turn reward: the step penalty, plus the outcome bonus on the final turn."""
    r = config.per_turn_penalty
    if terminal:
        r += config.success_reward if success else config.failure_reward
    return r


@dataclass
class SimulatorSession:
    goal: UserGoal
    turn: int = 0
    constraints_expressed: set[Slot] = field(default_factory=set)
    requests_fulfilled: dict[Slot, str] = field(default_factory=dict)
    agent_informed: dict[Slot, str] = field(default_factory=dict)
    taskcomplete_informed: bool = False
    closed: bool = False
    _last_agent_act: DialogueAct | None = None
    _repeat_count: int = 0

    def open_requests(self) -> list[Slot]:
        """Unfulfilled goal requests, ticket excluded, in canonical slot order."""
        return sorted(
            (s for s in self.goal.requests
             if s is not Slot.TICKET and s not in self.requests_fulfilled),
            key=_SLOT_ORDER.__getitem__,
        )

    def unexpressed_constraints(self) -> list[Slot]:
        return sorted(
            (s for s in self.goal.constraints if s not in self.constraints_expressed),
            key=_SLOT_ORDER.__getitem__,
        )


def open_dialogue(goal: UserGoal, rng: np.random.Generator) -> DialogueAct:
    """First user act: a request (one goal request slot plus >=1 constraint
    slots) or an inform (constraint slots only), both sampled uniformly."""
    constraint_slots = sorted(goal.constraints, key=_SLOT_ORDER.__getitem__)
    n = int(rng.integers(1, len(constraint_slots) + 1))
    picked = [constraint_slots[i] for i in rng.choice(len(constraint_slots), size=n, replace=False)]
    informs = {s: goal.constraints[s] for s in picked}
    if rng.random() < 0.5:
        request_slots = sorted(goal.requests, key=_SLOT_ORDER.__getitem__)
        req = request_slots[rng.integers(len(request_slots))]
        return DialogueAct(Intent.REQUEST, inform_slots=informs, request_slots=frozenset({req}))
    return DialogueAct(Intent.INFORM, inform_slots=informs)


def start_session(goal: UserGoal, rng: np.random.Generator) -> tuple[SimulatorSession, DialogueAct]:
    session = SimulatorSession(goal=goal)
    opening = open_dialogue(goal, rng)
    session.constraints_expressed.update(opening.inform_slots)
    return session, opening


def _inform(session: SimulatorSession, slot: Slot) -> DialogueAct:
    session.constraints_expressed.add(slot)
    return DialogueAct(Intent.INFORM, inform_slots={slot: session.goal.constraints[slot]})


def _agenda_act(session: SimulatorSession, rng: np.random.Generator) -> DialogueAct:
    """Push the task forward: re-ask an open request or volunteer a constraint."""
    open_req = session.open_requests()
    unexpressed = session.unexpressed_constraints()
    if open_req and unexpressed:
        if rng.random() < VOLUNTEER_PROB:
            return _inform(session, unexpressed[int(rng.integers(len(unexpressed)))])
        return DialogueAct(
            Intent.REQUEST, request_slots=frozenset({open_req[int(rng.integers(len(open_req)))]})
        )
    if open_req:
        return DialogueAct(
            Intent.REQUEST, request_slots=frozenset({open_req[int(rng.integers(len(open_req)))]})
        )
    if unexpressed:
        return _inform(session, unexpressed[int(rng.integers(len(unexpressed)))])
    return DialogueAct(Intent.REQUEST, request_slots=frozenset({Slot.TICKET}))


def _close(session: SimulatorSession) -> tuple[DialogueAct, bool]:
    session.closed = True
    return DialogueAct(Intent.CLOSING), True


def respond(
    session: SimulatorSession,
    agent_act: DialogueAct,
    kb: KnowledgeBase,
    rng: np.random.Generator,
    max_turns: int = 40,
) -> tuple[DialogueAct, bool]:
    """User response to one agent act; returns (act, dialogue finished)."""
    if session.closed:
        raise ValueError("session already terminal")
    session.turn += 1

    if agent_act == session._last_agent_act:
        session._repeat_count += 1
    else:
        session._last_agent_act = agent_act
        session._repeat_count = 1

    # Record everything the agent asserts, whatever the user replies.
    for slot, value in agent_act.inform_slots.items():
        session.agent_informed[slot] = value
        if slot in session.goal.requests:
            session.requests_fulfilled[slot] = value
    if Slot.TASKCOMPLETE in agent_act.inform_slots:
        session.taskcomplete_informed = True
        session.requests_fulfilled[Slot.TICKET] = agent_act.inform_slots[Slot.TASKCOMPLETE]
        act = DialogueAct(Intent.THANKS)
        session.closed = True
        return act, True

    if session.turn >= max_turns:
        return _close(session)
    # Escalating reaction to verbatim repetition, so each stage is visible in
    # the dialogue state (the world model sees only one act of history): a
    # puzzled not_sure, then a deny, then the user hangs up.
    if session._repeat_count >= PATIENCE:
        return _close(session)
    if session._repeat_count == PATIENCE - 1:
        return DialogueAct(Intent.DENY), False
    if session._repeat_count == PATIENCE - 2:
        return DialogueAct(Intent.NOT_SURE), False

    if agent_act.intent is Intent.REQUEST:
        requested = min(agent_act.request_slots, key=_SLOT_ORDER.__getitem__)
        if requested in session.goal.constraints:
            return _inform(session, requested), False
        if requested in session.goal.requests:
            if requested in session.requests_fulfilled:
                return (
                    DialogueAct(
                        Intent.INFORM,
                        inform_slots={requested: session.requests_fulfilled[requested]},
                    ),
                    False,
                )
            return DialogueAct(Intent.REQUEST, request_slots=frozenset({requested})), False
        return DialogueAct(Intent.NOT_SURE), False

    if agent_act.intent is Intent.INFORM:
        for slot, value in agent_act.inform_slots.items():
            expected = session.goal.constraints.get(slot)
            if expected is not None and value != expected:
                # Contradiction: deny and restate the correct value.
                session.constraints_expressed.add(slot)
                return DialogueAct(Intent.DENY, inform_slots={slot: expected}), False
        return _agenda_act(session, rng), False

    # greeting/confirm/closing/thanks and the rest: keep pursuing the goal
    return _agenda_act(session, rng), False


def judge(session: SimulatorSession, kb: KnowledgeBase) -> bool:
    """Success iff the ticket was booked, every request answered, nothing the
    agent said contradicts the goal, and the final package exists in the kb."""
    if not session.taskcomplete_informed:
        return False
    for slot in session.goal.requests:
        if slot not in session.requests_fulfilled:
            return False
    for slot, value in session.agent_informed.items():
        expected = session.goal.constraints.get(slot)
        if expected is not None and value != expected:
            return False
    package = dict(session.goal.constraints)
    for slot, value in session.requests_fulfilled.items():
        if slot in KB_SLOTS:
            package[slot] = value
    return kb.match_count(package) > 0


# Fixed request order of the rule-based warm-start agent.
_RULE_REQUEST_ORDER = (
    Slot.MOVIENAME,
    Slot.DATE,
    Slot.STARTTIME,
    Slot.NUMBEROFPEOPLE,
    Slot.THEATER,
)


def rule_based_agent_act(state: DialogueState, kb: KnowledgeBase) -> DialogueAct:
    """Naive deterministic policy: request required slots once each in a fixed
    order, answer open user requests from the kb, book, close.

    A slot counts as settled once the user has either given its value or asked
    for it back (it then gets answered in the inform phase); the agent never
    asks about optional constraints, which is what keeps it only occasionally
    successful."""
    for slot in _RULE_REQUEST_ORDER:
        if slot not in state.user_informed and slot not in state.user_requested:
            return DialogueAct(Intent.REQUEST, request_slots=frozenset({slot}))
    open_requests = sorted(state.user_requested - {Slot.TICKET}, key=_SLOT_ORDER.__getitem__)
    if open_requests:
        return realize_agent_act(Intent.INFORM, open_requests[0], state, kb)
    if not ticket_informed(state):
        return realize_agent_act(Intent.INFORM, Slot.TASKCOMPLETE, state, kb)
    return DialogueAct(Intent.CLOSING)
