"""Movie-ticket booking ontology: intents, slots, dialogue acts, action sets,
the synthetic knowledge base, and user-goal construction.

The intent and slot inventories are closed sets; agent and user action
templates are fixed, deterministically ordered enumerations derived from them
so actions can be one-hot encoded and predicted by a softmax head.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigurationError


class Intent(str, Enum):
    REQUEST = "request"
    INFORM = "inform"
    DENY = "deny"
    CONFIRM_QUESTION = "confirm_question"
    CONFIRM_ANSWER = "confirm_answer"
    GREETING = "greeting"
    CLOSING = "closing"
    NOT_SURE = "not_sure"
    MULTIPLE_CHOICE = "multiple_choice"
    THANKS = "thanks"
    WELCOME = "welcome"


class Slot(str, Enum):
    CITY = "city"
    CLOSING = "closing"
    DATE = "date"
    DISTANCECONSTRAINTS = "distanceconstraints"
    GREETING = "greeting"
    MOVIENAME = "moviename"
    NUMBEROFPEOPLE = "numberofpeople"
    PRICE = "price"
    STARTTIME = "starttime"
    STATE = "state"
    TASKCOMPLETE = "taskcomplete"
    THEATER = "theater"
    THEATER_CHAIN = "theater_chain"
    TICKET = "ticket"
    VIDEO_FORMAT = "video_format"
    ZIP = "zip"


INTENTS: tuple[Intent, ...] = tuple(Intent)
SLOTS: tuple[Slot, ...] = tuple(Slot)

# Slots the user must settle for a booking; numberofpeople is always known to
# the user (a constraint), the other four may instead be requested.
REQUIRED_SLOTS: tuple[Slot, ...] = (
    Slot.MOVIENAME,
    Slot.THEATER,
    Slot.STARTTIME,
    Slot.DATE,
    Slot.NUMBEROFPEOPLE,
)
MOVABLE_REQUIRED_SLOTS: tuple[Slot, ...] = (
    Slot.MOVIENAME,
    Slot.THEATER,
    Slot.STARTTIME,
    Slot.DATE,
)

# Slots the agent can request from / inform to the user.
AGENT_SLOTS: tuple[Slot, ...] = (
    Slot.MOVIENAME,
    Slot.THEATER,
    Slot.STARTTIME,
    Slot.DATE,
    Slot.NUMBEROFPEOPLE,
    Slot.CITY,
)

# Columns of a knowledge-base row (one bookable showing). Excludes the meta
# slots ticket/taskcomplete and the annotation artifacts greeting/closing.
KB_SLOTS: tuple[Slot, ...] = (
    Slot.CITY,
    Slot.DATE,
    Slot.DISTANCECONSTRAINTS,
    Slot.MOVIENAME,
    Slot.NUMBEROFPEOPLE,
    Slot.PRICE,
    Slot.STARTTIME,
    Slot.STATE,
    Slot.THEATER,
    Slot.THEATER_CHAIN,
    Slot.VIDEO_FORMAT,
    Slot.ZIP,
)

OPTIONAL_SLOTS: tuple[Slot, ...] = tuple(
    s for s in KB_SLOTS if s not in REQUIRED_SLOTS
)

# Slots a user may request; ticket is the default request present in every goal.
USER_REQUESTABLE_SLOTS: tuple[Slot, ...] = AGENT_SLOTS + (Slot.TICKET,)


@dataclass(frozen=True)
class DialogueAct:
    """One structured message: an intent plus slot-value pairs.

    A request act carries at least one request slot; an inform act carries at
    least one inform slot and no request slots.
    """

    intent: Intent
    inform_slots: dict[Slot, str] = field(default_factory=dict)
    request_slots: frozenset[Slot] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "inform_slots", dict(self.inform_slots))
        object.__setattr__(self, "request_slots", frozenset(self.request_slots))
        if self.intent is Intent.REQUEST and not self.request_slots:
            raise ValueError("request act needs at least one request slot")
        if self.intent is Intent.INFORM:
            if not self.inform_slots:
                raise ValueError("inform act needs at least one inform slot")
            if self.request_slots:
                raise ValueError("inform act must not carry request slots")

    def to_dict(self) -> dict:
        return {
            "intent": self.intent.value,
            "inform_slots": {s.value: v for s, v in sorted(self.inform_slots.items())},
            "request_slots": sorted(s.value for s in self.request_slots),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DialogueAct":
        return cls(
            intent=Intent(data["intent"]),
            inform_slots={Slot(s): str(v) for s, v in data.get("inform_slots", {}).items()},
            request_slots=frozenset(Slot(s) for s in data.get("request_slots", [])),
        )


@dataclass(frozen=True)
class ActionTemplate:
    """One discrete action: an intent with an optional slot argument."""

    id: int
    intent: Intent
    slot: Slot | None = None

    def label(self) -> str:
        if self.slot is None:
            return self.intent.value
        return f"{self.intent.value}({self.slot.value})"


def enumerate_agent_actions() -> list[ActionTemplate]:
    """Fixed ordered agent action set: 6 requests, 6 informs,
    inform(taskcomplete), and 6 intent-only acts (19 total)."""
    templates: list[ActionTemplate] = []
    for slot in AGENT_SLOTS:
        templates.append(ActionTemplate(len(templates), Intent.REQUEST, slot))
    for slot in AGENT_SLOTS:
        templates.append(ActionTemplate(len(templates), Intent.INFORM, slot))
    templates.append(ActionTemplate(len(templates), Intent.INFORM, Slot.TASKCOMPLETE))
    for intent in (
        Intent.DENY,
        Intent.CONFIRM_QUESTION,
        Intent.CONFIRM_ANSWER,
        Intent.GREETING,
        Intent.CLOSING,
        Intent.THANKS,
    ):
        templates.append(ActionTemplate(len(templates), intent))
    return templates


def enumerate_user_actions() -> list[ActionTemplate]:
    """Fixed ordered user action set: requests for the requestable slots
    (including ticket), informs for every knowledge-base slot, and 4
    intent-only acts (23 total)."""
    templates: list[ActionTemplate] = []
    for slot in USER_REQUESTABLE_SLOTS:
        templates.append(ActionTemplate(len(templates), Intent.REQUEST, slot))
    for slot in KB_SLOTS:
        templates.append(ActionTemplate(len(templates), Intent.INFORM, slot))
    for intent in (Intent.THANKS, Intent.CLOSING, Intent.DENY, Intent.NOT_SURE):
        templates.append(ActionTemplate(len(templates), intent))
    return templates


_SLOT_ORDER = {slot: i for i, slot in enumerate(SLOTS)}


def action_id_for(act: DialogueAct, templates: list[ActionTemplate]) -> int:
    """Map a dialogue act back onto its template id.

    Multi-slot acts map through their canonically-first slot; acts whose
    (intent, slot) pair has no template fall back to the intent-only template.
    """
    slot: Slot | None = None
    if act.intent is Intent.REQUEST and act.request_slots:
        slot = min(act.request_slots, key=_SLOT_ORDER.__getitem__)
    elif act.inform_slots:
        if Slot.TASKCOMPLETE in act.inform_slots:
            slot = Slot.TASKCOMPLETE
        else:
            slot = min(act.inform_slots, key=_SLOT_ORDER.__getitem__)
    for t in templates:
        if t.intent is act.intent and t.slot is slot:
            return t.id
    for t in templates:
        if t.intent is act.intent and t.slot is None:
            return t.id
    raise ValueError(f"no template for act {act.to_dict()}")


# Value vocabularies for the synthetic knowledge base (10-20 strings per slot).
_VALUE_VOCAB: dict[Slot, list[str]] = {
    Slot.MOVIENAME: [
        "deadpool", "batman", "zootopia", "inside out", "whiplash",
        "creed", "arrival", "moonlight", "la la land", "sing street",
        "the witch", "hail caesar", "race", "risen", "eye in the sky",
    ],
    Slot.THEATER: [
        "amc pacific place 11", "century eastport 16", "regal meridian 16",
        "cinemark lincoln square", "amc lowes oak tree 6", "pacific science center imax",
        "regal thornton place", "amc river east 21", "varsity theatre",
        "bellevue lincoln square cinemas", "big picture seattle", "admiral theater",
        "cinerama", "majestic bay", "grand illusion cinema",
    ],
    Slot.STARTTIME: [
        "9am", "10am", "11:30am", "noon", "1:30pm", "3pm", "4:30pm",
        "5pm", "6:30pm", "7pm", "8:15pm", "9pm", "10pm", "11pm",
    ],
    Slot.DATE: [
        "today", "tonight", "tomorrow", "this weekend", "friday", "saturday",
        "sunday", "monday", "tuesday", "wednesday", "thursday", "march 12th",
    ],
    Slot.NUMBEROFPEOPLE: [str(n) for n in range(1, 11)],
    Slot.CITY: [
        "seattle", "boston", "portland", "chicago", "san francisco", "bellevue",
        "tacoma", "redmond", "kirkland", "everett", "renton", "sacramento",
    ],
    Slot.STATE: [
        "wa", "ma", "or", "il", "ca", "ny", "tx", "fl", "az", "co", "nv", "ga",
    ],
    Slot.ZIP: [
        "98101", "02108", "97201", "60601", "94102", "98004", "98402",
        "98052", "98033", "98201", "98055", "95814", "98109", "98115",
    ],
    Slot.THEATER_CHAIN: [
        "amc", "regal", "century", "cinemark", "pacific", "landmark",
        "alamo drafthouse", "harkins", "marcus", "showcase",
    ],
    Slot.VIDEO_FORMAT: [
        "2d", "3d", "imax", "imax 3d", "4dx", "dolby cinema", "screenx",
        "70mm", "open caption", "vip",
    ],
    Slot.PRICE: [
        "$8", "$9", "$10", "$11", "$12", "$13", "$14", "$15", "$16", "$18",
    ],
    Slot.DISTANCECONSTRAINTS: [
        "downtown", "near me", "within 5 miles", "city center", "north side",
        "south side", "east side", "west side", "near the mall", "close by",
    ],
}


@dataclass(frozen=True)
class KnowledgeBase:
    """Synthetic table of bookable showings; every row has a value for each
    knowledge-base slot. Lookup by partial constraints is memoized (rows are
    immutable)."""

    rows: tuple[dict[Slot, str], ...]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(dict(r) for r in self.rows))
        for row in self.rows:
            missing = [s for s in KB_SLOTS if s not in row]
            if missing:
                raise ValueError(f"kb row missing slots: {missing}")

    def lookup(self, constraints: dict[Slot, str]) -> list[dict[Slot, str]]:
        return [self.rows[i] for i in self.lookup_indices(constraints)]

    def lookup_indices(self, constraints: dict[Slot, str]) -> tuple[int, ...]:
        key = frozenset((s, v) for s, v in constraints.items())
        hit = self._cache.get(key)
        if hit is None:
            hit = tuple(
                i
                for i, row in enumerate(self.rows)
                if all(row.get(s) == v for s, v in constraints.items())
            )
            self._cache[key] = hit
        return hit

    def match_count(self, constraints: dict[Slot, str]) -> int:
        return len(self.lookup_indices(constraints))


def kb_lookup(kb: KnowledgeBase, constraints: dict[Slot, str]) -> list[dict[Slot, str]]:
    """Rows whose values equal all given constraints; {} matches everything."""
    return kb.lookup(constraints)


def generate_kb(rng: np.random.Generator, n_rows: int = 100) -> KnowledgeBase:
    rows = []
    for _ in range(n_rows):
        row = {s: _VALUE_VOCAB[s][rng.integers(len(_VALUE_VOCAB[s]))] for s in KB_SLOTS}
        rows.append(row)
    return KnowledgeBase(rows=tuple(rows))


@dataclass(frozen=True)
class UserGoal:
    """One task instance: constraint slots the user knows, request slots the
    user needs from the agent. ticket is always requested."""

    constraints: dict[Slot, str]
    requests: frozenset[Slot]

    def __post_init__(self):
        object.__setattr__(self, "constraints", dict(self.constraints))
        object.__setattr__(self, "requests", frozenset(self.requests))
        if Slot.TICKET not in self.requests:
            raise ValueError("ticket must always be requested")
        overlap = self.requests & set(self.constraints)
        if overlap:
            raise ValueError(f"constraints and requests overlap: {sorted(overlap)}")
        for slot in REQUIRED_SLOTS:
            if slot not in self.constraints and slot not in self.requests:
                raise ValueError(f"required slot {slot.value} missing from goal")

    def to_dict(self) -> dict:
        return {
            "constraints": {s.value: v for s, v in sorted(self.constraints.items())},
            "requests": sorted(s.value for s in self.requests),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UserGoal":
        return cls(
            constraints={Slot(s): str(v) for s, v in data["constraints"].items()},
            requests=frozenset(Slot(s) for s in data["requests"]),
        )


@dataclass(frozen=True)
class GoalDbConfig:
    n_goals: int = 100
    optional_prob: float = 0.3
    request_move_prob: float = 0.5


def build_goal_database(
    kb: KnowledgeBase, config: GoalDbConfig, rng: np.random.Generator
) -> list[UserGoal]:
    """Synthesize user goals grounded in the knowledge base.

    Each goal copies its constraint values from one uniformly drawn row, so
    every goal is satisfiable. Movable required slots migrate into requests
    with `request_move_prob` (numberofpeople always stays a constraint);
    optional slots join the constraints with `optional_prob`.
    """
    if not kb.rows:
        raise ConfigurationError("knowledge base is empty")
    goals = []
    for _ in range(config.n_goals):
        row = kb.rows[rng.integers(len(kb.rows))]
        constraints: dict[Slot, str] = {}
        requests: set[Slot] = {Slot.TICKET}
        constraints[Slot.NUMBEROFPEOPLE] = row[Slot.NUMBEROFPEOPLE]
        for slot in MOVABLE_REQUIRED_SLOTS:
            if rng.random() < config.request_move_prob:
                requests.add(slot)
            else:
                constraints[slot] = row[slot]
        for slot in OPTIONAL_SLOTS:
            if rng.random() < config.optional_prob:
                constraints[slot] = row[slot]
        goals.append(UserGoal(constraints=constraints, requests=frozenset(requests)))
    return goals


def sample_user_goal(rng: np.random.Generator, goal_db: list[UserGoal]) -> UserGoal:
    if not goal_db:
        raise ConfigurationError("goal database is empty")
    return goal_db[rng.integers(len(goal_db))]


def save_kb(kb: KnowledgeBase, path: Path | str) -> None:
    """One JSON record per line, slot names as keys, UTF-8."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in kb.rows:
            fh.write(json.dumps({s.value: v for s, v in sorted(row.items())}) + "\n")


def load_kb(path: Path | str) -> KnowledgeBase:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append({Slot(s): str(v) for s, v in json.loads(line).items()})
    return KnowledgeBase(rows=tuple(rows))


def save_goals(goals: list[UserGoal], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for goal in goals:
            fh.write(json.dumps(goal.to_dict()) + "\n")


def load_goals(path: Path | str) -> list[UserGoal]:
    goals = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                goals.append(UserGoal.from_dict(json.loads(line)))
    return goals
