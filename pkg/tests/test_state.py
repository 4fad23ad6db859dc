from __future__ import annotations

import numpy as np
import pytest

from ddq.domain import DialogueAct, Intent, Slot
from ddq.state import (
    EncoderConfig,
    encode,
    is_terminal,
    kb_count_bin,
    new_dialogue_state,
    realize_agent_act,
    signal_termination,
    update,
)


@pytest.fixture()
def enc_cfg(agent_actions):
    return EncoderConfig(agent_actions=tuple(agent_actions), max_turns=40)


def user_inform(**slots):
    return DialogueAct(Intent.INFORM, inform_slots={Slot(k): v for k, v in slots.items()})


class TestUpdate:
    def test_user_inform_merged(self, kb):
        state = update(new_dialogue_state(kb), user_inform(moviename="batman"), "user", kb)
        assert state.user_informed[Slot.MOVIENAME] == "batman"
        assert state.turn_count == 0

    def test_later_values_overwrite(self, kb):
        state = new_dialogue_state(kb)
        state = update(state, user_inform(city="seattle"), "user", kb)
        state = update(state, user_inform(city="boston"), "user", kb)
        assert state.user_informed[Slot.CITY] == "boston"

    def test_agent_inform_resolves_request(self, kb):
        state = new_dialogue_state(kb)
        state = update(
            state,
            DialogueAct(Intent.REQUEST, request_slots=frozenset({Slot.THEATER})),
            "user",
            kb,
        )
        assert Slot.THEATER in state.user_requested
        state = update(
            state, DialogueAct(Intent.INFORM, inform_slots={Slot.THEATER: "X"}), "agent", kb
        )
        assert Slot.THEATER not in state.user_requested
        assert state.turn_count == 1

    def test_taskcomplete_resolves_ticket_request(self, kb):
        state = new_dialogue_state(kb)
        state = update(
            state, DialogueAct(Intent.REQUEST, request_slots=frozenset({Slot.TICKET})), "user", kb
        )
        state = update(
            state, DialogueAct(Intent.INFORM, inform_slots={Slot.TASKCOMPLETE: "booked"}),
            "agent", kb,
        )
        assert Slot.TICKET not in state.user_requested

    def test_turn_count_only_on_agent_acts(self, kb):
        state = new_dialogue_state(kb)
        state = update(state, user_inform(moviename="batman"), "user", kb)
        state = update(state, user_inform(city="seattle"), "user", kb)
        assert state.turn_count == 0
        state = update(state, DialogueAct(Intent.GREETING), "agent", kb)
        assert state.turn_count == 1

    def test_kb_match_count_equals_brute_force(self, kb):
        value = kb.rows[3][Slot.MOVIENAME]
        state = update(new_dialogue_state(kb), user_inform(moviename=value), "user", kb)
        expected = sum(1 for row in kb.rows if row[Slot.MOVIENAME] == value)
        assert state.kb_match_count == expected

    def test_unknown_actor_rejected(self, kb):
        with pytest.raises(ValueError):
            update(new_dialogue_state(kb), DialogueAct(Intent.GREETING), "observer", kb)


class TestEncode:
    def test_greeting_only_state_has_empty_bags(self, kb, enc_cfg):
        state = update(new_dialogue_state(kb), DialogueAct(Intent.GREETING), "user", kb)
        vec = encode(state, enc_cfg)
        bags = vec[11 : 11 + 32]  # user inform bag + user request bag
        assert np.array_equal(bags, np.zeros(32))

    def test_vector_length(self, kb, enc_cfg):
        vec = encode(new_dialogue_state(kb), enc_cfg)
        assert vec.shape == (enc_cfg.dim,)
        assert enc_cfg.dim == 11 + 16 + 16 + 19 + 16 + 1 + 6

    def test_deterministic(self, kb, enc_cfg):
        state = update(new_dialogue_state(kb), user_inform(moviename="batman"), "user", kb)
        assert np.array_equal(encode(state, enc_cfg), encode(state, enc_cfg))

    def test_entries_in_unit_interval(self, kb, enc_cfg, agent_actions):
        rng = np.random.default_rng(0)
        state = new_dialogue_state(kb)
        for i in range(50):
            template = agent_actions[rng.integers(len(agent_actions))]
            state = update(
                state, realize_agent_act(template.intent, template.slot, state, kb), "agent", kb
            )
            state = update(state, user_inform(city="seattle"), "user", kb)
            vec = encode(state, enc_cfg)
            assert np.all(vec >= 0.0) and np.all(vec <= 1.0)

    def test_kb_bins(self):
        assert [kb_count_bin(c) for c in (0, 1, 2, 4, 5, 19, 20, 99, 100, 5000)] == [
            0, 1, 2, 2, 3, 3, 4, 4, 5, 5,
        ]


class TestIsTerminal:
    def test_fresh_state_not_terminal(self, kb, enc_cfg):
        assert not is_terminal(new_dialogue_state(kb), enc_cfg)

    def test_turn_limit(self, kb, enc_cfg):
        state = new_dialogue_state(kb)
        for _ in range(40):
            state = update(state, DialogueAct(Intent.GREETING), "agent", kb)
        assert state.turn_count == 40
        assert is_terminal(state, enc_cfg)

    def test_thanks_after_taskcomplete(self, kb, enc_cfg):
        state = new_dialogue_state(kb)
        state = update(
            state, DialogueAct(Intent.INFORM, inform_slots={Slot.TASKCOMPLETE: "booked"}),
            "agent", kb,
        )
        state = update(state, DialogueAct(Intent.THANKS), "user", kb)
        assert is_terminal(state, enc_cfg)

    def test_thanks_without_ticket_not_terminal(self, kb, enc_cfg):
        state = update(new_dialogue_state(kb), DialogueAct(Intent.THANKS), "user", kb)
        assert not is_terminal(state, enc_cfg)

    def test_explicit_signal(self, kb, enc_cfg):
        state = signal_termination(new_dialogue_state(kb))
        assert is_terminal(state, enc_cfg)


class TestRealizeAgentAct:
    def test_request(self, kb):
        act = realize_agent_act(Intent.REQUEST, Slot.THEATER, new_dialogue_state(kb), kb)
        assert act.intent is Intent.REQUEST and act.request_slots == {Slot.THEATER}

    def test_inform_value_consistent_with_constraints(self, kb):
        row = kb.rows[7]
        state = update(
            new_dialogue_state(kb), user_inform(moviename=row[Slot.MOVIENAME]), "user", kb
        )
        act = realize_agent_act(Intent.INFORM, Slot.THEATER, state, kb)
        value = act.inform_slots[Slot.THEATER]
        matching = [r for r in kb.rows if r[Slot.MOVIENAME] == row[Slot.MOVIENAME]]
        assert value in {r[Slot.THEATER] for r in matching}

    def test_taskcomplete(self, kb):
        act = realize_agent_act(Intent.INFORM, Slot.TASKCOMPLETE, new_dialogue_state(kb), kb)
        assert Slot.TASKCOMPLETE in act.inform_slots

    def test_intent_only(self, kb):
        act = realize_agent_act(Intent.CLOSING, None, new_dialogue_state(kb), kb)
        assert act == DialogueAct(Intent.CLOSING)
