"""Human-in-the-loop training service: humans play the user role over an HTTP
API, their dialogues become real experience, and each finished session drives
one training epoch of its assigned agent.

Experience tuples are committed only once a session's terminal feedback is
known (the terminal reward must be attached first). Each session converses
against a parameter snapshot taken at creation; the owning run's parameters
change only between its sessions.
"""
from __future__ import annotations

import asyncio
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, Field

from . import nn
from .domain import (
    INTENTS,
    SLOTS,
    DialogueAct,
    Intent,
    Slot,
    action_id_for,
    sample_user_goal,
)
from .policy import Experience, select_action
from .simulator import reward_for
from .state import (
    DialogueState,
    encode,
    is_terminal,
    new_dialogue_state,
    realize_agent_act,
    signal_termination,
    update,
)
from .trainer import AgentVariant, DdqTrainer, TrainerConfig

API_VERSION = "v1"

_AGENT_TEMPLATES = {
    Intent.REQUEST: {
        Slot.MOVIENAME: "Which movie would you like to see?",
        Slot.THEATER: "Which theater would you like?",
        Slot.STARTTIME: "What time would you like to see it?",
        Slot.DATE: "What date would you like to see it?",
        Slot.NUMBEROFPEOPLE: "How many tickets do you need?",
        Slot.CITY: "Which city would you like?",
    },
    Intent.GREETING: "Hello! How can I help you book movie tickets?",
    Intent.CLOSING: "Goodbye.",
    Intent.THANKS: "Thank you.",
    Intent.DENY: "Sorry, that is not available.",
    Intent.CONFIRM_QUESTION: "Could you confirm that?",
    Intent.CONFIRM_ANSWER: "Yes, that is right.",
}


def render_act(act: DialogueAct) -> str:
    """Cosmetic text for an act; the structured act stays authoritative."""
    if act.intent is Intent.REQUEST and act.request_slots:
        slot = next(iter(act.request_slots))
        template = _AGENT_TEMPLATES[Intent.REQUEST].get(slot)
        return template or f"Could you tell me the {slot.value}?"
    if act.intent is Intent.INFORM:
        if Slot.TASKCOMPLETE in act.inform_slots:
            return "Great, your tickets are booked!"
        parts = ", ".join(f"{s.value} is {v}" for s, v in sorted(act.inform_slots.items()))
        return f"The {parts}."
    template = _AGENT_TEMPLATES.get(act.intent)
    return template if isinstance(template, str) else act.intent.value


@dataclass
class FeedbackRecord:
    session_id: str
    success: bool
    reason: str  # user_judged | abandoned | turn_limit


@dataclass
class HitlRun:
    name: str
    trainer: DdqTrainer
    sessions_served: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


class HitlSession:
    def __init__(self, session_id: str, run: HitlRun, goal, policy: nn.NetworkParams,
                 rng: np.random.Generator):
        self.session_id = session_id
        self.run = run
        self.goal = goal
        self.policy = policy
        self.rng = rng
        self.state: DialogueState = new_dialogue_state(run.trainer.kb)
        self.transcript: list[dict] = []
        self.status = "active"
        self.dialogue_over = False
        self.feedback: FeedbackRecord | None = None
        self.seen_turn_ids: set[str] = set()
        self.agent_action_ids: list[int] = []
        self.events: asyncio.Queue | None = None


class ActPayload(BaseModel):
    intent: str
    inform_slots: dict[str, str] = Field(default_factory=dict)
    request_slots: list[str] = Field(default_factory=list)

    def to_act(self) -> DialogueAct:
        try:
            return DialogueAct(
                intent=Intent(self.intent),
                inform_slots={Slot(s): str(v) for s, v in self.inform_slots.items()},
                request_slots=frozenset(Slot(s) for s in self.request_slots),
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))


class TurnRequest(BaseModel):
    turn_id: str
    act: ActPayload


class FeedbackRequest(BaseModel):
    success: bool


class HitlService:
    """Registry of training runs plus the live human sessions against them."""

    def __init__(self, runs: list[HitlRun], seed: int = 0, data_dir: Path | None = None):
        if not runs:
            raise ValueError("at least one training run is required")
        self.runs = {run.name: run for run in runs}
        self._run_order = [run.name for run in runs]
        self.sessions: dict[str, HitlSession] = {}
        self._rng = np.random.default_rng([seed, 0x417])
        self._lock = threading.RLock()
        self.data_dir = Path(data_dir) if data_dir else None
        if self.data_dir:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self._log_path = self.data_dir / "sessions.log"
        else:
            self._log_path = None

    # -- construction -----------------------------------------------------

    @classmethod
    def from_variant_string(cls, variants: str, base_config: TrainerConfig,
                            seed: int = 0, data_dir: Path | None = None,
                            checkpoint: Path | None = None) -> "HitlService":
        runs = []
        for i, entry in enumerate(v.strip() for v in variants.split(",") if v.strip()):
            if ":" in entry:
                name, k = entry.split(":", 1)
                variant, planning_steps = AgentVariant(name), int(k)
            else:
                variant, planning_steps = AgentVariant(entry), 0
            from dataclasses import replace

            config = replace(
                base_config, variant=variant, planning_steps=planning_steps,
                seed=seed + i, eval_every=0,
            )
            trainer = DdqTrainer(config)
            if checkpoint is not None:
                trainer.load_checkpoint(checkpoint)
            label = entry.replace(":", "")
            runs.append(HitlRun(name=label, trainer=trainer))
        service = cls(runs, seed=seed, data_dir=data_dir)
        service.recover()
        return service

    # -- persistence ------------------------------------------------------

    def _log(self, record: dict) -> None:
        if self._log_path is None:
            return
        with open(self._log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")

    def recover(self) -> int:
        """Replay committed episodes from the session log into the runs'
        buffers and learning state; returns the episode count recovered."""
        if self._log_path is None or not self._log_path.exists():
            return 0
        recovered = 0
        with open(self._log_path, encoding="utf-8") as fh:
            for line in fh:
                record = json.loads(line)
                if record.get("type") != "episode_committed":
                    continue
                run = self.runs.get(record["run"])
                if run is None:
                    continue
                experiences = [
                    Experience(
                        s=np.asarray(e["s"]), a=e["a"], r=e["r"], a_u=e["a_u"],
                        s_next=np.asarray(e["s_next"]), terminal=e["terminal"],
                    )
                    for e in record["experiences"]
                ]
                run.trainer.ingest_real_episode(experiences)
                recovered += 1
        for run in self.runs.values():
            ckpt = (self.data_dir / f"{run.name}.npz") if self.data_dir else None
            if ckpt and ckpt.exists():
                run.trainer.load_checkpoint(ckpt)
        return recovered

    def _checkpoint_run(self, run: HitlRun) -> None:
        if self.data_dir:
            run.trainer.save_checkpoint(self.data_dir / f"{run.name}.npz")

    # -- session lifecycle -------------------------------------------------

    def create_session(self) -> HitlSession:
        with self._lock:
            name = self._run_order[int(self._rng.integers(len(self._run_order)))]
            run = self.runs[name]
            goal = sample_user_goal(self._rng, run.trainer.goal_db)
            session = HitlSession(
                session_id=uuid.uuid4().hex[:12],
                run=run,
                goal=goal,
                policy=nn.copy_params(run.trainer.qnet),
                rng=np.random.default_rng(self._rng.integers(2**63)),
            )
            run.sessions_served += 1
            self.sessions[session.session_id] = session
            self._log({
                "type": "session_created", "session": session.session_id,
                "run": name, "goal": goal.to_dict(),
            })
            return session

    def _get(self, session_id: str) -> HitlSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def _push_event(self, session: HitlSession, event: dict) -> None:
        if session.events is not None:
            session.events.put_nowait(event)

    def post_user_turn(self, session_id: str, turn_id: str, act: DialogueAct) -> dict:
        with self._lock:
            session = self._get(session_id)
            if session.status != "active" or session.dialogue_over:
                raise HTTPException(status_code=409, detail="session is terminal")
            if turn_id in session.seen_turn_ids:
                raise HTTPException(status_code=409, detail="duplicate turn id")
            session.seen_turn_ids.add(turn_id)
            trainer = session.run.trainer

            session.state = update(session.state, act, "user", trainer.kb)
            session.transcript.append({"actor": "user", "act": act.to_dict()})
            self._log({"type": "turn", "session": session_id, "actor": "user",
                       "act": act.to_dict()})
            if is_terminal(session.state, trainer.encoder_config):
                session.dialogue_over = True
                event = {"event": "awaiting_feedback",
                         "turn_count": session.state.turn_count}
                self._push_event(session, event)
                return {"terminal": True, "reason": "dialogue_complete",
                        "turn_count": session.state.turn_count,
                        "awaiting_feedback": True}

            s_vec = encode(session.state, trainer.encoder_config)
            action_id = select_action(
                session.policy, s_vec, trainer.config.epsilon, session.rng
            )
            template = trainer.agent_actions[action_id]
            agent_act = realize_agent_act(
                template.intent, template.slot, session.state, trainer.kb
            )
            session.state = update(session.state, agent_act, "agent", trainer.kb)
            session.agent_action_ids.append(action_id)
            session.transcript.append({"actor": "agent", "act": agent_act.to_dict()})
            self._log({"type": "turn", "session": session_id, "actor": "agent",
                       "act": agent_act.to_dict(), "action_id": action_id})

            payload = {
                "terminal": False,
                "agent_act": agent_act.to_dict(),
                "agent_text": render_act(agent_act),
                "turn_count": session.state.turn_count,
                "max_turns": trainer.config.max_turns,
            }
            if session.state.turn_count >= trainer.config.max_turns:
                self._finish(session, success=False, reason="turn_limit")
                payload.update(terminal=True, reason="turn_limit", status=session.status)
            self._push_event(session, {"event": "agent_turn", **payload})
            return payload

    def post_feedback(self, session_id: str, success: bool) -> dict:
        with self._lock:
            session = self._get(session_id)
            if session.feedback is not None:
                raise HTTPException(status_code=409, detail="feedback already recorded")
            if session.status != "active":
                raise HTTPException(status_code=409, detail="session is terminal")
            return self._finish(session, success=success, reason="user_judged")

    def abandon_session(self, session_id: str) -> dict:
        with self._lock:
            session = self._get(session_id)
            if session.status != "active":
                raise HTTPException(status_code=409, detail="session is terminal")
            result = self._finish(session, success=False, reason="abandoned")
            result["status"] = "abandoned"
            session.status = "abandoned"
            return result

    def _finish(self, session: HitlSession, success: bool, reason: str) -> dict:
        """Attach terminal feedback, build the episode, and train the run."""
        session.feedback = FeedbackRecord(session.session_id, success, reason)
        session.status = "succeeded" if success else "failed"
        session.dialogue_over = True
        experiences = self.build_experiences(session, success)
        trainer = session.run.trainer
        with session.run.lock:
            trainer.ingest_real_episode(experiences)
            self._checkpoint_run(session.run)
        episode_return = float(sum(e.r for e in experiences))
        self._log({
            "type": "episode_committed", "session": session.session_id,
            "run": session.run.name, "success": success, "reason": reason,
            "experiences": [
                {"s": e.s.tolist(), "a": e.a, "r": e.r, "a_u": e.a_u,
                 "s_next": e.s_next.tolist(), "terminal": e.terminal}
                for e in experiences
            ],
        })
        result = {
            "status": session.status,
            "reason": reason,
            "committed_tuples": len(experiences),
            "episode_return": episode_return,
            "epoch": trainer.epoch,
        }
        self._push_event(session, {"event": "session_closed", **result})
        return result

    def build_experiences(self, session: HitlSession, success: bool) -> list[Experience]:
        """Replay the transcript through the state tracker and attach rewards.

        If the dialogue ended on an agent turn (the human went straight to
        feedback), a synthetic closing user act completes the last transition.
        """
        trainer = session.run.trainer
        acts = [
            (entry["actor"], DialogueAct.from_dict(entry["act"]))
            for entry in session.transcript
        ]
        if acts and acts[-1][0] == "agent":
            acts.append(("user", DialogueAct(Intent.THANKS if success else Intent.CLOSING)))
        state = new_dialogue_state(trainer.kb)
        experiences: list[Experience] = []
        agent_idx = 0
        i = 0
        while i < len(acts):
            actor, act = acts[i]
            if actor == "user":
                state = update(state, act, "user", trainer.kb)
                i += 1
                continue
            s_vec = encode(state, trainer.encoder_config)
            action_id = session.agent_action_ids[agent_idx]
            agent_idx += 1
            state = update(state, act, "agent", trainer.kb)
            user_act = None
            if i + 1 < len(acts) and acts[i + 1][0] == "user":
                user_act = acts[i + 1][1]
                state = update(state, user_act, "user", trainer.kb)
                i += 2
            else:
                i += 1
            terminal = agent_idx == len(session.agent_action_ids)
            if terminal:
                state = signal_termination(state)
            reward = reward_for(trainer.reward_config, terminal, success)
            a_u = (
                action_id_for(user_act, trainer.user_actions)
                if user_act is not None
                else action_id_for(DialogueAct(Intent.CLOSING), trainer.user_actions)
            )
            experiences.append(
                Experience(
                    s=s_vec, a=action_id, r=reward, a_u=a_u,
                    s_next=encode(state, trainer.encoder_config), terminal=terminal,
                )
            )
        return experiences

    def session_status(self, session_id: str) -> dict:
        session = self._get(session_id)
        return {
            "session_id": session.session_id,
            "run": session.run.name,
            "status": session.status,
            "turn_count": session.state.turn_count,
            "max_turns": session.run.trainer.config.max_turns,
            "dialogue_over": session.dialogue_over,
            "goal": session.goal.to_dict(),
            "transcript": session.transcript,
        }

    def runs_status(self) -> dict:
        return {
            "runs": [
                {
                    "name": run.name,
                    "variant": run.trainer.config.variant.value,
                    "planning_steps": run.trainer.config.planning_steps,
                    "epoch": run.trainer.epoch,
                    "real_buffer": len(run.trainer.real_buffer),
                    "sim_buffer": len(run.trainer.sim_buffer),
                    "sessions_served": run.sessions_served,
                }
                for run in self.runs.values()
            ]
        }

    def domain_info(self) -> dict:
        some_run = next(iter(self.runs.values()))
        return {
            "intents": [i.value for i in INTENTS],
            "slots": [s.value for s in SLOTS],
            "agent_actions": [
                {"id": t.id, "intent": t.intent.value,
                 "slot": t.slot.value if t.slot else None}
                for t in some_run.trainer.agent_actions
            ],
            "user_actions": [
                {"id": t.id, "intent": t.intent.value,
                 "slot": t.slot.value if t.slot else None}
                for t in some_run.trainer.user_actions
            ],
            "max_turns": some_run.trainer.config.max_turns,
        }


def create_app(service: HitlService, static_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="Dialogue HITL training service")
    prefix = f"/{API_VERSION}"

    @app.get(prefix + "/domain")
    def get_domain():
        return service.domain_info()

    @app.get(prefix + "/runs")
    def get_runs():
        return service.runs_status()

    @app.post(prefix + "/sessions")
    def create_session():
        session = service.create_session()
        return {
            "session_id": session.session_id,
            "run": session.run.name,
            "goal": session.goal.to_dict(),
            "max_turns": session.run.trainer.config.max_turns,
            "opening_prompt": (
                "You want to book movie tickets. Your constraints and the "
                "information you still need are shown on the goal card. "
                "Start the conversation!"
            ),
        }

    @app.get(prefix + "/sessions/{session_id}")
    def get_session(session_id: str):
        return service.session_status(session_id)

    @app.post(prefix + "/sessions/{session_id}/turns")
    def post_turn(session_id: str, request: TurnRequest):
        return service.post_user_turn(session_id, request.turn_id, request.act.to_act())

    @app.post(prefix + "/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, request: FeedbackRequest):
        return service.post_feedback(session_id, request.success)

    @app.post(prefix + "/sessions/{session_id}/abandon")
    def abandon(session_id: str):
        return service.abandon_session(session_id)

    @app.get(prefix + "/sessions/{session_id}/stream")
    async def stream(session_id: str):
        session = service._get(session_id)
        if session.events is None:
            session.events = asyncio.Queue()

        async def event_source():
            while True:
                try:
                    event = await asyncio.wait_for(session.events.get(), timeout=30.0)
                except asyncio.TimeoutError:
                    yield ": keep-alive\n\n"
                    continue
                yield f"data: {json.dumps(event)}\n\n"
                if event.get("event") == "session_closed":
                    break

        return StreamingResponse(event_source(), media_type="text/event-stream")

    if static_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static_dir = candidate if candidate.exists() else None
    if static_dir is not None and Path(static_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app
