"""The orchestration loop: user turn in, tool interactions, final answer out.

Each turn calls the backend, executes returned tool calls against the
registry, feeds results back as tool messages, and repeats until the backend
answers with plain text or the per-turn tool budget runs out (then a final
completion is forced with tools disabled).  Everything is recorded in a
trace suitable for training-data export.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import prompts
from .counting import TokenCounter, heuristic_counter
from .errors import ChemchatError, ToolValidationError
from .gateway import Backend, ChatMessage, ToolCall, complete, serialize_tool_calls, stamp_token_count
from .tools import SubLlmRecord, ToolOutcome, ToolRegistry


@dataclass
class AgentConfig:
    registry_mode: str = "full"
    system_prompt_id: str = "agent_main"
    max_tool_calls_per_turn: int = 12
    max_turns: int = 4
    bm25_first_policy: bool = True

    def __post_init__(self):
        if self.max_tool_calls_per_turn < 1:
            raise ValueError("max_tool_calls_per_turn must be >= 1")

    def to_dict(self) -> dict:
        return {
            "registry_mode": self.registry_mode,
            "system_prompt_id": self.system_prompt_id,
            "max_tool_calls_per_turn": self.max_tool_calls_per_turn,
            "max_turns": self.max_turns,
            "bm25_first_policy": self.bm25_first_policy,
        }


@dataclass
class TurnRecord:
    user_input: str
    interactions: list[tuple[ToolCall, ToolOutcome]]
    response: str
    token_breakdown: dict[str, int]
    policy_deviation: bool = False  # first tool call was not bm25_search
    budget_exhausted: bool = False

    def to_dict(self) -> dict:
        return {
            "user_input": self.user_input,
            "interactions": [
                {"call": call.to_dict(), "outcome": outcome.to_dict()}
                for call, outcome in self.interactions
            ],
            "response": self.response,
            "token_breakdown": self.token_breakdown,
            "policy_deviation": self.policy_deviation,
            "budget_exhausted": self.budget_exhausted,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TurnRecord":
        return cls(
            user_input=data["user_input"],
            interactions=[
                (ToolCall.from_dict(it["call"]), ToolOutcome.from_dict(it["outcome"]))
                for it in data["interactions"]
            ],
            response=data["response"],
            token_breakdown=dict(data["token_breakdown"]),
            policy_deviation=data.get("policy_deviation", False),
            budget_exhausted=data.get("budget_exhausted", False),
        )


@dataclass
class DialogueTrace:
    trace_id: str
    scenario_ref: str | None
    turns: list[TurnRecord]
    sub_llm_pairs: list[SubLlmRecord]
    config: dict
    system_tokens: int
    started_at: float
    finished_at: float
    failed: bool = False
    failure_reason: str | None = None

    def token_breakdown(self) -> dict[str, int]:
        """Per-role totals; categories partition the trace's tokens."""
        totals = {"system": self.system_tokens, "user": 0, "tool_call": 0,
                  "tool_output": 0, "response": 0}
        for turn in self.turns:
            for role in ("user", "tool_call", "tool_output", "response"):
                totals[role] += turn.token_breakdown.get(role, 0)
        return totals

    def to_dict(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "scenario_ref": self.scenario_ref,
            "turns": [t.to_dict() for t in self.turns],
            "sub_llm_pairs": [p.to_dict() for p in self.sub_llm_pairs],
            "config": self.config,
            "system_tokens": self.system_tokens,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "failed": self.failed,
            "failure_reason": self.failure_reason,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DialogueTrace":
        return cls(
            trace_id=data["trace_id"],
            scenario_ref=data.get("scenario_ref"),
            turns=[TurnRecord.from_dict(t) for t in data["turns"]],
            sub_llm_pairs=[SubLlmRecord.from_dict(p) for p in data.get("sub_llm_pairs", [])],
            config=data.get("config", {}),
            system_tokens=data.get("system_tokens", 0),
            started_at=data.get("started_at", 0.0),
            finished_at=data.get("finished_at", 0.0),
            failed=data.get("failed", False),
            failure_reason=data.get("failure_reason"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


class TurnFailure(ChemchatError):
    """Backend/tool failure mid-turn; carries the partial interaction list."""

    def __init__(self, message: str, interactions: list[tuple[ToolCall, ToolOutcome]]):
        super().__init__(message)
        self.interactions = interactions


def serialized_interactions_messages(turn: TurnRecord) -> list[ChatMessage]:
    """The assistant/tool message pairs representing a turn's interactions."""
    messages: list[ChatMessage] = []
    i = 0
    interactions = turn.interactions
    while i < len(interactions):
        # group consecutive calls issued by one assistant message (stored flat;
        # each interaction was a single-call assistant step in this loop)
        call, outcome = interactions[i]
        messages.append(ChatMessage(role="assistant", content="", tool_calls=[call]))
        messages.append(ChatMessage(role="tool", content=outcome.rendered_text,
                                    tool_call_id=call.id))
        i += 1
    return messages


def run_turn(history: list[ChatMessage], user_text: str, backend: Backend,
             registry: ToolRegistry, config: AgentConfig,
             counter: TokenCounter = heuristic_counter,
             on_event: Callable[[str, dict], None] | None = None) -> TurnRecord:
    """Run one user turn to completion, returning the full record.

    ``history`` is mutated in place: the user message, every intermediate
    assistant/tool message, and the final answer are appended.
    """
    if not user_text.strip():
        raise ValueError("user input must be non-empty")
    emit = on_event or (lambda kind, payload: None)
    user_msg = stamp_token_count(ChatMessage(role="user", content=user_text), counter)
    history.append(user_msg)

    interactions: list[tuple[ToolCall, ToolOutcome]] = []
    tokens = {"user": user_msg.token_count, "tool_call": 0, "tool_output": 0, "response": 0}
    policy_deviation = False
    budget_exhausted = False
    retried_calls: set[str] = set()
    response_text = ""

    while True:
        over_budget = len(interactions) >= config.max_tool_calls_per_turn
        schemas = [] if over_budget else registry.schemas()
        try:
            assistant = complete(backend, history, schemas)
        except ChemchatError as exc:
            raise TurnFailure(f"backend failed: {exc}", interactions) from exc
        history.append(assistant)
        if not assistant.tool_calls:
            response_text = assistant.content
            tokens["response"] = counter(response_text)
            emit("final_response", {"text": response_text,
                                    "token_count": assistant.token_count})
            break
        if over_budget:
            # backend ignored the disabled tools; drop the calls and force text
            history.pop()
            nudge = stamp_token_count(ChatMessage(
                role="user",
                content="Tool budget for this turn is exhausted. "
                        "Answer now from the information gathered so far."), counter)
            history.append(nudge)
            try:
                assistant = complete(backend, history, [])
            except ChemchatError as exc:
                raise TurnFailure(f"backend failed on forced final: {exc}", interactions) from exc
            history.append(assistant)
            response_text = assistant.content
            tokens["response"] = counter(response_text)
            emit("final_response", {"text": response_text,
                                    "token_count": assistant.token_count})
            break
        tokens["tool_call"] += counter(serialize_tool_calls(assistant.tool_calls))
        for call in assistant.tool_calls:
            if (config.bm25_first_policy and not interactions
                    and not policy_deviation and call.tool_name != "bm25_search"):
                policy_deviation = True
            emit("tool_call", {"id": call.id, "tool_name": call.tool_name,
                               "arguments": call.arguments})
            try:
                outcome = registry.dispatch(call)
            except ChemchatError as exc:
                if not _is_tool_input_error(exc):
                    raise TurnFailure(f"tool {call.tool_name} failed: {exc}",
                                      interactions) from exc
                if call.tool_name in retried_calls:
                    raise TurnFailure(
                        f"tool {call.tool_name} rejected input twice: {exc}",
                        interactions) from exc
                retried_calls.add(call.tool_name)
                outcome = ToolOutcome(
                    tool_name=call.tool_name,
                    rendered_text=f"Error: {exc}",
                    token_count=counter(f"Error: {exc}"),
                )
            interactions.append((call, outcome))
            tokens["tool_output"] += outcome.token_count
            tool_msg = ChatMessage(role="tool", content=outcome.rendered_text,
                                   tool_call_id=call.id, token_count=outcome.token_count)
            history.append(tool_msg)
            emit("tool_result", {
                "id": call.id, "tool_name": call.tool_name,
                "text": outcome.rendered_text, "token_count": outcome.token_count,
                "provenance": [[r.db_name, r.document_title, r.section_name]
                               for r in outcome.provenance],
            })
        if len(interactions) >= config.max_tool_calls_per_turn:
            budget_exhausted = True

    return TurnRecord(
        user_input=user_text,
        interactions=interactions,
        response=response_text,
        token_breakdown=tokens,
        policy_deviation=policy_deviation,
        budget_exhausted=budget_exhausted,
    )


def _is_tool_input_error(exc: Exception) -> bool:
    from .errors import (EmptyQueryError, UnknownAgencyError, UnknownDocumentError,
                         UnknownSectionError)
    return isinstance(exc, (ToolValidationError, EmptyQueryError, UnknownDocumentError,
                            UnknownSectionError, UnknownAgencyError))


class UserSource:
    """Sequence-of-strings adapter; simulators provide the same interface."""

    def __init__(self, inputs: Sequence[str]):
        self._inputs = list(inputs)
        self._i = 0

    def next_input(self, turns: list[TurnRecord]) -> str | None:
        if self._i >= len(self._inputs):
            return None
        text = self._inputs[self._i]
        self._i += 1
        return text


def run_dialogue(backend: Backend, registry: ToolRegistry, config: AgentConfig,
                 user_source, *, scenario_ref: str | None = None,
                 counter: TokenCounter = heuristic_counter,
                 clock: Callable[[], float] = time.time,
                 trace_id: str | None = None,
                 on_event: Callable[[str, dict], None] | None = None) -> DialogueTrace:
    """Roll a whole dialogue, threading history through run_turn."""
    if isinstance(user_source, (list, tuple)):
        user_source = UserSource(user_source)
    started = clock()
    system_msg = stamp_token_count(
        ChatMessage(role="system", content=prompts.get_prompt(config.system_prompt_id)), counter)
    history: list[ChatMessage] = [system_msg]
    turns: list[TurnRecord] = []
    failed = False
    failure_reason = None
    while len(turns) < config.max_turns:
        user_text = user_source.next_input(turns)
        if user_text is None:
            break
        try:
            turn = run_turn(history, user_text, backend, registry, config,
                            counter=counter, on_event=on_event)
        except TurnFailure as exc:
            failed = True
            failure_reason = str(exc)
            turns.append(TurnRecord(
                user_input=user_text, interactions=exc.interactions, response="",
                token_breakdown={"user": counter(user_text), "tool_call": 0,
                                 "tool_output": 0, "response": 0}))
            break
        turns.append(turn)
    sub_llm_pairs = [
        it_outcome.sub_llm_io
        for turn in turns
        for _, it_outcome in turn.interactions
        if it_outcome.sub_llm_io is not None
    ]
    return DialogueTrace(
        trace_id=trace_id or uuid.uuid4().hex,
        scenario_ref=scenario_ref,
        turns=turns,
        sub_llm_pairs=sub_llm_pairs,
        config=config.to_dict(),
        system_tokens=system_msg.token_count,
        started_at=started,
        finished_at=clock(),
        failed=failed,
        failure_reason=failure_reason,
    )
