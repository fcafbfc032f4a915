"""Uniform chat-completion interface with tool calling.

Two backends: a remote HTTP client speaking the de-facto chat-completions
wire format, and a scripted backend that replays a fixed step sequence for
tests and deterministic dataset generation.  Every message carries a token
count from the configured counter.
"""

from __future__ import annotations

import copy
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import httpx

from .counting import TokenCounter, heuristic_counter
from .errors import (
    BudgetExceededError,
    MalformedResponseError,
    ScriptExhaustedError,
    ScriptExpectationError,
    TransportError,
)

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant", "tool")


@dataclass
class ToolCall:
    id: str
    tool_name: str
    arguments: dict

    def to_dict(self) -> dict:
        return {"id": self.id, "tool_name": self.tool_name, "arguments": self.arguments}

    @classmethod
    def from_dict(cls, data: dict) -> "ToolCall":
        return cls(id=data["id"], tool_name=data["tool_name"], arguments=data["arguments"])


@dataclass
class ChatMessage:
    role: str
    content: str = ""
    tool_calls: list[ToolCall] | None = None
    tool_call_id: str | None = None
    token_count: int = 0

    def to_dict(self) -> dict:
        out: dict = {"role": self.role, "content": self.content, "token_count": self.token_count}
        if self.tool_calls is not None:
            out["tool_calls"] = [tc.to_dict() for tc in self.tool_calls]
        if self.tool_call_id is not None:
            out["tool_call_id"] = self.tool_call_id
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ChatMessage":
        return cls(
            role=data["role"],
            content=data.get("content", ""),
            tool_calls=[ToolCall.from_dict(tc) for tc in data["tool_calls"]]
            if data.get("tool_calls") is not None else None,
            tool_call_id=data.get("tool_call_id"),
            token_count=data.get("token_count", 0),
        )


def serialize_tool_calls(tool_calls: Sequence[ToolCall]) -> str:
    return json.dumps(
        [{"id": tc.id, "tool_name": tc.tool_name, "arguments": tc.arguments} for tc in tool_calls],
        ensure_ascii=False, sort_keys=True,
    )


def message_token_count(msg: ChatMessage, counter: TokenCounter) -> int:
    total = counter(msg.content)
    if msg.role == "assistant" and msg.tool_calls:
        total += counter(serialize_tool_calls(msg.tool_calls))
    return total


def stamp_token_count(msg: ChatMessage, counter: TokenCounter) -> ChatMessage:
    msg.token_count = message_token_count(msg, counter)
    return msg


def validate_messages(messages: Sequence[ChatMessage]) -> None:
    """Role well-formedness: tool messages must answer the preceding assistant call."""
    if not messages:
        raise ValueError("messages must be non-empty")
    pending_ids: set[str] = set()
    for i, msg in enumerate(messages):
        if msg.role not in ROLES:
            raise ValueError(f"message #{i}: unknown role {msg.role!r}")
        if msg.role == "tool":
            if msg.tool_call_id is None or msg.tool_call_id not in pending_ids:
                raise ValueError(
                    f"message #{i}: tool message does not answer a preceding assistant tool call")
        elif msg.role == "assistant":
            pending_ids = {tc.id for tc in msg.tool_calls or []}
        else:
            pending_ids = set()
        if msg.role != "assistant" and msg.tool_calls:
            raise ValueError(f"message #{i}: only assistant messages may carry tool_calls")


class Backend(Protocol):
    def complete(self, messages: Sequence[ChatMessage], tool_schemas: Sequence[dict]) -> ChatMessage: ...


@dataclass
class BackendConfig:
    kind: str  # "remote" | "scripted"
    endpoint: str | None = None
    credential_env: str = "CHEMCHAT_API_KEY"
    model: str | None = None
    script_path: str | None = None
    timeout_s: float = 60.0
    max_retries: int = 3
    temperature: float = 0.0
    max_output_tokens: int | None = None
    request_cap: int | None = None  # per-dialogue budget

    def __post_init__(self):
        if self.kind not in ("remote", "scripted"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote backend requires an endpoint")
        if self.kind == "scripted" and not self.script_path:
            raise ValueError("scripted backend requires a script_path")


class _BudgetMixin:
    """Atomic per-backend request counter with an optional cap."""

    def _init_budget(self, request_cap: int | None) -> None:
        self._request_cap = request_cap
        self._requests = 0
        self._lock = threading.Lock()

    def _charge(self) -> None:
        with self._lock:
            self._requests += 1
            if self._request_cap is not None and self._requests > self._request_cap:
                raise BudgetExceededError(
                    f"request cap {self._request_cap} exceeded")

    @property
    def request_count(self) -> int:
        return self._requests


class ScriptedBackend(_BudgetMixin):
    """Strict-sequence replay backend.

    A script is a list of steps ``{"expect": {"contains": ...}?, "respond":
    {"content": ..., "tool_calls": [...]}}``.  The cursor advances one step
    per complete() call; exhausting the script raises.
    """

    def __init__(self, steps: Sequence[dict], counter: TokenCounter = heuristic_counter,
                 request_cap: int | None = None):
        self.steps = list(steps)
        self.counter = counter
        self._cursor = 0
        self._init_budget(request_cap)

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "ScriptedBackend":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")), **kwargs)

    def reset(self) -> None:
        self._cursor = 0

    @property
    def exhausted(self) -> bool:
        return self._cursor >= len(self.steps)

    def complete(self, messages: Sequence[ChatMessage], tool_schemas: Sequence[dict] = ()) -> ChatMessage:
        self._charge()
        validate_messages(messages)
        if self._cursor >= len(self.steps):
            raise ScriptExhaustedError(f"script exhausted after {len(self.steps)} steps")
        step = self.steps[self._cursor]
        expect = step.get("expect")
        if expect:
            last = messages[-1]
            needle = expect.get("contains")
            if needle is not None and needle not in last.content:
                raise ScriptExpectationError(
                    f"step #{self._cursor}: expected last message to contain {needle!r}")
            want_role = expect.get("role")
            if want_role is not None and last.role != want_role:
                raise ScriptExpectationError(
                    f"step #{self._cursor}: expected last role {want_role!r}, got {last.role!r}")
        self._cursor += 1
        respond = step["respond"]
        msg = ChatMessage(
            role="assistant",
            content=respond.get("content", ""),
            tool_calls=[ToolCall.from_dict(tc) for tc in respond["tool_calls"]]
            if respond.get("tool_calls") else None,
        )
        return stamp_token_count(msg, self.counter)


class FunctionBackend(_BudgetMixin):
    """Deterministic backend computing the reply from the input messages.

    Used by replay suites that need input-dependent but reproducible output
    (e.g. a summary stub that condenses whatever it is given).
    """

    def __init__(self, fn: Callable[[Sequence[ChatMessage], Sequence[dict]], ChatMessage | str | dict],
                 counter: TokenCounter = heuristic_counter, request_cap: int | None = None):
        self.fn = fn
        self.counter = counter
        self._init_budget(request_cap)

    def complete(self, messages: Sequence[ChatMessage], tool_schemas: Sequence[dict] = ()) -> ChatMessage:
        self._charge()
        validate_messages(messages)
        out = self.fn(messages, tool_schemas)
        if isinstance(out, str):
            msg = ChatMessage(role="assistant", content=out)
        elif isinstance(out, dict):
            msg = ChatMessage(
                role="assistant", content=out.get("content", ""),
                tool_calls=[ToolCall.from_dict(tc) for tc in out["tool_calls"]]
                if out.get("tool_calls") else None)
        else:
            msg = out
        return stamp_token_count(msg, self.counter)


class RemoteBackend(_BudgetMixin):
    """HTTP chat-completions client with retries and exponential backoff."""

    def __init__(self, config: BackendConfig, counter: TokenCounter = heuristic_counter,
                 client: httpx.Client | None = None, sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.counter = counter
        self._client = client or httpx.Client(timeout=config.timeout_s)
        self._sleep = sleep
        self._init_budget(config.request_cap)

    def _headers(self) -> dict:
        key = os.environ.get(self.config.credential_env, "")
        return {"Authorization": f"Bearer {key}"} if key else {}

    @staticmethod
    def serialize_request(messages: Sequence[ChatMessage], tool_schemas: Sequence[dict],
                          config: BackendConfig) -> dict:
        body: dict = {
            "model": config.model,
            "temperature": config.temperature,
            "messages": [],
        }
        if config.max_output_tokens is not None:
            body["max_tokens"] = config.max_output_tokens
        for msg in messages:
            wire: dict = {"role": msg.role, "content": msg.content}
            if msg.tool_calls:
                wire["tool_calls"] = [
                    {"id": tc.id, "type": "function",
                     "function": {"name": tc.tool_name,
                                  "arguments": json.dumps(tc.arguments, ensure_ascii=False)}}
                    for tc in msg.tool_calls
                ]
            if msg.tool_call_id:
                wire["tool_call_id"] = msg.tool_call_id
            body["messages"].append(wire)
        if tool_schemas:
            body["tools"] = [{"type": "function", "function": schema} for schema in tool_schemas]
        return body

    def complete(self, messages: Sequence[ChatMessage], tool_schemas: Sequence[dict] = ()) -> ChatMessage:
        self._charge()
        validate_messages(messages)
        body = self.serialize_request(messages, tool_schemas, self.config)
        last_exc: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                resp = self._client.post(self.config.endpoint, json=body, headers=self._headers())
                if resp.status_code >= 500:
                    raise httpx.HTTPStatusError(
                        f"server error {resp.status_code}", request=resp.request, response=resp)
                resp.raise_for_status()
                return self._parse_response(resp.json())
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                if isinstance(exc, httpx.HTTPStatusError) and exc.response.status_code < 500:
                    raise TransportError(f"request rejected: {exc}") from exc
                last_exc = exc
                if attempt < self.config.max_retries:
                    self._sleep(2 ** attempt * 0.5)
        raise TransportError(f"transport failed after {self.config.max_retries + 1} attempts: {last_exc}")

    def _parse_response(self, data: dict) -> ChatMessage:
        try:
            raw = data["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"unexpected response shape: {exc}") from exc
        tool_calls = None
        if raw.get("tool_calls"):
            tool_calls = []
            for tc in raw["tool_calls"]:
                try:
                    tool_calls.append(ToolCall(
                        id=tc["id"], tool_name=tc["function"]["name"],
                        arguments=json.loads(tc["function"]["arguments"] or "{}")))
                except (KeyError, json.JSONDecodeError) as exc:
                    raise MalformedResponseError(f"bad tool call in response: {exc}") from exc
        msg = ChatMessage(role="assistant", content=raw.get("content") or "", tool_calls=tool_calls)
        return stamp_token_count(msg, self.counter)


def complete(backend: Backend, messages: Sequence[ChatMessage],
             tool_schemas: Sequence[dict] = ()) -> ChatMessage:
    """Run one completion; never mutates the input messages."""
    snapshot = copy.deepcopy(list(messages))
    return backend.complete(snapshot, tool_schemas)
