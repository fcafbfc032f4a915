"""Judging and trace-derived metrics.

Four metrics: database-consistency rate from a grounding judge, pairwise
preference with position-swap averaging, search success computed directly
from trace provenance, and per-role token accounting.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import prompts
from .agent import DialogueTrace
from .corpus import Corpus, Document
from .counting import TokenCounter, get_counter
from .errors import ChemchatError
from .gateway import Backend, ChatMessage, complete

_VERDICT_RE = re.compile(r"\[\[(True|False|Pass)\]\]")
_PREFERENCE_RE = re.compile(r"\[\[([ABC])\]\]")

TOKEN_ROLES = ("system", "user", "tool_call", "tool_output", "response")


@dataclass
class EvalCase:
    scenario_id: str
    reference_docs: list[tuple[str, str]]  # (db_name, title), at most 6

    def __post_init__(self):
        if len(self.reference_docs) > 6:
            raise ValueError("an eval case carries at most six reference documents")

    @classmethod
    def from_dict(cls, data: dict) -> "EvalCase":
        return cls(scenario_id=data["scenario_id"],
                   reference_docs=[tuple(d) for d in data["reference_doc_ids"]])


def load_eval_cases(path: str | Path) -> list[EvalCase]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [EvalCase.from_dict(d) for d in data]


@dataclass
class ConsistencyVerdict:
    value: str  # "True" | "False" | "Pass" | "parse_failure" | "error"
    raw_text: str
    case_id: str


def parse_consistency_verdict(text: str) -> str | None:
    """Last occurrence of the [[True]]/[[False]]/[[Pass]] marker, or None."""
    found = _VERDICT_RE.findall(text)
    return found[-1] if found else None


def _render_reference_docs(docs: Sequence[Document]) -> str:
    parts = []
    for doc in docs:
        body = "\n".join([doc.abstract] + [f"## {s.name}\n{s.body}" for s in doc.sections])
        parts.append(f"<|Start of factual info for {doc.title}|>\n{body}\n"
                     f"<|End of factual info for {doc.title}|>")
    return "\n\n".join(parts)


def _conversation_block(trace: DialogueTrace, label: str = "Assistant") -> str:
    lines = ["<|The Start of Assistant's Conversation with User|>"]
    for turn in trace.turns:
        lines.append(f"### User:\n{turn.user_input}")
        lines.append(f"### {label}:\n{turn.response}")
    lines.append("<|The End of Assistant's Conversation with User|>")
    return "\n".join(lines)


def judge_consistency(case: EvalCase, trace: DialogueTrace, corpus: Corpus,
                      backend: Backend) -> ConsistencyVerdict:
    """One grounding verdict per case; unparseable output gets one reprompt."""
    docs = [corpus.find_document(db, title) for db, title in case.reference_docs]
    docs = [d for d in docs if d is not None]
    system = prompts.JUDGE_CONSISTENCY.format(documents=_render_reference_docs(docs))
    messages = [ChatMessage(role="system", content=system),
                ChatMessage(role="user", content=_conversation_block(trace))]
    try:
        reply = complete(backend, messages)
        verdict = parse_consistency_verdict(reply.content)
        if verdict is None:
            retry = messages + [reply, ChatMessage(
                role="user",
                content='Your verdict marker was missing. Reply again ending with exactly '
                        '"Fact-checked: [[True]]", "Fact-checked: [[False]]", or '
                        '"Fact-checked: [[Pass]]".')]
            reply = complete(backend, retry)
            verdict = parse_consistency_verdict(reply.content)
        if verdict is None:
            return ConsistencyVerdict("parse_failure", reply.content, case.scenario_id)
        return ConsistencyVerdict(verdict, reply.content, case.scenario_id)
    except ChemchatError as exc:
        return ConsistencyVerdict("error", str(exc), case.scenario_id)


@dataclass
class PreferenceVerdict:
    case_id: str
    original: str  # "win" | "lose" | "draw" for the model under test, or failure kinds
    swapped: str
    win: float = 0.0
    lose: float = 0.0
    draw: float = 0.0


_OUTCOME = {"win": (1.0, 0.0, 0.0), "lose": (0.0, 1.0, 0.0), "draw": (0.0, 0.0, 1.0)}


def _one_orientation(first: DialogueTrace, second: DialogueTrace,
                     backend: Backend) -> str | None:
    """Judge one ordering; returns 'A', 'B', 'C', or None on parse failure."""
    def block(trace: DialogueTrace, label: str) -> str:
        lines = [f"<|The Start of Assistant {label}'s Conversation with User|>"]
        for turn in trace.turns:
            lines.append(f"### User:\n{turn.user_input}")
            lines.append(f"### Assistant {label}:\n{turn.response}")
        lines.append(f"<|The End of Assistant {label}'s Conversation with User|>")
        return "\n".join(lines)

    messages = [ChatMessage(role="system", content=prompts.JUDGE_PREFERENCE),
                ChatMessage(role="user", content=block(first, "A") + "\n\n" + block(second, "B"))]
    reply = complete(backend, messages)
    found = _PREFERENCE_RE.findall(reply.content)
    return found[-1] if found else None


def judge_preference(case: EvalCase, model_a: DialogueTrace, model_b: DialogueTrace,
                     backend: Backend) -> PreferenceVerdict:
    """Two judge calls (original + swapped order), each weighted 0.5.

    Outcomes are reported for model A, the model under test.
    """
    if len(model_a.turns) < 2 or len(model_b.turns) < 2:
        raise ValueError("preference judging needs two-turn dialogues on both sides")

    def outcome_for_a(letter: str | None, a_is_first: bool) -> str:
        if letter is None:
            return "parse_failure"
        if letter == "C":
            return "draw"
        picked_first = letter == "A"
        return "win" if picked_first == a_is_first else "lose"

    original = outcome_for_a(_one_orientation(model_a, model_b, backend), True)
    swapped = outcome_for_a(_one_orientation(model_b, model_a, backend), False)
    win = lose = draw = 0.0
    valid = [o for o in (original, swapped) if o in _OUTCOME]
    for o in valid:
        w, l, d = _OUTCOME[o]
        win += 0.5 * w
        lose += 0.5 * l
        draw += 0.5 * d
    return PreferenceVerdict(case_id=case.scenario_id, original=original,
                             swapped=swapped, win=win, lose=lose, draw=draw)


def search_success(trace: DialogueTrace, case: EvalCase) -> bool:
    """True iff trace provenance touches a reference document. No LLM involved."""
    touched: set[tuple[str, str]] = set()
    for turn in trace.turns:
        for _, outcome in turn.interactions:
            for ref in outcome.provenance:
                touched.add((ref.db_name, ref.document_title))
            for target in outcome.doc_targets:
                touched.add(tuple(target))
    return any(tuple(ref) in touched for ref in case.reference_docs)


def token_breakdown(traces: Sequence[DialogueTrace]) -> dict[str, float]:
    """Per-role mean token counts per dialogue."""
    if not traces:
        raise ValueError("token_breakdown needs at least one trace")
    sums = {role: 0 for role in TOKEN_ROLES}
    for trace in traces:
        for role, value in trace.token_breakdown().items():
            sums[role] += value
    return {role: sums[role] / len(traces) for role in TOKEN_ROLES}


@dataclass
class MetricReport:
    db_consistency_pct: float | None = None
    consistency_counts: dict[str, int] = field(default_factory=dict)
    preference: dict[str, float] | None = None  # W/L/D percentages
    search_success_pct: float | None = None
    avg_response_tokens: float | None = None
    token_means: dict[str, float] | None = None

    def to_dict(self) -> dict:
        return {
            "db_consistency_pct": self.db_consistency_pct,
            "consistency_counts": self.consistency_counts,
            "preference": self.preference,
            "search_success_pct": self.search_success_pct,
            "avg_response_tokens": self.avg_response_tokens,
            "token_means": self.token_means,
        }

    def render_table(self) -> str:
        rows = []
        if self.db_consistency_pct is not None:
            rows.append(("DB Consist. (% Success)", f"{self.db_consistency_pct:.1f}"))
        if self.preference is not None:
            rows.append(("Preference (W / L / D)",
                         f"{self.preference['win']:.1f} / {self.preference['lose']:.1f} / "
                         f"{self.preference['draw']:.1f}"))
        if self.search_success_pct is not None:
            rows.append(("Search Rate (% Success)", f"{self.search_success_pct:.1f}"))
        if self.avg_response_tokens is not None:
            rows.append(("Response Len. (Avg. Tokens)", f"{self.avg_response_tokens:.2f}"))
        if self.token_means is not None:
            for role in TOKEN_ROLES:
                rows.append((f"Tokens/{role}", f"{self.token_means[role]:.1f}"))
        width = max(len(r[0]) for r in rows) if rows else 0
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def aggregate_consistency(verdicts: Sequence[ConsistencyVerdict]) -> tuple[float | None, dict[str, int]]:
    """Rate = 100 * True / (True + False + Pass); failures reported separately."""
    counts = {"True": 0, "False": 0, "Pass": 0, "parse_failure": 0, "error": 0}
    for v in verdicts:
        counts[v.value] = counts.get(v.value, 0) + 1
    denom = counts["True"] + counts["False"] + counts["Pass"]
    rate = 100.0 * counts["True"] / denom if denom else None
    return rate, counts


def aggregate_preference(verdicts: Sequence[PreferenceVerdict],
                         resolution: str = "fractional") -> dict[str, float]:
    """W/L/D percentages; 'majority' resolves each case to its dominant outcome."""
    if resolution not in ("fractional", "majority"):
        raise ValueError("resolution must be 'fractional' or 'majority'")
    if not verdicts:
        return {"win": 0.0, "lose": 0.0, "draw": 0.0}
    win = lose = draw = 0.0
    for v in verdicts:
        if resolution == "fractional":
            win, lose, draw = win + v.win, lose + v.lose, draw + v.draw
        else:
            if v.win > v.lose and v.win > v.draw:
                win += 1
            elif v.lose > v.win and v.lose > v.draw:
                lose += 1
            else:
                draw += 1
    n = len(verdicts)
    return {"win": 100.0 * win / n, "lose": 100.0 * lose / n, "draw": 100.0 * draw / n}


def average_response_tokens(traces: Sequence[DialogueTrace],
                            counter: TokenCounter | None = None) -> float:
    if not traces:
        raise ValueError("need at least one trace")
    totals = []
    for trace in traces:
        totals.append(sum(t.token_breakdown.get("response", 0) for t in trace.turns))
    return sum(totals) / len(totals)
