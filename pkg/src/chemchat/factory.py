"""Scenario store, augmentation, user simulation, and SFT dataset export.

Augmentation samples exemplars from the human-written pool only, asks a
backend for new scenarios, and rejects candidates whose word-trigram overlap
with everything already kept exceeds the threshold.  Dataset generation rolls
one dialogue per scenario and exports three training streams: dialogues,
summary pairs, and QA pairs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
import string
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import prompts
from .agent import AgentConfig, DialogueTrace, run_dialogue
from .counting import TokenCounter, heuristic_counter
from .errors import ChemchatError
from .gateway import Backend, ChatMessage, complete, stamp_token_count, validate_messages

logger = logging.getLogger(__name__)

NGRAM_THRESHOLD = 0.15
NGRAM_N = 3


@dataclass
class Scenario:
    persona: str
    situation: str
    intention: str
    question: str
    origin: str = "human"  # "human" | "generated"
    id: str = ""

    def __post_init__(self):
        for name in ("persona", "situation", "intention", "question"):
            if not getattr(self, name).strip():
                raise ValueError(f"scenario field {name!r} must be non-empty")
        if not self.id:
            blob = "\x1f".join([self.persona, self.situation, self.intention, self.question])
            self.id = hashlib.sha1(blob.encode("utf-8")).hexdigest()[:12]

    def text(self) -> str:
        return " ".join([self.persona, self.situation, self.intention, self.question])

    def to_dict(self) -> dict:
        return {"persona": self.persona, "situation": self.situation,
                "intention": self.intention, "question": self.question,
                "origin": self.origin, "id": self.id}

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return cls(persona=data["persona"], situation=data["situation"],
                   intention=data["intention"], question=data["question"],
                   origin=data.get("origin", "human"), id=data.get("id", ""))


def load_scenarios(path: str | Path) -> list[Scenario]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [Scenario.from_dict(d) for d in data]


def save_scenarios(scenarios: Sequence[Scenario], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([s.to_dict() for s in scenarios], ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")


_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


def _ngrams(text: str, n: int = NGRAM_N) -> set[tuple[str, ...]]:
    words = text.lower().translate(_PUNCT_TABLE).split()
    if len(words) < n:
        return {(w,) for w in words}
    return {tuple(words[i:i + n]) for i in range(len(words) - n + 1)}


def ngram_overlap(candidate: Scenario, references: Sequence[Scenario]) -> float:
    """|candidate n-grams ∩ union of reference n-grams| / |candidate n-grams|.

    Word trigrams over the concatenated four fields, lowercased and with
    punctuation stripped; candidates shorter than n words fall back to
    unigrams (reference texts are then compared at the unigram level too).
    """
    cand = _ngrams(candidate.text())
    if not cand or not references:
        return 0.0
    unigram_fallback = all(len(g) == 1 for g in cand)
    ref_grams: set[tuple[str, ...]] = set()
    for ref in references:
        ref_grams |= _ngrams(ref.text(), 1 if unigram_fallback else NGRAM_N)
    return len(cand & ref_grams) / len(cand)


@dataclass
class TurnPlan:
    target_turns: int
    probabilities: tuple[tuple[int, float], ...] = ((2, 0.7), (3, 0.2), (4, 0.1))


def sample_turn_count(rng: random.Random,
                      probabilities: Sequence[tuple[int, float]] = ((2, 0.7), (3, 0.2), (4, 0.1))
                      ) -> int:
    total = sum(p for _, p in probabilities)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"turn probabilities must sum to 1, got {total}")
    x = rng.random()
    acc = 0.0
    for turns, p in probabilities:
        acc += p
        if x < acc:
            return turns
    return probabilities[-1][0]


def _parse_scenario_batch(content: str) -> list[Scenario]:
    data = json.loads(content)
    if isinstance(data, dict):
        data = data.get("scenarios", [])
    out = []
    for item in data:
        out.append(Scenario(
            persona=item["persona"], situation=item["situation"],
            intention=item["intention"], question=item["question"],
            origin="generated"))
    return out


@dataclass
class AugmentResult:
    scenarios: list[Scenario]
    attempts: int
    rejected: int
    budget_exhausted: bool = False


def augment_scenarios(pool: Sequence[Scenario], chem_names: Sequence[str], count: int,
                      backend: Backend, seed: int, *, batch_size: int = 10,
                      max_attempts: int = 50, threshold: float = NGRAM_THRESHOLD,
                      chem_slice: int = 20, language: str | None = None) -> AugmentResult:
    """Generate `count` new scenarios via few-shot prompting plus dedup."""
    if not pool:
        raise ValueError("exemplar pool must be non-empty")
    rng = random.Random(seed)
    human_pool = [s for s in pool if s.origin == "human"] or list(pool)
    accepted: list[Scenario] = []
    references = list(pool)
    attempts = 0
    rejected = 0
    directive = f"Write in {language}." if language else ""
    while len(accepted) < count and attempts < max_attempts:
        attempts += 1
        k = rng.randint(3, min(30, max(3, len(human_pool))))
        exemplars = rng.sample(human_pool, min(k, len(human_pool)))
        names = rng.sample(list(chem_names), min(chem_slice, len(chem_names))) if chem_names else []
        system = prompts.SCENARIO_GENERATION.format(
            chem_names="\n".join(f"- {n}" for n in names) or "- (none)",
            language_directive=directive, batch_size=batch_size)
        user = json.dumps({"scenarios": [
            {"persona": s.persona, "situation": s.situation,
             "intention": s.intention, "question": s.question} for s in exemplars
        ]}, ensure_ascii=False)
        messages = [ChatMessage(role="system", content=system),
                    ChatMessage(role="user", content=user)]
        try:
            reply = complete(backend, messages)
            candidates = _parse_scenario_batch(reply.content)
        except (ChemchatError, json.JSONDecodeError, KeyError, ValueError) as exc:
            logger.warning("scenario batch #%d skipped: %s", attempts, exc)
            continue
        for cand in candidates:
            if len(accepted) >= count:
                break
            if ngram_overlap(cand, references) > threshold:
                rejected += 1
                continue
            accepted.append(cand)
            references.append(cand)
    return AugmentResult(
        scenarios=accepted, attempts=attempts, rejected=rejected,
        budget_exhausted=len(accepted) < count)


class SimulatedUser:
    """Persona-driven user source backed by an LLM.

    Turn 1 replays the scenario's scripted initial question verbatim; later
    turns ask the backend for a follow-up given the (question, response)
    history.  The agent never sees the scenario fields.
    """

    def __init__(self, scenario: Scenario, backend: Backend, max_turns: int = 4):
        self.scenario = scenario
        self.backend = backend
        self.max_turns = max_turns

    def next_input(self, turns: list) -> str | None:
        if len(turns) >= self.max_turns:
            return None
        if not turns:
            return self.scenario.question
        system = prompts.USER_SIMULATOR.format(
            persona=self.scenario.persona, situation=self.scenario.situation,
            intention=self.scenario.intention, question=self.scenario.question)
        messages = [ChatMessage(role="system", content=system)]
        for turn in turns:
            if turn is not turns[0]:
                messages.append(ChatMessage(role="assistant", content=turn.user_input))
            messages.append(ChatMessage(role="user", content=turn.response))
        reply = complete(self.backend, messages)
        return reply.content


def simulate_user(scenario: Scenario, history: Sequence[tuple[str, str]],
                  backend: Backend) -> str:
    """Next user utterance given (user, agent) exchange pairs so far."""
    if not history:
        return scenario.question
    system = prompts.USER_SIMULATOR.format(
        persona=scenario.persona, situation=scenario.situation,
        intention=scenario.intention, question=scenario.question)
    messages = [ChatMessage(role="system", content=system)]
    for i, (user_text, agent_text) in enumerate(history):
        if i > 0:
            messages.append(ChatMessage(role="assistant", content=user_text))
        messages.append(ChatMessage(role="user", content=agent_text))
    reply = complete(backend, messages)
    return reply.content


@dataclass
class SftRecord:
    kind: str  # "dialogue" | "summary_pair" | "qa_pair"
    messages: list[ChatMessage]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "messages": [m.to_dict() for m in self.messages],
                "metadata": self.metadata}

    @classmethod
    def from_dict(cls, data: dict) -> "SftRecord":
        return cls(kind=data["kind"],
                   messages=[ChatMessage.from_dict(m) for m in data["messages"]],
                   metadata=data.get("metadata", {}))

    def validate(self) -> None:
        validate_messages(self.messages)


def trace_to_sft_records(trace: DialogueTrace, system_prompt: str,
                         counter: TokenCounter = heuristic_counter,
                         single_turn: bool = False) -> list[SftRecord]:
    """Flatten a trace into dialogue + summary-pair + QA-pair records."""
    records: list[SftRecord] = []
    messages: list[ChatMessage] = [
        stamp_token_count(ChatMessage(role="system", content=system_prompt), counter)]
    turns = trace.turns[:1] if single_turn else trace.turns
    for turn in turns:
        messages.append(stamp_token_count(
            ChatMessage(role="user", content=turn.user_input), counter))
        for call, outcome in turn.interactions:
            messages.append(stamp_token_count(
                ChatMessage(role="assistant", content="", tool_calls=[call]), counter))
            messages.append(stamp_token_count(
                ChatMessage(role="tool", content=outcome.rendered_text,
                            tool_call_id=call.id), counter))
        messages.append(stamp_token_count(
            ChatMessage(role="assistant", content=turn.response), counter))
    records.append(SftRecord(
        kind="dialogue", messages=messages,
        metadata={"scenario_id": trace.scenario_ref, "trace_id": trace.trace_id}))
    for pair in trace.sub_llm_pairs:
        records.append(SftRecord(
            kind="summary_pair" if pair.purpose == "summary" else "qa_pair",
            messages=[*pair.input_messages, pair.output],
            metadata={"scenario_id": trace.scenario_ref, "trace_id": trace.trace_id}))
    return records


@dataclass
class RunManifest:
    run_id: str
    seed: int
    config_hash: str
    dialogue_count: int
    summary_pair_count: int
    qa_pair_count: int
    failure_count: int
    failures: list[str]
    turn_counts: dict[str, int]

    def to_dict(self) -> dict:
        return self.__dict__.copy()


def generate_dataset(scenarios: Sequence[Scenario], *,
                     registry_factory: Callable[[Scenario], object],
                     agent_backend_factory: Callable[[Scenario], Backend],
                     simulator_backend_factory: Callable[[Scenario], Backend] | None,
                     config: AgentConfig, seed: int, out_dir: str | Path,
                     counter: TokenCounter = heuristic_counter,
                     workers: int = 4, single_turn: bool = False,
                     clock: Callable[[], float] = time.time,
                     turn_probabilities: Sequence[tuple[int, float]] = ((2, 0.7), (3, 0.2), (4, 0.1)),
                     ) -> RunManifest:
    """One dialogue per scenario, exported as traces + JSONL record streams.

    Turn counts are drawn up front from the run's seeded generator so the
    worker pool cannot perturb them; results are committed in scenario order.
    """
    if not scenarios:
        raise ValueError("need at least one scenario")
    out_dir = Path(out_dir)
    rng = random.Random(seed)
    run_id = f"run-{hashlib.sha1(f'{seed}:{len(scenarios)}'.encode()).hexdigest()[:10]}"
    trace_dir = out_dir / run_id
    trace_dir.mkdir(parents=True, exist_ok=True)
    planned = [1 if single_turn else sample_turn_count(rng, turn_probabilities)
               for _ in scenarios]

    def roll(idx: int) -> DialogueTrace:
        scenario = scenarios[idx]
        registry = registry_factory(scenario)
        backend = agent_backend_factory(scenario)
        if simulator_backend_factory is not None:
            user_source = SimulatedUser(scenario, simulator_backend_factory(scenario),
                                        max_turns=planned[idx])
        else:
            user_source = [scenario.question]
        cfg = AgentConfig(**{**config.to_dict(), "max_turns": planned[idx]})
        return run_dialogue(backend, registry, cfg, user_source,
                            scenario_ref=scenario.id, counter=counter, clock=clock,
                            trace_id=f"{run_id}-{idx:05d}")

    results: list[DialogueTrace | Exception] = [None] * len(scenarios)  # type: ignore
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {pool.submit(roll, i): i for i in range(len(scenarios))}
        for fut, i in futures.items():
            try:
                results[i] = fut.result()
            except Exception as exc:  # per-scenario failures are logged, not fatal
                logger.warning("scenario %s failed: %s", scenarios[i].id, exc)
                results[i] = exc

    dialogue_records: list[SftRecord] = []
    summary_records: list[SftRecord] = []
    qa_records: list[SftRecord] = []
    failures: list[str] = []
    turn_counts: dict[str, int] = {}
    system_prompt = prompts.get_prompt(config.system_prompt_id)
    for i, result in enumerate(results):
        if isinstance(result, Exception) or result.failed:
            failures.append(scenarios[i].id)
            continue
        result.save(trace_dir / f"{result.trace_id}.json")
        turn_counts[str(len(result.turns))] = turn_counts.get(str(len(result.turns)), 0) + 1
        for rec in trace_to_sft_records(result, system_prompt, counter=counter,
                                        single_turn=single_turn):
            {"dialogue": dialogue_records, "summary_pair": summary_records,
             "qa_pair": qa_records}[rec.kind].append(rec)

    for name, records in (("dialogues", dialogue_records),
                          ("summary_pairs", summary_records),
                          ("qa_pairs", qa_records)):
        with open(out_dir / f"{name}.jsonl", "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")

    config_hash = hashlib.sha256(
        json.dumps(config.to_dict(), sort_keys=True).encode()).hexdigest()[:16]
    manifest = RunManifest(
        run_id=run_id, seed=seed, config_hash=config_hash,
        dialogue_count=len(dialogue_records),
        summary_pair_count=len(summary_records),
        qa_pair_count=len(qa_records),
        failure_count=len(failures), failures=failures,
        turn_counts=dict(sorted(turn_counts.items())),
    )
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return manifest


def load_sft_records(path: str | Path) -> list[SftRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(SftRecord.from_dict(json.loads(line)))
    return records
