"""The six database tools, with sub-model compression and ablation modes.

Tools are pure over the immutable (corpus, index) pair plus whatever backend
serves the summary/QA sub-models, so scripted replays are deterministic.
Rendered formats are frozen by golden tests; do not change them casually.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from . import prompts
from .corpus import CARCINOGEN_AGENCIES, Corpus, Document
from .counting import TokenCounter, heuristic_counter
from .errors import (
    EmptyQueryError,
    ToolValidationError,
    UnknownAgencyError,
    UnknownDocumentError,
    UnknownSectionError,
)
from .gateway import Backend, ChatMessage, ToolCall, complete
from .retrieval import Bm25Index, ScoredHit, SectionRef, keyword_lookup, search

MODES = ("full", "full_doc", "rag_only", "no_summary", "no_qa")

NO_INFO_NOTICE = "No relevant information was found in the database."
NO_MATCH_NOTICE = "No documents found for this keyword."
NO_DOSE_NOTICE = "No toxic dose data is recorded for this document."

TOOL_NAMES = (
    "bm25_search", "keyword_search", "read_general",
    "qa_specific", "carcinogen_filter_search", "toxic_dose_search",
)


@dataclass
class SubLlmRecord:
    purpose: str  # "summary" | "qa"
    input_messages: list[ChatMessage]
    output: ChatMessage

    def to_dict(self) -> dict:
        return {
            "purpose": self.purpose,
            "input_messages": [m.to_dict() for m in self.input_messages],
            "output": self.output.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SubLlmRecord":
        return cls(
            purpose=data["purpose"],
            input_messages=[ChatMessage.from_dict(m) for m in data["input_messages"]],
            output=ChatMessage.from_dict(data["output"]),
        )


@dataclass
class ToolOutcome:
    tool_name: str
    rendered_text: str
    token_count: int
    provenance: list[SectionRef] = field(default_factory=list)
    doc_targets: list[tuple[str, str]] = field(default_factory=list)  # (db, title) consulted
    sub_llm_io: SubLlmRecord | None = None

    def to_dict(self) -> dict:
        return {
            "tool_name": self.tool_name,
            "rendered_text": self.rendered_text,
            "token_count": self.token_count,
            "provenance": [[r.db_name, r.document_title, r.section_name] for r in self.provenance],
            "doc_targets": [list(t) for t in self.doc_targets],
            "sub_llm_io": self.sub_llm_io.to_dict() if self.sub_llm_io else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ToolOutcome":
        return cls(
            tool_name=data["tool_name"],
            rendered_text=data["rendered_text"],
            token_count=data["token_count"],
            provenance=[SectionRef(*r) for r in data.get("provenance", [])],
            doc_targets=[tuple(t) for t in data.get("doc_targets", [])],
            sub_llm_io=SubLlmRecord.from_dict(data["sub_llm_io"]) if data.get("sub_llm_io") else None,
        )


def _schema(name: str, description: str, params: dict, required: list[str]) -> dict:
    return {
        "name": name,
        "description": description,
        "parameters": {"type": "object", "properties": params, "required": required},
    }


def tool_schemas(mode: str = "full") -> list[dict]:
    """Published tool schemas; rag_only exposes the retrieval tool alone."""
    schemas = [
        _schema("bm25_search", "Search the database sections by relevance to a query.",
                {"query": {"type": "string"}}, ["query"]),
        _schema("keyword_search", "List the best-matching document titles per database.",
                {"keyword": {"type": "string"}}, ["keyword"]),
        _schema("read_general", "Read a document's abstract and table of contents.",
                {"db_name": {"type": "string"}, "chemical_name": {"type": "string"}},
                ["db_name", "chemical_name"]),
        _schema("qa_specific", "Answer a question from one named section of a document.",
                {"db_name": {"type": "string"}, "chemical_name": {"type": "string"},
                 "section_name": {"type": "string"}, "question": {"type": "string"}},
                ["db_name", "chemical_name", "section_name", "question"]),
        _schema("carcinogen_filter_search",
                "Keyword search restricted to documents with given carcinogen classes.",
                {"keyword": {"type": "string"},
                 "filters": {"type": "array",
                             "items": {"type": "array", "items": {"type": "string"}}},
                 "combine": {"type": "string", "enum": ["AND", "OR"]}},
                ["keyword"]),
        _schema("toxic_dose_search", "List recorded toxic dose values for a chemical.",
                {"chemical_name": {"type": "string"}}, ["chemical_name"]),
    ]
    if mode == "rag_only":
        return schemas[:1]
    return schemas


class ToolRegistry:
    """Binds the six tools to a corpus, an index, and the sub-model backends."""

    def __init__(self, corpus: Corpus, index: Bm25Index, *,
                 mode: str = "full",
                 summary_backend: Backend | None = None,
                 qa_backend: Backend | None = None,
                 counter: TokenCounter = heuristic_counter,
                 qa_threshold_tokens: int = 200,
                 summary_word_limit: int = 200,
                 top_k: int = 10,
                 per_db_limit: int = 10):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
        self.corpus = corpus
        self.index = index
        self.mode = mode
        self.summary_backend = summary_backend
        self.qa_backend = qa_backend
        self.counter = counter
        self.qa_threshold_tokens = qa_threshold_tokens
        self.summary_word_limit = summary_word_limit
        self.top_k = top_k
        self.per_db_limit = per_db_limit

    # -- dispatch ----------------------------------------------------------

    def schemas(self) -> list[dict]:
        return tool_schemas(self.mode)

    def dispatch(self, call: ToolCall) -> ToolOutcome:
        self._validate(call)
        args = call.arguments
        if call.tool_name == "bm25_search":
            return self.bm25_search(args["query"])
        if call.tool_name == "keyword_search":
            return self.keyword_search(args["keyword"])
        if call.tool_name == "read_general":
            return self.read_general(args["db_name"], args["chemical_name"])
        if call.tool_name == "qa_specific":
            return self.qa_specific(args["db_name"], args["chemical_name"],
                                    args["section_name"], args["question"])
        if call.tool_name == "carcinogen_filter_search":
            return self.carcinogen_filter_search(
                args["keyword"],
                [tuple(f) for f in args.get("filters", [])],
                args.get("combine", "AND"))
        return self.toxic_dose_search(args["chemical_name"])

    def _validate(self, call: ToolCall) -> None:
        by_name = {s["name"]: s for s in tool_schemas("full")}
        schema = by_name.get(call.tool_name)
        if schema is None:
            raise ToolValidationError(f"unknown tool {call.tool_name!r}")
        if self.mode == "rag_only" and call.tool_name != "bm25_search":
            raise ToolValidationError(
                f"tool {call.tool_name!r} is not available in rag_only mode")
        props = schema["parameters"]["properties"]
        required = schema["parameters"]["required"]
        if not isinstance(call.arguments, dict):
            raise ToolValidationError(f"{call.tool_name}: arguments must be an object")
        missing = [r for r in required if r not in call.arguments]
        if missing:
            raise ToolValidationError(f"{call.tool_name}: missing arguments {missing}")
        unknown = [a for a in call.arguments if a not in props]
        if unknown:
            raise ToolValidationError(f"{call.tool_name}: unknown arguments {unknown}")
        for name, value in call.arguments.items():
            kind = props[name]["type"]
            if kind == "string" and not isinstance(value, str):
                raise ToolValidationError(f"{call.tool_name}: argument {name!r} must be a string")
            if kind == "array" and not isinstance(value, list):
                raise ToolValidationError(f"{call.tool_name}: argument {name!r} must be a list")

    def _outcome(self, tool_name: str, text: str, provenance: list[SectionRef] = None,
                 doc_targets: list[tuple[str, str]] = None,
                 sub_llm_io: SubLlmRecord | None = None) -> ToolOutcome:
        return ToolOutcome(
            tool_name=tool_name, rendered_text=text,
            token_count=self.counter(text),
            provenance=provenance or [], doc_targets=doc_targets or [],
            sub_llm_io=sub_llm_io,
        )

    # -- the six tools -----------------------------------------------------

    def bm25_search(self, query: str) -> ToolOutcome:
        if not query.strip():
            raise EmptyQueryError("bm25_search: empty query")
        try:
            hits = search(self.index, query, k=self.top_k)
        except EmptyQueryError:
            hits = []
        if not hits:
            return self._outcome("bm25_search", NO_INFO_NOTICE)
        refs = [h.section_ref for h in hits]
        raw = self._render_hits(hits)
        if self.mode in ("rag_only", "no_summary"):
            return self._outcome("bm25_search", raw, provenance=refs)
        record = self._run_summary(query, raw)
        text = record.output.content.strip()
        if text == "NO_RELEVANT_INFORMATION" or not text:
            return self._outcome("bm25_search", NO_INFO_NOTICE, provenance=refs,
                                 sub_llm_io=record)
        words = text.split()
        cap = 4 * self.summary_word_limit  # guard against runaway backends
        if len(words) > cap:
            text = " ".join(words[:cap])
        return self._outcome("bm25_search", text, provenance=refs, sub_llm_io=record)

    def _render_hits(self, hits: Sequence[ScoredHit]) -> str:
        parts = []
        for i, hit in enumerate(hits, 1):
            ref = hit.section_ref
            doc = self.corpus.find_document(ref.db_name, ref.document_title)
            body = doc.section(ref.section_name).body
            parts.append(f"### {i}. {ref.document_title} - {ref.section_name} "
                         f"[{ref.db_name}]\n{body}")
        return "\n\n".join(parts)

    def _run_summary(self, query: str, retrieved: str) -> SubLlmRecord:
        messages = [
            ChatMessage(role="system",
                        content=prompts.SUMMARY.format(word_limit=self.summary_word_limit)),
            ChatMessage(role="user", content=f"## Query\n{query}\n\n## Retrieved text\n{retrieved}"),
        ]
        output = complete(self.summary_backend, messages)
        return SubLlmRecord(purpose="summary", input_messages=messages, output=output)

    def keyword_search(self, keyword: str) -> ToolOutcome:
        if not keyword.strip():
            raise EmptyQueryError("keyword_search: empty keyword")
        matches = keyword_lookup(self.corpus, keyword, per_db_limit=self.per_db_limit)
        return self._outcome("keyword_search", self._render_title_lists(keyword, matches))

    def _render_title_lists(self, keyword: str, matches: dict[str, list[str]]) -> str:
        if not any(matches.values()):
            return f"{NO_MATCH_NOTICE} (keyword: {keyword})"
        lines = [f"# Search results for {keyword}"]
        for db_name, titles in matches.items():
            if not titles:
                continue
            lines.append(f"## {db_name} results (most relevant first):")
            lines.extend(f"{i}. {title}" for i, title in enumerate(titles, 1))
        return "\n".join(lines)

    def _find_document(self, db_name: str, title: str) -> Document:
        doc = self.corpus.find_document(db_name, title)
        if doc is None:
            # tolerate alias hits so agents can use whichever name they found
            for cand in self.corpus.databases.get(db_name, []):
                if title.casefold() in (a.casefold() for a in cand.aliases):
                    return cand
            raise UnknownDocumentError(
                f"no document {title!r} in database {db_name!r}; "
                f"try keyword_search to locate the right title")
        return doc

    def read_general(self, db_name: str, chemical_name: str) -> ToolOutcome:
        doc = self._find_document(db_name, chemical_name)
        refs = [SectionRef(doc.db_name, doc.title, s.name) for s in doc.sections]
        if self.mode == "full_doc":
            parts = [f"# Full document for {doc.title} ({db_name})",
                     f"## Abstract\n{doc.abstract}"]
            parts += [f"## {s.name}\n{s.body}" for s in doc.sections]
            text = "\n\n".join(parts)
        else:
            lines = [f"# General information for {doc.title} ({db_name})",
                     "## Abstract", doc.abstract, "## Sections"]
            lines += [f"{i}. {s.name}" for i, s in enumerate(doc.sections, 1)]
            text = "\n".join(lines)
        return self._outcome("read_general", text, provenance=refs,
                             doc_targets=[(doc.db_name, doc.title)])

    def qa_specific(self, db_name: str, chemical_name: str, section_name: str,
                    question: str) -> ToolOutcome:
        if not question.strip():
            raise EmptyQueryError("qa_specific: empty question")
        doc = self._find_document(db_name, chemical_name)
        sec = doc.section(section_name)
        if sec is None:
            names = ", ".join(s.name for s in doc.sections)
            raise UnknownSectionError(
                f"document {doc.title!r} has no section {section_name!r}; "
                f"valid sections: {names}")
        ref = SectionRef(doc.db_name, doc.title, sec.name)
        target = [(doc.db_name, doc.title)]
        needs_qa = sec.token_count > self.qa_threshold_tokens
        if self.mode == "no_qa" or not needs_qa:
            return self._outcome("qa_specific", sec.body, provenance=[ref],
                                 doc_targets=target)
        context = (f"[[{doc.db_name}, {doc.title}, {sec.name}]]\n{sec.body}")
        messages = [
            ChatMessage(role="system", content=prompts.QA.format(context=context)),
            ChatMessage(role="user", content=question),
        ]
        output = complete(self.qa_backend, messages)
        record = SubLlmRecord(purpose="qa", input_messages=messages, output=output)
        return self._outcome("qa_specific", output.content, provenance=[ref],
                             doc_targets=target, sub_llm_io=record)

    def carcinogen_filter_search(self, keyword: str, filters: list[tuple[str, str]],
                                 combine: str = "AND") -> ToolOutcome:
        if combine not in ("AND", "OR"):
            raise ToolValidationError(f"combine must be AND or OR, got {combine!r}")
        for agency, _ in filters:
            if agency not in CARCINOGEN_AGENCIES:
                raise UnknownAgencyError(
                    f"unknown agency {agency!r}; expected one of {CARCINOGEN_AGENCIES}")
        matches = keyword_lookup(self.corpus, keyword, per_db_limit=self.per_db_limit)
        if filters:
            filtered: dict[str, list[str]] = {}
            for db_name, titles in matches.items():
                kept = []
                for title in titles:
                    doc = self.corpus.find_document(db_name, title)
                    tests = [
                        doc.carcinogen_classes.get(agency, "").casefold() == cls.casefold()
                        for agency, cls in filters
                    ]
                    if (all(tests) if combine == "AND" else any(tests)):
                        kept.append(title)
                filtered[db_name] = kept
            matches = filtered
        return self._outcome("carcinogen_filter_search",
                             self._render_title_lists(keyword, matches))

    def toxic_dose_search(self, chemical_name: str) -> ToolOutcome:
        needle = chemical_name.casefold()
        for db_name in self.corpus.databases:
            for doc in self.corpus.databases[db_name]:
                names = [doc.title.casefold(), *(a.casefold() for a in doc.aliases)]
                if needle in names:
                    if not doc.dose_entries:
                        text = f"# Toxic dose data for {doc.title}\n{NO_DOSE_NOTICE}"
                    else:
                        lines = [f"# Toxic dose data for {doc.title}"]
                        lines += [e.render() for e in doc.dose_entries]
                        text = "\n".join(lines)
                    return self._outcome("toxic_dose_search", text,
                                         doc_targets=[(doc.db_name, doc.title)])
        raise UnknownDocumentError(
            f"no document matching {chemical_name!r} in any database; "
            f"try keyword_search to locate the right title")
