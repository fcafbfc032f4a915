"""BM25 inverted index over sections-as-chunks, plus title/keyword lookup.

Each named section is indexed as exactly one chunk, never split.  Scoring is
classic Okapi BM25 with the non-negative IDF ln((N - df + 0.5)/(df + 0.5) + 1).
Ties break on (score desc, db_name asc, document_title asc, section_name asc)
so rankings are a total order and replays are byte-stable.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .corpus import Corpus, Document
from .errors import EmptyCorpusError, EmptyQueryError

Tokenizer = Callable[[str], list[str]]

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)

INDEX_CACHE_VERSION = 1


def default_tokenizer(text: str) -> list[str]:
    """Lowercased runs of Unicode letters/digits."""
    return _WORD_RE.findall(text.lower())


def bigram_tokenizer(text: str) -> list[str]:
    """Character bigrams per word run; single chars kept as-is. Suits CJK text."""
    out: list[str] = []
    for run in _WORD_RE.findall(text.lower()):
        if len(run) == 1:
            out.append(run)
        else:
            out.extend(run[i:i + 2] for i in range(len(run) - 1))
    return out


@dataclass(frozen=True, order=True)
class SectionRef:
    db_name: str
    document_title: str
    section_name: str


@dataclass(frozen=True)
class ScoredHit:
    section_ref: SectionRef
    score: float


@dataclass
class Bm25Index:
    postings: dict[str, list[tuple[int, int]]]  # term -> [(section id, tf)]
    refs: list[SectionRef]  # section id -> ref
    doc_lengths: list[int]
    avg_len: float
    k1: float
    b: float

    @property
    def n_sections(self) -> int:
        return len(self.refs)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log((self.n_sections - df + 0.5) / (df + 0.5) + 1.0)

    def to_dict(self) -> dict:
        return {
            "version": INDEX_CACHE_VERSION,
            "k1": self.k1,
            "b": self.b,
            "refs": [[r.db_name, r.document_title, r.section_name] for r in self.refs],
            "doc_lengths": self.doc_lengths,
            "postings": {t: [[i, tf] for i, tf in plist] for t, plist in self.postings.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Bm25Index":
        doc_lengths = list(data["doc_lengths"])
        return cls(
            postings={t: [(i, tf) for i, tf in plist] for t, plist in data["postings"].items()},
            refs=[SectionRef(*r) for r in data["refs"]],
            doc_lengths=doc_lengths,
            avg_len=sum(doc_lengths) / len(doc_lengths) if doc_lengths else 0.0,
            k1=data["k1"],
            b=data["b"],
        )


def build_index(corpus: Corpus, tokenizer: Tokenizer = default_tokenizer,
                k1: float = 1.2, b: float = 0.75) -> Bm25Index:
    """Index every section exactly once as a single chunk."""
    if not (k1 > 0):
        raise ValueError("k1 must be > 0")
    if not (0 <= b <= 1):
        raise ValueError("b must be in [0, 1]")
    refs: list[SectionRef] = []
    doc_lengths: list[int] = []
    postings: dict[str, list[tuple[int, int]]] = {}
    for doc, sec in corpus.iter_sections():
        sid = len(refs)
        refs.append(SectionRef(doc.db_name, doc.title, sec.name))
        toks = tokenizer(sec.body)
        doc_lengths.append(len(toks))
        for term, tf in sorted(Counter(toks).items()):
            postings.setdefault(term, []).append((sid, tf))
    if not refs:
        raise EmptyCorpusError("cannot index a corpus with no sections")
    return Bm25Index(
        postings=postings, refs=refs, doc_lengths=doc_lengths,
        avg_len=sum(doc_lengths) / len(doc_lengths), k1=k1, b=b,
    )


def bm25_score(index: Bm25Index, section_id: int, query_terms: list[str]) -> float:
    """Direct BM25 evaluation of one section against query terms."""
    dl = index.doc_lengths[section_id]
    norm = index.k1 * (1 - index.b + index.b * dl / index.avg_len) if index.avg_len else index.k1
    score = 0.0
    for term in query_terms:
        tf = 0
        for sid, f in index.postings.get(term, ()):
            if sid == section_id:
                tf = f
                break
        if tf:
            score += index.idf(term) * tf * (index.k1 + 1) / (tf + norm)
    return score


def search(index: Bm25Index, query: str, k: int = 10,
           tokenizer: Tokenizer = default_tokenizer) -> list[ScoredHit]:
    """Top-k sections by BM25; zero-overlap sections excluded."""
    terms = tokenizer(query)
    if not terms:
        raise EmptyQueryError(f"query {query!r} tokenized to nothing")
    scores: dict[int, float] = {}
    counted = Counter(terms)
    for term, qf in counted.items():
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for sid, tf in plist:
            dl = index.doc_lengths[sid]
            norm = index.k1 * (1 - index.b + index.b * dl / index.avg_len)
            # query term repetition contributes once per occurrence
            scores[sid] = scores.get(sid, 0.0) + qf * idf * tf * (index.k1 + 1) / (tf + norm)
    ranked = sorted(scores.items(), key=lambda it: (-it[1], index.refs[it[0]]))
    return [ScoredHit(index.refs[sid], sc) for sid, sc in ranked[:k]]


def _title_text(doc: Document) -> str:
    return " ".join([doc.title, *doc.aliases])


def keyword_lookup(corpus: Corpus, keyword: str, per_db_limit: int = 10,
                   tokenizer: Tokenizer = default_tokenizer) -> dict[str, list[str]]:
    """Per-database ranked title lists.

    Ranking tiers: exact title/alias match, then substring match, then BM25
    over title+alias text; deterministic tie-break on title.
    """
    if not keyword.strip():
        raise EmptyQueryError("keyword is empty")
    needle = keyword.casefold().strip()
    terms = tokenizer(keyword)
    out: dict[str, list[str]] = {}
    for db_name, docs in corpus.databases.items():
        if not docs:
            out[db_name] = []
            continue
        # tiny per-db BM25 over the name text
        name_docs = [tokenizer(_title_text(d)) for d in docs]
        lengths = [len(t) for t in name_docs]
        avg = sum(lengths) / len(lengths) if lengths else 0.0
        df: Counter = Counter()
        for toks in name_docs:
            df.update(set(toks))
        n = len(docs)
        ranked: list[tuple[int, float, str]] = []
        for doc, toks, dl in zip(docs, name_docs, lengths):
            names = [doc.title.casefold(), *(a.casefold() for a in doc.aliases)]
            if needle in names:
                tier = 0
            elif any(needle in nm for nm in names):
                tier = 1
            else:
                tier = 2
            tf = Counter(toks)
            score = 0.0
            for term in terms:
                if tf.get(term):
                    idf = math.log((n - df[term] + 0.5) / (df[term] + 0.5) + 1.0)
                    norm = 1.2 * (1 - 0.75 + 0.75 * dl / avg) if avg else 1.2
                    score += idf * tf[term] * 2.2 / (tf[term] + norm)
            if tier < 2 or score > 0:
                ranked.append((tier, -score, doc.title))
        ranked.sort()
        out[db_name] = [title for _, _, title in ranked[:per_db_limit]]
    return out


def save_index(index: Bm25Index, corpus: Corpus, path: str | Path) -> None:
    """Write a cache file keyed by corpus hash and params."""
    payload = index.to_dict()
    payload["corpus_hash"] = corpus.content_hash()
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_index(path: str | Path, corpus: Corpus, k1: float = 1.2, b: float = 0.75) -> Bm25Index | None:
    """Load a cached index; returns None when the cache does not match."""
    path = Path(path)
    if not path.exists():
        return None
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return None
    if (data.get("version") != INDEX_CACHE_VERSION
            or data.get("corpus_hash") != corpus.content_hash()
            or data.get("k1") != k1 or data.get("b") != b):
        return None
    return Bm25Index.from_dict(data)
