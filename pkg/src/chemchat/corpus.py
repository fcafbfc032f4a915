"""Hierarchical document corpus: load, validate, serialize, and synthesize.

A corpus is a set of named sub-databases, each holding documents made of an
abstract plus ordered named sections.  Token counts are computed once at load
time with a configured counter and cached on each section.
"""

from __future__ import annotations

import json
import hashlib
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .counting import DEFAULT_COUNTER_ID, TokenCounter, get_counter
from .errors import (
    CorpusParseError,
    CorpusValidationError,
    EmptyCorpusError,
    InfeasibleSpecError,
)

DEFAULT_DATABASES = ("chemical", "poison", "cigarette", "carcinogen")
CARCINOGEN_AGENCIES = ("IARC", "NTP", "USEPA")


@dataclass
class DoseEntry:
    dose_type: str  # e.g. LD50, LC50, TD50, NOAEL
    species: str
    route: str
    value_text: str

    def render(self) -> str:
        return " = ".join([self.dose_type, self.species, self.route, self.value_text])


@dataclass
class Section:
    name: str
    body: str
    token_count: int = 0


@dataclass
class Document:
    db_name: str
    title: str
    aliases: list[str] = field(default_factory=list)
    abstract: str = ""
    sections: list[Section] = field(default_factory=list)
    carcinogen_classes: dict[str, str] = field(default_factory=dict)
    dose_entries: list[DoseEntry] = field(default_factory=list)

    def section(self, name: str) -> Section | None:
        for sec in self.sections:
            if sec.name == name:
                return sec
        return None


@dataclass
class Corpus:
    databases: dict[str, list[Document]]
    token_counter_id: str = DEFAULT_COUNTER_ID

    def iter_documents(self):
        for db_name in self.databases:
            yield from self.databases[db_name]

    def iter_sections(self):
        for doc in self.iter_documents():
            for sec in doc.sections:
                yield doc, sec

    def document_count(self) -> int:
        return sum(len(docs) for docs in self.databases.values())

    def section_count(self) -> int:
        return sum(len(doc.sections) for doc in self.iter_documents())

    def find_document(self, db_name: str, title: str) -> Document | None:
        for doc in self.databases.get(db_name, []):
            if doc.title == title:
                return doc
        return None

    def to_dict(self) -> dict:
        return {
            "token_counter_id": self.token_counter_id,
            "databases": {
                db: [_document_to_dict(doc) for doc in docs]
                for db, docs in self.databases.items()
            },
        }

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class LevelStats:
    count: int
    min: int
    max: int
    mean: float
    std: float  # population standard deviation


@dataclass
class CorpusStats:
    documents: LevelStats
    sections: LevelStats
    total_tokens: int
    std_kind: str = "population"


def _document_to_dict(doc: Document) -> dict:
    out: dict = {
        "title": doc.title,
        "aliases": list(doc.aliases),
        "abstract": doc.abstract,
        "sections": [{"name": s.name, "body": s.body} for s in doc.sections],
    }
    if doc.carcinogen_classes:
        out["carcinogen_classes"] = dict(doc.carcinogen_classes)
    if doc.dose_entries:
        out["dose_entries"] = [
            {
                "dose_type": e.dose_type,
                "species": e.species,
                "route": e.route,
                "value_text": e.value_text,
            }
            for e in doc.dose_entries
        ]
    return out


_DOC_KEYS = {"title", "aliases", "abstract", "sections", "carcinogen_classes", "dose_entries"}
_SECTION_KEYS = {"name", "body"}
_DOSE_KEYS = {"dose_type", "species", "route", "value_text"}


def _check_keys(obj: dict, allowed: set[str], where: str, lenient: bool) -> None:
    if lenient:
        return
    unknown = set(obj) - allowed
    if unknown:
        raise CorpusParseError(f"{where}: unknown keys {sorted(unknown)}")


def parse_corpus(data: dict, counter: TokenCounter, counter_id: str = DEFAULT_COUNTER_ID,
                 lenient: bool = False) -> Corpus:
    """Build and validate a Corpus from the decoded JSON structure."""
    if not isinstance(data, dict) or "databases" not in data:
        raise CorpusParseError("top level must be an object with a 'databases' key")
    _check_keys(data, {"databases", "token_counter_id"}, "top level", lenient)
    databases: dict[str, list[Document]] = {}
    for db_name, raw_docs in data["databases"].items():
        if not isinstance(raw_docs, list):
            raise CorpusParseError(f"database {db_name!r}: expected a list of documents")
        docs: list[Document] = []
        seen_titles: set[str] = set()
        for i, raw in enumerate(raw_docs):
            where = f"database {db_name!r}, document #{i}"
            if not isinstance(raw, dict):
                raise CorpusParseError(f"{where}: expected an object")
            _check_keys(raw, _DOC_KEYS, where, lenient)
            title = raw.get("title")
            if not title or not isinstance(title, str):
                raise CorpusParseError(f"{where}: missing or empty 'title'")
            if title in seen_titles:
                raise CorpusValidationError(
                    f"duplicate title {title!r} in database {db_name!r}")
            seen_titles.add(title)
            abstract = raw.get("abstract", "")
            if not abstract:
                raise CorpusValidationError(f"{where} ({title!r}): empty abstract")
            sections: list[Section] = []
            seen_secs: set[str] = set()
            for j, raw_sec in enumerate(raw.get("sections", [])):
                sec_where = f"{where} ({title!r}), section #{j}"
                if not isinstance(raw_sec, dict):
                    raise CorpusParseError(f"{sec_where}: expected an object")
                _check_keys(raw_sec, _SECTION_KEYS, sec_where, lenient)
                name = raw_sec.get("name")
                body = raw_sec.get("body")
                if not name:
                    raise CorpusParseError(f"{sec_where}: missing 'name'")
                if not body:
                    raise CorpusValidationError(f"{sec_where} ({name!r}): empty body")
                if name in seen_secs:
                    raise CorpusValidationError(
                        f"duplicate section {name!r} in document {title!r}")
                seen_secs.add(name)
                sections.append(Section(name=name, body=body, token_count=counter(body)))
            classes = raw.get("carcinogen_classes", {}) or {}
            for agency in classes:
                if agency not in CARCINOGEN_AGENCIES:
                    raise CorpusValidationError(
                        f"{where} ({title!r}): unknown carcinogen agency {agency!r}")
            doses = []
            for raw_dose in raw.get("dose_entries", []) or []:
                _check_keys(raw_dose, _DOSE_KEYS, f"{where} dose entry", lenient)
                if not raw_dose.get("dose_type"):
                    raise CorpusValidationError(f"{where} ({title!r}): dose entry without dose_type")
                doses.append(DoseEntry(
                    dose_type=raw_dose["dose_type"],
                    species=raw_dose.get("species", ""),
                    route=raw_dose.get("route", ""),
                    value_text=raw_dose.get("value_text", ""),
                ))
            docs.append(Document(
                db_name=db_name, title=title, aliases=list(raw.get("aliases", [])),
                abstract=abstract, sections=sections,
                carcinogen_classes=dict(classes), dose_entries=doses,
            ))
        databases[db_name] = docs
    return Corpus(databases=databases, token_counter_id=counter_id)


def load_corpus(path: str | Path, counter: TokenCounter | None = None,
                counter_id: str = DEFAULT_COUNTER_ID, lenient: bool = False) -> Corpus:
    """Load a corpus JSON file, validate it, and cache token counts."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusParseError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if counter is None:
        counter_id = data.get("token_counter_id", counter_id) if isinstance(data, dict) else counter_id
        counter = get_counter(counter_id)
    return parse_corpus(data, counter, counter_id=counter_id, lenient=lenient)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(corpus.to_dict(), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def _level_stats(values: list[int]) -> LevelStats:
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return LevelStats(count=n, min=min(values), max=max(values), mean=mean,
                      std=math.sqrt(var))


def document_token_count(doc: Document, counter: TokenCounter) -> int:
    return counter(doc.abstract) + sum(s.token_count for s in doc.sections)


def compute_stats(corpus: Corpus) -> CorpusStats:
    """Token-length statistics over cached counts; std is population std."""
    if corpus.document_count() == 0 or corpus.section_count() == 0:
        raise EmptyCorpusError("cannot compute statistics of an empty corpus")
    counter = get_counter(corpus.token_counter_id)
    doc_tokens = [document_token_count(doc, counter) for doc in corpus.iter_documents()]
    sec_tokens = [sec.token_count for _, sec in corpus.iter_sections()]
    return CorpusStats(
        documents=_level_stats(doc_tokens),
        sections=_level_stats(sec_tokens),
        total_tokens=sum(doc_tokens),
    )


# Built-in vocabulary for synthetic corpora.  A mix of generic prose words and
# domain-flavoured terms so BM25 gets realistic term-frequency structure.
_BASE_WORDS = (
    "exposure dose acute chronic inhalation ingestion dermal contact symptom "
    "effect toxicity hazard irritation respiratory skin eye liver kidney lung "
    "study animal human rat mouse rabbit oral route concentration level limit "
    "safety treatment first aid emergency poisoning compound substance agent "
    "solvent vapor dust fume particle absorption metabolism excretion organ "
    "damage cancer carcinogen mutagen reproductive development nervous system "
    "blood pressure heart failure nausea vomiting headache dizziness cough "
    "fever pain swelling rash burn corrosive flammable reactive stable storage "
    "handling disposal protective equipment ventilation workplace worker "
    "occupational environment water soil air release spill cleanup regulation "
    "standard classification label warning threshold value measured reported "
    "observed evidence data result analysis sample test method detection "
    "during after before between within without severe mild moderate high low "
    "increase decrease cause lead result associated related known unknown "
    "common rare typical general specific information section document case "
).split()


def _synthetic_vocabulary(rng: random.Random, size: int = 400) -> list[str]:
    vocab = list(_BASE_WORDS)
    # pad with pronounceable pseudo-terms so vocabularies can exceed the base list
    syll = ["chlor", "meth", "eth", "prop", "but", "phen", "benz", "tol", "xyl",
            "amin", "oxid", "nitr", "sulf", "carb", "hydr", "fluor", "brom"]
    tails = ["ane", "ene", "ol", "ide", "ate", "ium", "ine", "one", "yl"]
    while len(vocab) < size:
        vocab.append(rng.choice(syll) + rng.choice(syll) + rng.choice(tails))
    return vocab[:size]


@dataclass
class SyntheticSpec:
    docs: int
    sections_per_doc: int
    mean_tokens: float
    std_tokens: float = 0.0
    databases: tuple[str, ...] = DEFAULT_DATABASES[:2]
    min_tokens: int = 8
    vocabulary_size: int = 400
    section_names: tuple[str, ...] = (
        "General Information", "Human Health Effects-Symptoms",
        "Human Health Effects-Case Reports", "First Aid", "Exposure Routes",
        "Physical Properties", "Environmental Fate", "Regulatory Status",
        "Animal Studies", "Workplace Safety",
    )


def _sample_target_tokens(rng: random.Random, spec: SyntheticSpec) -> int:
    if spec.std_tokens <= 0:
        return max(spec.min_tokens, round(spec.mean_tokens))
    # gamma keeps the long right tail seen in real section-length data
    shape = (spec.mean_tokens / spec.std_tokens) ** 2
    scale = spec.std_tokens ** 2 / spec.mean_tokens
    return max(spec.min_tokens, round(rng.gammavariate(shape, scale)))


def _body_with_tokens(rng: random.Random, vocab: list[str], target: int,
                      counter: TokenCounter) -> str:
    # draw a word pool once, then binary-search the prefix length that first
    # reaches the token target (counters are monotone under concatenation)
    est = max(4, int(target * 1.2) + 8)
    words = [vocab[min(int(rng.expovariate(1.0 / (len(vocab) / 6))), len(vocab) - 1)]
             for _ in range(est)]
    lo, hi = 1, len(words)
    while counter(" ".join(words[:hi])) < target:
        words.extend(rng.choices(vocab, k=len(words)))
        hi = len(words)
    while lo < hi:
        mid = (lo + hi) // 2
        if counter(" ".join(words[:mid])) >= target:
            hi = mid
        else:
            lo = mid + 1
    return " ".join(words[:lo])


def generate_synthetic_corpus(spec: SyntheticSpec, seed: int,
                              counter: TokenCounter | None = None,
                              counter_id: str = DEFAULT_COUNTER_ID) -> Corpus:
    """Deterministic synthetic corpus whose section token counts follow the spec."""
    if spec.docs <= 0 or spec.sections_per_doc <= 0:
        raise InfeasibleSpecError("docs and sections_per_doc must be positive")
    if spec.mean_tokens < spec.min_tokens:
        raise InfeasibleSpecError(
            f"mean_tokens {spec.mean_tokens} below minimum section length {spec.min_tokens}")
    if counter is None:
        counter = get_counter(counter_id)
    rng = random.Random(seed)
    vocab = _synthetic_vocabulary(rng, spec.vocabulary_size)
    databases: dict[str, list[Document]] = {db: [] for db in spec.databases}
    agencies_cycle = ("1", "2A", "2B", "K", "A", "B1")
    for i in range(spec.docs):
        db = spec.databases[i % len(spec.databases)]
        head = vocab[(i * 7) % len(vocab)]
        title = f"{head.capitalize()} compound {i:04d}"
        sections = []
        names = list(spec.section_names)
        while len(names) < spec.sections_per_doc:
            names.append(f"Additional Notes {len(names)}")
        for j in range(spec.sections_per_doc):
            target = _sample_target_tokens(rng, spec)
            body = _body_with_tokens(rng, vocab, target, counter)
            sections.append(Section(name=names[j], body=body, token_count=counter(body)))
        classes = {}
        if i % 3 == 0:
            classes["IARC"] = agencies_cycle[i % len(agencies_cycle)]
        doses = []
        if i % 4 == 0:
            doses.append(DoseEntry("LD50", "rat", "oral", f"{100 + i * 13} mg/kg"))
        databases[db].append(Document(
            db_name=db, title=title, aliases=[head],
            abstract=_body_with_tokens(rng, vocab, max(spec.min_tokens, 40), counter),
            sections=sections, carcinogen_classes=classes, dose_entries=doses,
        ))
    return Corpus(databases=databases, token_counter_id=counter_id)
