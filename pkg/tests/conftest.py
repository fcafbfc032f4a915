import json

import pytest

from chemchat.corpus import Corpus, Document, DoseEntry, Section, parse_corpus
from chemchat.counting import heuristic_counter
from chemchat.gateway import FunctionBackend, ScriptedBackend
from chemchat.retrieval import build_index
from chemchat.tools import ToolRegistry


def body_of_tokens(n: int, word: str = "tok") -> str:
    """A body whose heuristic token count is exactly n (for short words)."""
    return " ".join([word] * n)


def make_section(name: str, body: str) -> Section:
    return Section(name=name, body=body, token_count=heuristic_counter(body))


BERYLLIUM_SYMPTOMS = (
    "Exposure to beryllium dust or fumes can produce acute chemical pneumonitis, "
    "chest pain, bronchospasm, fever, shortness of breath, and cough. Chronic "
    "exposure may cause granulomatous lung disease, weight loss, respiratory "
    "failure, and enlargement of the liver and spleen. Skin contact with dust "
    "causes acute dermatitis with erythema and vesicular rash, while eye contact "
    "leads to acute conjunctivitis with conjunctival redness and photophobia. " * 12
)

BERYLLIUM_CASES = (
    "Occupational case reports describe workers exposed during casting, molding, "
    "shearing, rolling, cutting, welding, machining, sanding, grinding, assembly, "
    "and chemical analysis operations. Exposure outside the workplace has been "
    "reported through contaminated work clothes carrying dust into homes and "
    "through air pollution near production plants. " * 14
)


@pytest.fixture(scope="session")
def beryllium_corpus_dict():
    return {
        "databases": {
            "chemical": [
                {
                    "title": "Beryllium, elemental",
                    "aliases": ["Beryllium", "베릴륨"],
                    "abstract": "Beryllium appears as white hexagonal crystals and is an "
                                "odorless metal, mainly used as an alloying element in "
                                "copper beryllium alloys.",
                    "sections": [
                        {"name": "Human Health Effects-Symptoms", "body": BERYLLIUM_SYMPTOMS},
                        {"name": "Human Health Effects-Case Reports", "body": BERYLLIUM_CASES},
                        {"name": "First Aid",
                         "body": "Move the person to fresh air and rinse exposed skin "
                                 "and eyes with water for fifteen minutes."},
                    ],
                    "carcinogen_classes": {"IARC": "1", "NTP": "K"},
                    "dose_entries": [
                        {"dose_type": "LD50", "species": "rat", "route": "oral",
                         "value_text": "5628 mg/kg"},
                        {"dose_type": "LC50", "species": "rat", "route": "inhalation",
                         "value_text": "0.15 mg/m3"},
                        {"dose_type": "NOAEL", "species": "dog", "route": "oral",
                         "value_text": "1 mg/kg/day"},
                    ],
                },
                {
                    "title": "Beryllium oxide",
                    "aliases": [],
                    "abstract": "Beryllium oxide is a white crystalline oxide used in "
                                "ceramics with high thermal conductivity.",
                    "sections": [
                        {"name": "General Information",
                         "body": "Beryllium oxide is produced by calcining beryllium "
                                 "hydroxide and is used in electronic substrates."},
                    ],
                    "carcinogen_classes": {"IARC": "1"},
                },
                {
                    "title": "Beryllium phosphate",
                    "aliases": [],
                    "abstract": "Beryllium phosphate is a beryllium salt of phosphoric acid.",
                    "sections": [
                        {"name": "General Information",
                         "body": "Beryllium phosphate is encountered in laboratory "
                                 "preparations involving beryllium salts."},
                    ],
                },
            ],
            "poison": [
                {
                    "title": "Hydroquinone",
                    "aliases": [],
                    "abstract": "Hydroquinone is an aromatic compound used in photographic "
                                "developers and skin preparations.",
                    "sections": [
                        {"name": "Human Effects-Case Reports",
                         "body": "A worker exposed to hydroquinone developer fluid for "
                                 "sixteen years developed myelodysplastic syndrome; crew "
                                 "members aboard a vessel suffered gastrointestinal "
                                 "illness from contaminated water."},
                    ],
                }
            ],
        }
    }


@pytest.fixture(scope="session")
def beryllium_corpus(beryllium_corpus_dict):
    return parse_corpus(beryllium_corpus_dict, heuristic_counter)


@pytest.fixture(scope="session")
def beryllium_index(beryllium_corpus):
    return build_index(beryllium_corpus)


def echo_summary_backend(max_words: int = 120) -> FunctionBackend:
    """Summary stub: condenses whatever it is given to the first max_words words."""

    def fn(messages, tool_schemas):
        text = messages[-1].content
        body = text.split("## Retrieved text", 1)[-1]
        return "Summary: " + " ".join(body.split()[:max_words])

    return FunctionBackend(fn)


def echo_qa_backend(max_words: int = 60) -> FunctionBackend:
    """QA stub: answers with the first max_words words of the provided context."""

    def fn(messages, tool_schemas):
        context = messages[0].content.split("# Context", 1)[-1]
        return "Answer: " + " ".join(context.split()[:max_words])

    return FunctionBackend(fn)


@pytest.fixture
def beryllium_registry(beryllium_corpus, beryllium_index):
    return ToolRegistry(
        beryllium_corpus, beryllium_index,
        summary_backend=echo_summary_backend(),
        qa_backend=echo_qa_backend(),
    )


def tool_step(tool_name: str, call_id: str, **arguments) -> dict:
    return {"respond": {"tool_calls": [
        {"id": call_id, "tool_name": tool_name, "arguments": arguments}]}}


def text_step(content: str) -> dict:
    return {"respond": {"content": content}}


BERYLLIUM_Q1 = "What symptoms appear when humans are exposed to beryllium?"
BERYLLIUM_Q2 = "What are the main routes of exposure to beryllium?"

BERYLLIUM_ANSWER_1 = (
    "Beryllium exposure causes acute pneumonitis, chest pain, bronchospasm and "
    "cough after inhalation; acute dermatitis after skin contact; and acute "
    "conjunctivitis after eye contact "
    "[[chemical, Beryllium, elemental, Human Health Effects-Symptoms]].")

BERYLLIUM_ANSWER_2 = (
    "The main exposure routes are occupational: casting, welding, machining and "
    "grinding work, with additional cases from contaminated work clothes "
    "[[chemical, Beryllium, elemental, Human Health Effects-Case Reports]].")


def beryllium_agent_script() -> list[dict]:
    """The golden two-turn walkthrough: 4 tool calls, answer, 1 tool call, answer."""
    return [
        tool_step("bm25_search", "call-1", query=BERYLLIUM_Q1),
        tool_step("keyword_search", "call-2", keyword="beryllium"),
        tool_step("read_general", "call-3", db_name="chemical",
                  chemical_name="Beryllium, elemental"),
        tool_step("qa_specific", "call-4", db_name="chemical",
                  chemical_name="Beryllium, elemental",
                  section_name="Human Health Effects-Symptoms",
                  question=BERYLLIUM_Q1),
        text_step(BERYLLIUM_ANSWER_1),
        tool_step("qa_specific", "call-5", db_name="chemical",
                  chemical_name="Beryllium, elemental",
                  section_name="Human Health Effects-Case Reports",
                  question=BERYLLIUM_Q2),
        text_step(BERYLLIUM_ANSWER_2),
    ]


@pytest.fixture
def beryllium_agent_backend():
    return ScriptedBackend(beryllium_agent_script())


def write_json(path, data):
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2), encoding="utf-8")
    return path
