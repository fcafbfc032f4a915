"""BM25 index, search ranking, keyword lookup, and cache behaviour."""

import math
import random
from collections import Counter

import pytest

from chemchat.corpus import Corpus, Document, Section, SyntheticSpec, generate_synthetic_corpus
from chemchat.errors import EmptyCorpusError, EmptyQueryError
from chemchat.retrieval import (
    Bm25Index, SectionRef, bigram_tokenizer, bm25_score, build_index,
    default_tokenizer, keyword_lookup, load_index, save_index, search,
)


def brute_force_rank(corpus, query, k1=1.2, b=0.75, k=10):
    """Independent BM25 ranking computed straight from the formula."""
    sections = []
    for doc, sec in corpus.iter_sections():
        sections.append((SectionRef(doc.db_name, doc.title, sec.name),
                         default_tokenizer(sec.body)))
    n = len(sections)
    avg = sum(len(t) for _, t in sections) / n
    terms = default_tokenizer(query)
    df = Counter()
    for _, toks in sections:
        df.update(set(toks))
    scored = []
    for ref, toks in sections:
        tf = Counter(toks)
        score = 0.0
        for term in terms:
            f = tf.get(term, 0)
            if not f:
                continue
            idf = math.log((n - df[term] + 0.5) / (df[term] + 0.5) + 1.0)
            norm = k1 * (1 - b + b * len(toks) / avg)
            score += idf * f * (k1 + 1) / (f + norm)
        if score > 0:
            scored.append((ref, score))
    scored.sort(key=lambda it: (-it[1], it[0]))
    return scored[:k]


class TestTokenizers:
    def test_default_lowercases_and_splits(self):
        assert default_tokenizer("Beryllium-copper ALLOY, 2%") == [
            "beryllium", "copper", "alloy", "2"]

    def test_default_keeps_hangul(self):
        assert default_tokenizer("베릴륨 exposure") == ["베릴륨", "exposure"]

    def test_bigram_splits_cjk_runs(self):
        assert bigram_tokenizer("베릴륨") == ["베릴", "릴륨"]

    def test_bigram_single_char_kept(self):
        assert bigram_tokenizer("a bc") == ["a", "bc"]


class TestBuildIndex:
    def test_each_section_is_one_chunk(self, beryllium_corpus, beryllium_index):
        n_sections = sum(1 for _ in beryllium_corpus.iter_sections())
        assert beryllium_index.n_sections == n_sections
        assert len(beryllium_index.doc_lengths) == n_sections

    def test_avg_len_matches_lengths(self, beryllium_index):
        assert beryllium_index.avg_len == pytest.approx(
            sum(beryllium_index.doc_lengths) / beryllium_index.n_sections)

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyCorpusError):
            build_index(Corpus(databases={"chemical": []}))

    def test_bad_params_rejected(self, beryllium_corpus):
        with pytest.raises(ValueError):
            build_index(beryllium_corpus, k1=0)
        with pytest.raises(ValueError):
            build_index(beryllium_corpus, b=1.5)

    def test_idf_is_non_negative_even_for_common_terms(self):
        # a term present in every section still gets idf > 0
        docs = [Document(db_name="chemical", title=f"C{i}", aliases=[],
                         abstract="x", sections=[Section(name="S", body="common word")])
                for i in range(5)]
        idx = build_index(Corpus(databases={"chemical": docs}))
        assert idx.idf("common") > 0


class TestSearch:
    def test_matches_brute_force_on_fixture(self, beryllium_corpus, beryllium_index):
        for query in ("beryllium poisoning symptoms", "first aid", "granulomas lung"):
            got = search(beryllium_index, query, k=10)
            want = brute_force_rank(beryllium_corpus, query, k=10)
            assert [(h.section_ref, round(h.score, 9)) for h in got] == \
                   [(r, round(s, 9)) for r, s in want]

    def test_zero_overlap_sections_excluded(self, beryllium_index):
        hits = search(beryllium_index, "beryllium zzzznonexistent")
        assert all(h.score > 0 for h in hits)

    def test_no_match_returns_empty(self, beryllium_index):
        assert search(beryllium_index, "zzzznonexistent") == []

    def test_empty_query_raises(self, beryllium_index):
        with pytest.raises(EmptyQueryError):
            search(beryllium_index, "  ,,, ")

    def test_top_k_is_prefix_of_larger_k(self, beryllium_index):
        full = search(beryllium_index, "beryllium symptoms", k=50)
        for k in range(1, len(full) + 1):
            assert search(beryllium_index, "beryllium symptoms", k=k) == full[:k]

    def test_repeated_query_term_counts_each_occurrence(self, beryllium_index):
        one = search(beryllium_index, "beryllium", k=1)[0].score
        two = search(beryllium_index, "beryllium beryllium", k=1)[0].score
        assert two == pytest.approx(2 * one)

    def test_deterministic_tie_break(self):
        # identical bodies -> identical scores; order must follow the ref tuple
        docs = [Document(db_name="chemical", title=t, aliases=[], abstract="x",
                         sections=[Section(name="S", body="same body text")])
                for t in ("Zeta", "Alpha", "Mid")]
        idx = build_index(Corpus(databases={"chemical": docs}))
        hits = search(idx, "same body")
        assert [h.section_ref.document_title for h in hits] == ["Alpha", "Mid", "Zeta"]

    def test_oracle_on_random_corpora(self):
        for seed in range(10):
            corpus = generate_synthetic_corpus(SyntheticSpec(
                docs=6, sections_per_doc=4, mean_tokens=40, std_tokens=15), seed=seed)
            rng = random.Random(seed)
            vocab = []
            for _, sec in corpus.iter_sections():
                vocab.extend(default_tokenizer(sec.body)[:5])
            query = " ".join(rng.sample(vocab, 4))
            idx = build_index(corpus)
            got = search(idx, query, k=10)
            want = brute_force_rank(corpus, query, k=10)
            assert [h.section_ref for h in got] == [r for r, _ in want]
            for h, (_, s) in zip(got, want):
                assert h.score == pytest.approx(s)

    def test_bm25_score_helper_agrees_with_search(self, beryllium_index):
        terms = default_tokenizer("beryllium symptoms")
        top = search(beryllium_index, "beryllium symptoms", k=1)[0]
        sid = beryllium_index.refs.index(top.section_ref)
        assert bm25_score(beryllium_index, sid, terms) == pytest.approx(top.score)


class TestKeywordLookup:
    def test_exact_alias_match_ranks_first(self, beryllium_corpus):
        out = keyword_lookup(beryllium_corpus, "Beryllium")
        assert out["chemical"][0] == "Beryllium, elemental"

    def test_substring_matches_follow(self, beryllium_corpus):
        out = keyword_lookup(beryllium_corpus, "beryllium")
        chem = out["chemical"]
        assert set(chem[:3]) == {"Beryllium, elemental", "Beryllium oxide",
                                 "Beryllium phosphate"}

    def test_every_db_gets_a_list(self, beryllium_corpus):
        out = keyword_lookup(beryllium_corpus, "beryllium")
        assert set(out) == set(beryllium_corpus.databases)
        assert isinstance(out["poison"], list)

    def test_casefold_exact(self, beryllium_corpus):
        out = keyword_lookup(beryllium_corpus, "HYDROQUINONE")
        assert out["poison"][0] == "Hydroquinone"

    def test_per_db_limit(self, beryllium_corpus):
        out = keyword_lookup(beryllium_corpus, "beryllium", per_db_limit=2)
        assert len(out["chemical"]) == 2

    def test_empty_keyword_raises(self, beryllium_corpus):
        with pytest.raises(EmptyQueryError):
            keyword_lookup(beryllium_corpus, "   ")


class TestIndexCache:
    def test_round_trip(self, beryllium_corpus, beryllium_index, tmp_path):
        p = tmp_path / "index.json"
        save_index(beryllium_index, beryllium_corpus, p)
        loaded = load_index(p, beryllium_corpus)
        assert loaded is not None
        q = "beryllium poisoning symptoms"
        assert search(loaded, q) == search(beryllium_index, q)

    def test_corpus_change_invalidates(self, beryllium_corpus, beryllium_index,
                                       beryllium_corpus_dict, tmp_path):
        from chemchat.corpus import parse_corpus
        from chemchat.counting import get_counter
        p = tmp_path / "index.json"
        save_index(beryllium_index, beryllium_corpus, p)
        changed = dict(beryllium_corpus_dict)
        changed["databases"] = dict(changed["databases"])
        changed["databases"]["chemical"] = changed["databases"]["chemical"][:1]
        assert load_index(p, parse_corpus(changed, get_counter("heuristic"))) is None

    def test_param_change_invalidates(self, beryllium_corpus, beryllium_index, tmp_path):
        p = tmp_path / "index.json"
        save_index(beryllium_index, beryllium_corpus, p)
        assert load_index(p, beryllium_corpus, k1=1.5) is None

    def test_missing_or_garbage_file(self, beryllium_corpus, tmp_path):
        assert load_index(tmp_path / "nope.json", beryllium_corpus) is None
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        assert load_index(bad, beryllium_corpus) is None
