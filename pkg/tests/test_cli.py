"""CLI subcommands, exit codes, manifests, and end-to-end determinism."""

import json

import pytest

from chemchat.cli import (
    EXIT_BACKEND, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main,
)

from conftest import beryllium_agent_script, text_step, write_json


@pytest.fixture
def corpus_file(tmp_path, beryllium_corpus_dict):
    return write_json(tmp_path / "corpus.json", beryllium_corpus_dict)


@pytest.fixture
def agent_script_file(tmp_path):
    return write_json(tmp_path / "agent.json", beryllium_agent_script())


@pytest.fixture
def sub_llm_script_file(tmp_path):
    # one reply per summary/QA invocation in the walkthrough (1 + 2 = 3)
    return write_json(tmp_path / "sub.json", [
        text_step("Condensed symptom overview for the query."),
        text_step("Answer: exposure causes pneumonitis and dermatitis."),
        text_step("Answer: main routes are occupational dust and fumes."),
    ])


@pytest.fixture
def scenarios_file(tmp_path):
    return write_json(tmp_path / "scenarios.json", [{
        "persona": "a curious factory worker",
        "situation": "handles metal dust daily",
        "intention": "wants to know health risks",
        "question": "What symptoms appear when humans are exposed to beryllium?",
        "origin": "human", "id": "scn-1",
    }])


class TestExitCodes:
    def test_usage_error(self, capsys):
        assert main(["definitely-not-a-command"]) == EXIT_USAGE

    def test_missing_corpus_is_validation(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken", encoding="utf-8")
        code = main(["ingest", str(bad), "--out", str(tmp_path / "out")])
        assert code == EXIT_VALIDATION
        err = capsys.readouterr().err
        assert err.startswith("error 3: ")

    def test_backend_error(self, corpus_file, scenarios_file, tmp_path, capsys):
        empty_script = write_json(tmp_path / "empty.json", [])
        code = main(["gen-scenarios", "--pool", str(scenarios_file),
                     "--count", "1", "--script", str(empty_script),
                     "--out", str(tmp_path / "out")])
        # the scripted generator exhausts immediately; batches are skipped and
        # the command still completes with zero accepted scenarios
        assert code == EXIT_OK

    def test_exhausted_agent_script_is_backend_error(
            self, corpus_file, scenarios_file, tmp_path, capsys):
        empty = write_json(tmp_path / "empty.json", [])
        code = main(["export-sft", "--traces", str(tmp_path / "nowhere"),
                     "--out", str(tmp_path / "out")])
        assert code == EXIT_VALIDATION
        assert "error 3:" in capsys.readouterr().err


class TestIngest:
    def test_prints_stats_and_writes_manifest(self, corpus_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["ingest", str(corpus_file), "--out", str(out)]) == EXIT_OK
        stdout = capsys.readouterr().out
        assert "databases: 2" in stdout
        assert "documents: 4" in stdout
        assert "sections: 6" in stdout
        manifest = json.loads((out / "cli_manifest.json").read_text())
        assert manifest["command"] == "ingest"
        assert manifest["documents"] == 4

    def test_strict_rejects_unknown_keys(self, tmp_path, beryllium_corpus_dict, capsys):
        data = json.loads(json.dumps(beryllium_corpus_dict))
        data["databases"]["chemical"][0]["surprise"] = True
        p = write_json(tmp_path / "c.json", data)
        assert main(["ingest", str(p), "--out", str(tmp_path / "o")]) == EXIT_VALIDATION
        assert main(["ingest", str(p), "--lenient",
                     "--out", str(tmp_path / "o2")]) == EXIT_OK


class TestIndexBuild:
    def test_builds_and_caches(self, corpus_file, tmp_path, capsys):
        out = tmp_path / "idx"
        assert main(["index", "build", "--corpus", str(corpus_file),
                     "--out", str(out)]) == EXIT_OK
        assert (out / "bm25_index.json").exists()
        assert "indexed 6 sections" in capsys.readouterr().out


class TestSynthCorpus:
    def test_deterministic_generation(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        args = ["synth-corpus", "--docs", "4", "--sections-per-doc", "3",
                "--mean-tokens", "50", "--std-tokens", "10", "--seed", "9"]
        assert main(args + ["--out", str(a)]) == EXIT_OK
        assert main(args + ["--out", str(b)]) == EXIT_OK
        assert a.read_text() == b.read_text()

    def test_infeasible_spec_is_validation(self, tmp_path, capsys):
        code = main(["synth-corpus", "--docs", "0", "--sections-per-doc", "3",
                     "--mean-tokens", "50", "--out", str(tmp_path / "x.json")])
        assert code == EXIT_VALIDATION


class TestGenScenarios:
    def test_accepts_from_scripted_generator(self, scenarios_file, tmp_path, capsys):
        gen_script = write_json(tmp_path / "gen.json", [
            text_step(json.dumps({"scenarios": [{
                "persona": "retired welder with metal exposure history",
                "situation": "was told an old workshop used unusual alloys",
                "intention": "wants a clear layperson explanation of dangers",
                "question": "How toxic is thallium in drinking water supplies?",
            }]}))])
        out = tmp_path / "out"
        assert main(["gen-scenarios", "--pool", str(scenarios_file),
                     "--count", "1", "--seed", "3", "--script", str(gen_script),
                     "--out", str(out)]) == EXIT_OK
        accepted = json.loads((out / "scenarios.json").read_text())
        assert len(accepted) == 1
        assert accepted[0]["origin"] == "generated"
        assert "accepted 1 scenarios" in capsys.readouterr().out


class TestGenDialoguesAndExport:
    def run_gen(self, corpus_file, scenarios_file, agent_script_file,
                sub_llm_script_file, out):
        return main(["gen-dialogues", "--corpus", str(corpus_file),
                     "--scenarios", str(scenarios_file),
                     "--agent-script", str(agent_script_file),
                     "--sub-llm-script", str(sub_llm_script_file),
                     "--sim-script", str(agent_script_file.parent / "sim.json"),
                     "--seed", "7", "--out", str(out)])

    @pytest.fixture
    def sim_script_file(self, tmp_path):
        return write_json(tmp_path / "sim.json", [
            text_step("What are the main routes of exposure to beryllium?"),
            text_step("Anything else I should know?"),
            text_step("And one more follow-up?"),
        ])

    def test_gen_is_seed_deterministic(self, corpus_file, scenarios_file,
                                       agent_script_file, sub_llm_script_file,
                                       sim_script_file, tmp_path, capsys):
        out_a, out_b = tmp_path / "ra", tmp_path / "rb"
        assert self.run_gen(corpus_file, scenarios_file, agent_script_file,
                            sub_llm_script_file, out_a) == EXIT_OK
        assert self.run_gen(corpus_file, scenarios_file, agent_script_file,
                            sub_llm_script_file, out_b) == EXIT_OK
        assert (out_a / "manifest.json").read_text() == \
               (out_b / "manifest.json").read_text()
        assert (out_a / "dialogues.jsonl").read_text() == \
               (out_b / "dialogues.jsonl").read_text()

    def test_export_sft_from_traces(self, corpus_file, scenarios_file,
                                    agent_script_file, sub_llm_script_file,
                                    sim_script_file, tmp_path, capsys):
        gen_out = tmp_path / "gen"
        assert self.run_gen(corpus_file, scenarios_file, agent_script_file,
                            sub_llm_script_file, gen_out) == EXIT_OK
        manifest = json.loads((gen_out / "manifest.json").read_text())
        run_dir = gen_out / manifest["run_id"]
        sft_out = tmp_path / "sft"
        assert main(["export-sft", "--traces", str(run_dir),
                     "--out", str(sft_out)]) == EXIT_OK
        counts = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert counts["dialogues"] == manifest["dialogue_count"]
        for name in ("dialogues", "summary_pairs", "qa_pairs"):
            assert (sft_out / f"{name}.jsonl").exists()


class TestEvalTokens:
    def test_token_table(self, corpus_file, scenarios_file, agent_script_file,
                         sub_llm_script_file, tmp_path, capsys):
        gen_out = tmp_path / "gen"
        assert main(["gen-dialogues", "--corpus", str(corpus_file),
                     "--scenarios", str(scenarios_file),
                     "--agent-script", str(agent_script_file),
                     "--sub-llm-script", str(sub_llm_script_file),
                     "--seed", "7", "--single-turn", "--out", str(gen_out)]) == EXIT_OK
        manifest = json.loads((gen_out / "manifest.json").read_text())
        run_dir = gen_out / manifest["run_id"]
        capsys.readouterr()
        assert main(["eval", "tokens", "--traces", f"full={run_dir}",
                     "--out", str(tmp_path / "ev")]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("full")
        for role in ("system=", "user=", "tool_call=", "tool_output=", "response="):
            assert role in out


class TestEvalSearch:
    def test_search_rate(self, corpus_file, scenarios_file, agent_script_file,
                         sub_llm_script_file, tmp_path, capsys):
        gen_out = tmp_path / "gen"
        assert main(["gen-dialogues", "--corpus", str(corpus_file),
                     "--scenarios", str(scenarios_file),
                     "--agent-script", str(agent_script_file),
                     "--sub-llm-script", str(sub_llm_script_file),
                     "--seed", "7", "--single-turn", "--out", str(gen_out)]) == EXIT_OK
        manifest = json.loads((gen_out / "manifest.json").read_text())
        run_dir = gen_out / manifest["run_id"]
        cases = write_json(tmp_path / "cases.json", [{
            "scenario_id": "scn-1",
            "reference_doc_ids": [["chemical", "Beryllium, elemental"]],
        }])
        capsys.readouterr()
        assert main(["eval", "search", "--traces", str(run_dir),
                     "--cases", str(cases), "--out", str(tmp_path / "ev")]) == EXIT_OK
        out = capsys.readouterr().out
        assert "Search Rate (% Success)" in out
        assert "100.0" in out


class TestConfigFile:
    def test_toml_config(self, corpus_file, tmp_path, capsys):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text('token_counter = "whitespace"\n', encoding="utf-8")
        assert main(["--config", str(cfg), "ingest", str(corpus_file),
                     "--out", str(tmp_path / "o")]) == EXIT_OK

    def test_json_config(self, corpus_file, tmp_path):
        cfg = write_json(tmp_path / "cfg.json", {"token_counter": "heuristic"})
        assert main(["--config", str(cfg), "ingest", str(corpus_file),
                     "--out", str(tmp_path / "o")]) == EXIT_OK
