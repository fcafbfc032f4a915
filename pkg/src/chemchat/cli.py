"""Operator CLI: ingestion, indexing, generation, export, evaluation, serving.

Exit codes: 0 ok, 2 usage, 3 validation, 4 backend, 5 internal.  Every run
writes a manifest JSON next to its outputs; failures print one
machine-parseable line ``error <code>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import corpus as corpus_mod
from . import evaluation, factory, retrieval
from .agent import AgentConfig, DialogueTrace, run_turn
from .counting import get_counter
from .errors import (BudgetExceededError, ChemchatError, CorpusParseError,
                     CorpusValidationError, EmptyCorpusError, InfeasibleSpecError,
                     MalformedResponseError, ScriptExhaustedError, TransportError)
from .gateway import ChatMessage, ScriptedBackend, stamp_token_count
from .prompts import get_prompt
from .tools import ToolRegistry

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_BACKEND = 4
EXIT_INTERNAL = 5

_VALIDATION_ERRORS = (CorpusParseError, CorpusValidationError, EmptyCorpusError,
                      InfeasibleSpecError, ValueError)
_BACKEND_ERRORS = (TransportError, MalformedResponseError, ScriptExhaustedError,
                   BudgetExceededError)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix in (".toml", ".tml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def _write_manifest(out_dir: Path, command: str, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"command": command, "created_at": time.time(), **payload}
    (out_dir / "cli_manifest.json").write_text(
        json.dumps(manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def _counter(cfg: dict):
    return get_counter(cfg.get("token_counter", "heuristic"))


def _load_corpus(path: str, cfg: dict, lenient: bool = False):
    counter_id = cfg.get("token_counter", "heuristic")
    return corpus_mod.load_corpus(path, get_counter(counter_id),
                                  counter_id=counter_id, lenient=lenient)


def cmd_ingest(args, cfg) -> int:
    corpus = _load_corpus(args.corpus, cfg, lenient=args.lenient)
    stats = corpus_mod.compute_stats(corpus)
    print(f"databases: {len(corpus.databases)}  documents: {corpus.document_count()}  "
          f"sections: {corpus.section_count()}")
    print(f"section tokens: min {stats.sections.min}  max {stats.sections.max}  "
          f"mean {stats.sections.mean:.2f}  std {stats.sections.std:.2f}")
    _write_manifest(Path(args.out), "ingest", {
        "corpus": args.corpus, "documents": corpus.document_count(),
        "sections": corpus.section_count(), "corpus_hash": corpus.content_hash()})
    return EXIT_OK


def cmd_index_build(args, cfg) -> int:
    corpus = _load_corpus(args.corpus, cfg)
    index = retrieval.build_index(corpus, k1=cfg.get("k1", 1.2), b=cfg.get("b", 0.75))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    retrieval.save_index(index, corpus, out / "bm25_index.json")
    print(f"indexed {index.n_sections} sections, {len(index.postings)} terms")
    _write_manifest(out, "index build", {
        "corpus": args.corpus, "sections": index.n_sections,
        "terms": len(index.postings)})
    return EXIT_OK


def cmd_synth_corpus(args, cfg) -> int:
    spec = corpus_mod.SyntheticSpec(
        docs=args.docs, sections_per_doc=args.sections_per_doc,
        mean_tokens=args.mean_tokens, std_tokens=args.std_tokens)
    counter_id = cfg.get("token_counter", "heuristic")
    corpus = corpus_mod.generate_synthetic_corpus(
        spec, seed=args.seed, counter=get_counter(counter_id), counter_id=counter_id)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    corpus_mod.save_corpus(corpus, out)
    print(f"wrote {corpus.document_count()} documents / {corpus.section_count()} sections to {out}")
    _write_manifest(out.parent, "synth-corpus", {
        "seed": args.seed, "docs": args.docs, "out": str(out)})
    return EXIT_OK


def _make_registry(corpus, cfg, mode, script=None):
    index = retrieval.build_index(corpus, k1=cfg.get("k1", 1.2), b=cfg.get("b", 0.75))
    sub = ScriptedBackend.from_file(script) if script else None
    return ToolRegistry(corpus, index, mode=mode, summary_backend=sub, qa_backend=sub,
                        counter=_counter(cfg),
                        qa_threshold_tokens=cfg.get("qa_threshold_tokens", 200))


def cmd_chat(args, cfg) -> int:
    corpus = _load_corpus(args.corpus, cfg)
    registry = _make_registry(corpus, cfg, args.mode, args.sub_llm_script)
    backend = ScriptedBackend.from_file(args.agent_script)
    counter = _counter(cfg)
    config = AgentConfig(registry_mode=args.mode)
    history = [stamp_token_count(
        ChatMessage(role="system", content=get_prompt(config.system_prompt_id)), counter)]

    def on_event(kind, payload):
        print(f"[{kind}] {json.dumps(payload, ensure_ascii=False)[:200]}")

    for line in sys.stdin:
        text = line.strip()
        if not text:
            continue
        turn = run_turn(history, text, backend, registry, config,
                        counter=counter, on_event=on_event)
        print(turn.response)
    return EXIT_OK


def cmd_gen_scenarios(args, cfg) -> int:
    pool = factory.load_scenarios(args.pool)
    chem_names = json.loads(Path(args.chem_names).read_text(encoding="utf-8")) \
        if args.chem_names else []
    backend = ScriptedBackend.from_file(args.script)
    result = factory.augment_scenarios(pool, chem_names, args.count, backend,
                                       seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    factory.save_scenarios(result.scenarios, out / "scenarios.json")
    print(f"accepted {len(result.scenarios)} scenarios "
          f"({result.rejected} rejected, {result.attempts} batches)")
    _write_manifest(out, "gen-scenarios", {
        "seed": args.seed, "accepted": len(result.scenarios),
        "rejected": result.rejected, "budget_exhausted": result.budget_exhausted})
    return EXIT_OK


def cmd_gen_dialogues(args, cfg) -> int:
    corpus = _load_corpus(args.corpus, cfg)
    scenarios = factory.load_scenarios(args.scenarios)
    mode = cfg.get("mode", "full")
    counter = _counter(cfg)
    registry = _make_registry(corpus, cfg, mode, args.sub_llm_script)
    config = AgentConfig(registry_mode=mode)

    def agent_backend(_scenario):
        return ScriptedBackend.from_file(args.agent_script)

    sim_factory = None
    if args.sim_script:
        def sim_factory(_scenario):
            return ScriptedBackend.from_file(args.sim_script)

    manifest = factory.generate_dataset(
        scenarios,
        registry_factory=lambda s: registry,
        agent_backend_factory=agent_backend,
        simulator_backend_factory=sim_factory,
        config=config, seed=args.seed, out_dir=args.out,
        counter=counter, clock=lambda: 0.0,
        single_turn=args.single_turn)
    print(f"run {manifest.run_id}: {manifest.dialogue_count} dialogues, "
          f"{manifest.summary_pair_count} summary pairs, {manifest.qa_pair_count} qa pairs, "
          f"{manifest.failure_count} failures")
    return EXIT_OK


def cmd_export_sft(args, cfg) -> int:
    counter = _counter(cfg)
    trace_dir = Path(args.traces)
    traces = [DialogueTrace.from_dict(json.loads(p.read_text(encoding="utf-8")))
              for p in sorted(trace_dir.glob("*.json"))]
    if not traces:
        print("error 3: no traces found", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    system_prompt = get_prompt("agent_main")
    streams = {"dialogues": [], "summary_pairs": [], "qa_pairs": []}
    for trace in traces:
        for rec in factory.trace_to_sft_records(trace, system_prompt, counter=counter,
                                                single_turn=args.single_turn):
            key = {"dialogue": "dialogues", "summary_pair": "summary_pairs",
                   "qa_pair": "qa_pairs"}[rec.kind]
            streams[key].append(rec)
    for name, records in streams.items():
        with open(out / f"{name}.jsonl", "w", encoding="utf-8") as fh:
            for rec in records:
                rec.validate()
                fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")
    counts = {name: len(records) for name, records in streams.items()}
    print(json.dumps(counts))
    _write_manifest(out, "export-sft", counts)
    return EXIT_OK


def _load_traces(path: str) -> list[DialogueTrace]:
    return [DialogueTrace.from_dict(json.loads(p.read_text(encoding="utf-8")))
            for p in sorted(Path(path).glob("*.json"))
            if p.name not in ("manifest.json", "cli_manifest.json")]


def cmd_eval(args, cfg) -> int:
    report = evaluation.MetricReport()
    out = Path(args.out)
    if args.metric == "tokens":
        lines = []
        for pair in args.traces:
            label, _, path = pair.partition("=")
            traces = _load_traces(path or label)
            means = evaluation.token_breakdown(traces)
            cols = "  ".join(f"{role}={means[role]:.1f}" for role in evaluation.TOKEN_ROLES)
            lines.append(f"{label:<12} {cols}")
        print("\n".join(lines))
        _write_manifest(out, "eval tokens", {"modes": args.traces})
        return EXIT_OK
    cases = evaluation.load_eval_cases(args.cases)
    if args.metric == "search":
        traces = _load_traces(args.traces[0])
        by_id = {t.scenario_ref: t for t in traces}
        hits = sum(1 for c in cases
                   if c.scenario_id in by_id and evaluation.search_success(by_id[c.scenario_id], c))
        report.search_success_pct = 100.0 * hits / len(cases)
    elif args.metric == "consistency":
        corpus = _load_corpus(args.corpus, cfg)
        backend = ScriptedBackend.from_file(args.judge_script)
        traces = {t.scenario_ref: t for t in _load_traces(args.traces[0])}
        verdicts = [evaluation.judge_consistency(c, traces[c.scenario_id], corpus, backend)
                    for c in cases if c.scenario_id in traces]
        rate, counts = evaluation.aggregate_consistency(verdicts)
        report.db_consistency_pct = rate
        report.consistency_counts = counts
    elif args.metric == "preference":
        backend = ScriptedBackend.from_file(args.judge_script)
        traces_a = {t.scenario_ref: t for t in _load_traces(args.traces[0])}
        traces_b = {t.scenario_ref: t for t in _load_traces(args.traces_b)}
        verdicts = [evaluation.judge_preference(c, traces_a[c.scenario_id],
                                                traces_b[c.scenario_id], backend)
                    for c in cases
                    if c.scenario_id in traces_a and c.scenario_id in traces_b]
        report.preference = evaluation.aggregate_preference(verdicts)
    print(report.render_table())
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    _write_manifest(out, f"eval {args.metric}", {"report": report.to_dict()})
    return EXIT_OK


def cmd_serve(args, cfg) -> int:
    import uvicorn

    from .service import SessionFactory, create_app

    corpus = _load_corpus(args.corpus, cfg)
    registry = _make_registry(corpus, cfg, cfg.get("mode", "full"), args.sub_llm_script)
    configs = {
        "default": SessionFactory(
            make_backend=lambda: ScriptedBackend.from_file(args.agent_script),
            registry=registry, agent_config=AgentConfig()),
    }
    app = create_app(corpus, configs, counter=_counter(cfg))
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chemchat")
    parser.add_argument("--config", help="TOML or JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load and validate a corpus file")
    p.add_argument("corpus")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("index", help="index operations")
    idx_sub = p.add_subparsers(dest="index_command", required=True)
    pb = idx_sub.add_parser("build")
    pb.add_argument("--corpus", required=True)
    pb.add_argument("--out", default="out")
    pb.set_defaults(fn=cmd_index_build)

    p = sub.add_parser("synth-corpus", help="generate a synthetic corpus")
    p.add_argument("--docs", type=int, required=True)
    p.add_argument("--sections-per-doc", type=int, required=True)
    p.add_argument("--mean-tokens", type=float, required=True)
    p.add_argument("--std-tokens", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth_corpus)

    p = sub.add_parser("chat", help="REPL against a scripted backend, printing the tool trace")
    p.add_argument("--corpus", required=True)
    p.add_argument("--agent-script", required=True)
    p.add_argument("--sub-llm-script")
    p.add_argument("--mode", default="full")
    p.set_defaults(fn=cmd_chat)

    p = sub.add_parser("gen-scenarios")
    p.add_argument("--pool", required=True)
    p.add_argument("--chem-names")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--script", required=True, help="scripted generator backend")
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_gen_scenarios)

    p = sub.add_parser("gen-dialogues")
    p.add_argument("--corpus", required=True)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--agent-script", required=True)
    p.add_argument("--sim-script")
    p.add_argument("--sub-llm-script")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--single-turn", action="store_true")
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_gen_dialogues)

    p = sub.add_parser("export-sft")
    p.add_argument("--traces", required=True)
    p.add_argument("--single-turn", action="store_true")
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_export_sft)

    p = sub.add_parser("eval")
    p.add_argument("metric", choices=["consistency", "preference", "search", "tokens"])
    p.add_argument("--traces", action="append", default=[],
                   help="trace dir, or label=dir (repeatable for tokens)")
    p.add_argument("--traces-b", help="second model's trace dir (preference)")
    p.add_argument("--cases")
    p.add_argument("--corpus")
    p.add_argument("--judge-script")
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("serve")
    p.add_argument("--corpus", required=True)
    p.add_argument("--agent-script", required=True)
    p.add_argument("--sub-llm-script")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        cfg = _load_config(args.config)
        return args.fn(args, cfg)
    except _BACKEND_ERRORS as exc:
        print(f"error {EXIT_BACKEND}: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except _VALIDATION_ERRORS as exc:
        print(f"error {EXIT_VALIDATION}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ChemchatError as exc:
        print(f"error {EXIT_INTERNAL}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error {EXIT_INTERNAL}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
